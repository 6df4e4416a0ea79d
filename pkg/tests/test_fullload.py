import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from roadm_cluster.fullload import (
    AddDropPort,
    ConnectionRequest,
    EndpointBusyError,
    FabricState,
    InstanceTooLarge,
    LineDegree,
    SimConfig,
    default_cases,
    endpoint_from_id,
    endpoint_id,
    first_fit_blocked,
    generate_connectivity_map,
    maps_for_volume,
    rearrangement_oracle,
    route_maps,
    route_request,
    run_full_load,
    run_scenarios,
)
from roadm_cluster.topology import ClusterConfig, InterconnectPattern, build_cluster


def chassis_requests(config, pairs, wavelength=0):
    """Requests between line chassis, each on the next free card."""
    up = [0] * config.E
    dn = [0] * config.E
    out = []
    for s, d in pairs:
        out.append(ConnectionRequest(LineDegree(s, up[s]), LineDegree(d, dn[d]), wavelength))
        up[s] += 1
        dn[d] += 1
    return out


# endpoint ids


def test_endpoint_ids_roundtrip():
    cfg = ClusterConfig(N=3, M=5, E=2, F=2)
    ids = []
    for c, k in itertools.product(range(2), range(3)):
        ids.append(endpoint_id(cfg, LineDegree(c, k)))
    for c, k in itertools.product(range(2), range(3)):
        ids.append(endpoint_id(cfg, AddDropPort(c, k)))
    assert ids == list(range(12))
    assert all(endpoint_id(cfg, endpoint_from_id(cfg, i)) == i for i in ids)


def test_endpoint_bounds():
    cfg = ClusterConfig(N=3, M=5, E=2, F=0)
    with pytest.raises(ValueError):
        endpoint_id(cfg, LineDegree(2, 0))
    with pytest.raises(ValueError):
        endpoint_id(cfg, AddDropPort(0, 0))
    with pytest.raises(ValueError):
        ConnectionRequest(LineDegree(0, 0), LineDegree(0, 0), 0)


# connectivity maps


def test_map_is_deterministic():
    case = default_cases(seed=7)[2]
    a = generate_connectivity_map(case.config, case.sim, 3)
    b = generate_connectivity_map(case.config, case.sim, 3)
    c = generate_connectivity_map(case.config, case.sim, 4)
    assert a.tobytes() == b.tobytes()
    assert a.tobytes() != c.tobytes()


def test_golden_first_requests():
    case = default_cases(seed=42)[0]
    mp = generate_connectivity_map(case.config, case.sim, 0)
    assert len(mp) == 30464
    assert mp[0] == ConnectionRequest(LineDegree(6, 8), LineDegree(6, 9), 5)
    assert mp.src[:3].tolist() == [92, 73, 35]
    assert mp.dst[:3].tolist() == [93, 37, 107]
    assert mp.wavelength[:3].tolist() == [5, 240, 63]


def test_case5_has_no_add_drop_endpoints():
    case = default_cases(seed=1)[4]
    mp = generate_connectivity_map(case.config, case.sim, 0)
    assert not any(isinstance(r.dst, AddDropPort) or isinstance(r.src, AddDropPort) for r in mp[:2000])
    assert mp.dst.max() < case.config.E * case.config.N


def test_map_endpoint_uniqueness_per_plane():
    case = default_cases(seed=2)[0]
    mp = generate_connectivity_map(case.config, case.sim, 0)
    D = case.config.chassis_count * case.config.N
    assert len(set(mp.src + D * mp.wavelength)) == len(mp)
    assert len(set(mp.dst + D * mp.wavelength)) == len(mp)
    assert not np.any(mp.src == mp.dst)
    assert mp.src.max() < case.config.E * case.config.N


def test_map_prefix_property():
    cfg = ClusterConfig(N=4, M=7, E=3, F=1)
    long = generate_connectivity_map(cfg, SimConfig(300, wavelengths=40, seed=11))
    short = generate_connectivity_map(cfg, SimConfig(250, wavelengths=40, seed=11))
    assert short.src.tolist() == long.src[:250].tolist()
    assert short.dst.tolist() == long.dst[:250].tolist()
    assert short.wavelength.tolist() == long.wavelength[:250].tolist()


def test_map_rejects_too_many_connections():
    cfg = ClusterConfig(N=2, M=3, E=2, F=0)
    with pytest.raises(ValueError, match="exceed"):
        generate_connectivity_map(cfg, SimConfig(17, wavelengths=4))


def test_add_drop_share_tracks_pool_size():
    case = default_cases(seed=5)[0]  # E = F, so half of all egress endpoints are drop ports
    mp = generate_connectivity_map(case.config, case.sim, 0)
    share = np.mean(mp.dst >= case.config.E * case.config.N)
    # line egress fills up as line sources take their own channels, so drops
    # get somewhat more than half
    assert 0.5 < share < 0.6


# router examples


def test_route_empty_fabric_takes_middle_zero():
    cfg = ClusterConfig(N=2, M=3, E=2)
    state = FabricState(build_cluster(cfg), 2)
    out = route_request(state, ConnectionRequest(LineDegree(0, 0), LineDegree(1, 0), 0))
    assert out.accepted and out.middle == 0
    assert state.occupied_units() == 2


def test_route_takes_last_free_middle():
    cfg = ClusterConfig(N=4, M=4, E=3)
    state = FabricState(build_cluster(cfg), 1)
    for m in range(3):
        # other chassis keep middles 0..2 busy into chassis 1
        route_request(state, ConnectionRequest(LineDegree(2, m), LineDegree(1, m), 0))
    out = route_request(state, ConnectionRequest(LineDegree(0, 0), LineDegree(1, 3), 0))
    assert out.middle == 3


def test_route_local_uses_no_fiber():
    cfg = ClusterConfig(N=3, M=1, E=2)
    state = FabricState(build_cluster(cfg), 1)
    out = route_request(state, ConnectionRequest(LineDegree(0, 0), LineDegree(0, 1), 0))
    assert out.accepted and out.local
    assert state.occupied_units() == 0 and state.accepted == 1


def test_route_rejects_busy_endpoint_and_bad_wavelength():
    cfg = ClusterConfig(N=2, M=3, E=2)
    state = FabricState(build_cluster(cfg), 2)
    route_request(state, ConnectionRequest(LineDegree(0, 0), LineDegree(1, 0), 1))
    with pytest.raises(EndpointBusyError):
        route_request(state, ConnectionRequest(LineDegree(0, 0), LineDegree(1, 1), 1))
    with pytest.raises(EndpointBusyError):
        route_request(state, ConnectionRequest(LineDegree(0, 1), LineDegree(1, 0), 1))
    with pytest.raises(ValueError):
        route_request(state, ConnectionRequest(LineDegree(0, 1), LineDegree(1, 1), 2))
    # the other plane is untouched
    assert route_request(state, ConnectionRequest(LineDegree(0, 0), LineDegree(1, 0), 0)).middle == 0


def test_first_fit_blocks_rearrangeable_instance():
    cfg = ClusterConfig(N=2, M=2, E=5)
    reqs = chassis_requests(cfg, [(0, 1), (2, 3), (0, 4), (2, 4)])
    state = FabricState(build_cluster(cfg), 1)
    outs = [route_request(state, r) for r in reqs]
    assert [o.middle for o in outs[:3]] == [0, 0, 1]
    assert not outs[3].accepted
    assert rearrangement_oracle(reqs, cfg) == 0


def test_no_three_request_instance_blocks_small_fabric():
    cfg = ClusterConfig(N=2, M=2, E=6)
    topo = build_cluster(cfg)
    chassis = range(6)
    pairs = [(s, d) for s in chassis for d in chassis if s != d]
    for seq in itertools.product(pairs, repeat=3):
        ups = np.bincount([p[0] for p in seq], minlength=6)
        dns = np.bincount([p[1] for p in seq], minlength=6)
        if ups.max() > 2 or dns.max() > 2:
            continue
        assert first_fit_blocked(chassis_requests(cfg, seq), topo) == 0


# oracle


def test_oracle_zero_when_strict_sense():
    cfg = ClusterConfig(N=2, M=3, E=4)
    reqs = chassis_requests(cfg, [(0, 1), (2, 3), (0, 3), (2, 1)])
    assert rearrangement_oracle(reqs, cfg) == 0
    assert first_fit_blocked(reqs, build_cluster(cfg)) == 0


def test_oracle_counts_overloaded_chassis():
    cfg = ClusterConfig(N=3, M=2, E=4)
    reqs = chassis_requests(cfg, [(0, 1), (0, 2), (0, 3)])
    assert rearrangement_oracle(reqs, cfg) == 1


def test_oracle_refuses_large_instances():
    cfg = ClusterConfig(N=4, M=4, E=5)
    reqs = chassis_requests(cfg, [(i % 5, (i + 1) % 5) for i in range(13)])
    with pytest.raises(InstanceTooLarge):
        rearrangement_oracle(reqs, cfg)


pair_lists = st.integers(2, 5).flatmap(
    lambda C: st.lists(
        st.tuples(st.integers(0, C - 1), st.integers(0, C - 1)).filter(lambda p: p[0] != p[1]),
        max_size=8,
    ).map(lambda ps: (C, ps))
)


@given(pair_lists, st.integers(1, 3), st.integers(1, 5))
def test_first_fit_never_beats_oracle(cp, N, M):
    C, pairs = cp
    up = np.bincount([p[0] for p in pairs], minlength=C) if pairs else np.zeros(C)
    dn = np.bincount([p[1] for p in pairs], minlength=C) if pairs else np.zeros(C)
    N = max(N, int(up.max(initial=0)), int(dn.max(initial=0)))
    cfg = ClusterConfig(N=N, M=M, E=C)
    reqs = chassis_requests(cfg, pairs)
    best = rearrangement_oracle(reqs, cfg)
    assert 0 <= best <= first_fit_blocked(reqs, build_cluster(cfg))
    if M >= 2 * N - 1:
        assert first_fit_blocked(reqs, build_cluster(cfg)) == 0


# vectorised router against the scalar reference


def scalar_flags(topo, mp, W):
    state = FabricState(topo, W)
    return np.array([not route_request(state, r).accepted for r in mp])


small_fabrics = st.tuples(
    st.integers(1, 4), st.integers(1, 4), st.integers(1, 4), st.integers(0, 3),
    st.integers(1, 6), st.sampled_from(["proposed", "random"]), st.integers(0, 2**32 - 1),
)


@given(small_fabrics)
def test_vectorised_router_matches_scalar(params):
    N, M, E, F, W, kind, seed = params
    cfg = ClusterConfig(N=N, M=M, E=E, F=F)
    pattern = InterconnectPattern.parse(kind, seed=seed % 97)
    topo = build_cluster(cfg, pattern)
    free_dst = (E + F) * N
    if free_dst < 2:
        return
    L = max(1, (E * N * W * 3) // 4)
    sim = SimConfig(L, wavelengths=W, seed=seed)
    try:
        maps = [generate_connectivity_map(cfg, sim, i) for i in range(3)]
    except ValueError:
        return  # a plane ran out of destinations
    for mp, flags in zip(maps, route_maps(topo, maps, W)):
        assert flags.tolist() == scalar_flags(topo, mp, W).tolist()


def test_vectorised_router_matches_scalar_on_reference_case():
    case = default_cases(seed=9)[4]
    topo = build_cluster(case.config)
    mp = generate_connectivity_map(case.config, case.sim, 0)
    (flags,) = route_maps(topo, [mp], case.sim.wavelengths)
    assert flags.tolist() == scalar_flags(topo, mp, case.sim.wavelengths).tolist()


@given(small_fabrics)
def test_conservation_and_occupancy(params):
    N, M, E, F, W, kind, seed = params
    cfg = ClusterConfig(N=N, M=M, E=E, F=F)
    topo = build_cluster(cfg, InterconnectPattern.parse(kind, seed=seed % 97))
    if (E + F) * N < 2:
        return
    try:
        mp = generate_connectivity_map(cfg, SimConfig(max(1, E * N * W // 2), wavelengths=W, seed=seed))
    except ValueError:
        return
    state = FabricState(topo, W)
    outs = [route_request(state, r) for r in mp]
    blocked = sum(not o.accepted for o in outs)
    assert state.accepted + blocked == len(mp)
    assert state.occupied_units() == 2 * state.routed
    assert (state.up <= topo.capacity_matrix()[:, :, None]).all()
    assert (state.down <= topo.capacity_matrix()[:, :, None]).all()


# full-load runs


def test_single_request_never_blocks():
    cfg = ClusterConfig(N=14, M=16, E=16)
    res = run_full_load(cfg, SimConfig(1, seed=3))
    assert (res.offered, res.blocked) == (1, 0)
    assert res.ci_low == 0.0 and res.ci_high < 1


def test_per_degree_counts_add_up():
    case = default_cases(seed=4)[1]
    res = run_full_load(case.config, case.sim)
    assert sum(res.per_degree_offered) == res.offered
    assert sum(res.per_degree_blocked) == res.blocked
    assert len(res.per_degree_offered) == case.config.E * case.config.N


def test_blocking_rises_from_case1_to_case5():
    rows = run_scenarios(default_cases(maps=16, seed=8))
    assert rows[4].blocking_rate >= rows[0].blocking_rate
    assert rows[4].blocked > 0


def test_scenario_columns():
    rows = run_scenarios(default_cases(maps=1, seed=1))
    assert [r.degrees for r in rows] == [112, 140, 168, 196, 224]
    assert [round(100 * r.add_drop_rate) for r in rows] == [100, 60, 33, 14, 0]
    assert [r.offered for r in rows] == [30464, 38080, 45696, 53312, 60928]
    assert all(r.error is None for r in rows)


def test_scenario_error_is_recorded_per_case():
    cases = default_cases(maps=1, seed=1)
    bad = cases[0].__class__("bad", cases[0].config, SimConfig(10**7, seed=1))
    rows = run_scenarios([bad, cases[4]])
    assert rows[0].error and "exceed" in rows[0].error
    assert rows[1].error is None and rows[1].offered == 60928
    with pytest.raises(ValueError):
        run_scenarios([])


def test_results_independent_of_workers():
    case = default_cases(maps=20, seed=6)[3]
    one = run_full_load(case.config, case.sim, workers=1)
    two = run_full_load(case.config, case.sim, workers=2)
    assert one == two


@pytest.mark.parametrize("pattern_seed", [5, 6])
def test_proposed_wiring_beats_random(pattern_seed):
    proposed = run_scenarios(default_cases(maps=8, seed=3))
    rand = run_scenarios(default_cases(maps=8, seed=3, pattern=InterconnectPattern.parse("random", seed=pattern_seed)))
    for p, r in zip(proposed, rand):
        assert p.offered == r.offered
        assert p.blocking_rate <= r.blocking_rate


@given(small_fabrics)
def test_batching_does_not_change_flags(params):
    N, M, E, F, W, kind, seed = params
    cfg = ClusterConfig(N=N, M=M, E=E, F=F)
    topo = build_cluster(cfg, InterconnectPattern.parse(kind, seed=seed % 97))
    if (E + F) * N < 2:
        return
    sim = SimConfig(max(1, E * N * W // 2), wavelengths=W, seed=seed)
    try:
        maps = [generate_connectivity_map(cfg, sim, i) for i in range(3)]
    except ValueError:
        return
    together = route_maps(topo, maps, W)
    apart = [route_maps(topo, [mp], W)[0] for mp in maps]
    assert [f.tolist() for f in together] == [f.tolist() for f in apart]


def test_blocked_count_grows_with_load():
    cfg = ClusterConfig(N=14, M=16, E=16)
    counts, rates = [], []
    for load in (0.5, 0.7, 0.85, 0.95):
        res = run_full_load(cfg, SimConfig.at_load(cfg, load, maps=2, seed=12))
        counts.append(res.blocked)
        rates.append(res.blocking_rate)
    # shorter maps are prefixes of longer ones and first fit never revisits
    assert counts == sorted(counts)
    assert rates == sorted(rates)
    assert counts[-1] > counts[0]


def test_maps_for_volume():
    sim = SimConfig(30464)
    assert maps_for_volume(sim, 2 * 10**7) == 657
    assert maps_for_volume(sim, 1) == 1
