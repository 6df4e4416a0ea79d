"""Full-load Monte Carlo of a cluster node.

Every wavelength is an independent switching plane. Within a plane the node
is a three-stage Clos fabric: the ingress side of each edge chassis is a
first-stage switch with ``N`` inlets, the ``M`` interconnect chassis are the
middle stage, and the egress side of each edge chassis is a third-stage
switch. A connection uses the upstream direction of the fiber from its
source chassis and the downstream direction of the fiber into its
destination chassis, one wavelength unit each.

Reference traffic model: sources are line-degree ingress channels, drawn
uniformly without replacement over all ``(degree, wavelength)`` pairs.
Destinations are drawn uniformly over the free egress endpoints of the same
wavelength, line degrees and drop ports alike, so the add/drop pool as a
whole is chosen with weight ``F / E`` relative to the line pool.
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Iterator, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.stats import binomtest

from .topology import (
    ClusterConfig,
    ClusterTopology,
    InterconnectPattern,
    PatternKind,
    add_drop_rate,
    build_cluster,
    total_degrees,
)

RNG_NAME = "numpy.random.PCG64"
DEFAULT_CONNECTIONS = 48000
DEFAULT_WAVELENGTHS = 320
# fraction of line-degree ingress channels lit in the reference scenarios
REFERENCE_LINE_LOAD = 0.85
REFERENCE_CASES: tuple[tuple[int, int], ...] = ((8, 8), (10, 6), (12, 4), (14, 2), (16, 0))
REFERENCE_N = 14
REFERENCE_M = 16
# maps routed together by the vectorised router; fixed so results never
# depend on how work is split
_BATCH_MAPS = 8


class ConnectionMethod(str, Enum):
    ORDER_BASED = "order-based"


class EndpointBusyError(RuntimeError):
    """An endpoint is already in use on the requested wavelength."""


class InstanceTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class LineDegree:
    chassis: int
    card: int


@dataclass(frozen=True)
class AddDropPort:
    chassis: int
    port: int


Endpoint = LineDegree | AddDropPort


def endpoint_id(config: ClusterConfig, ep: Endpoint) -> int:
    """Flat endpoint index: line degrees first, then add/drop ports."""
    N = config.N
    if isinstance(ep, LineDegree):
        if not (0 <= ep.chassis < config.E and 0 <= ep.card < N):
            raise ValueError(f"{ep} outside E={config.E}, N={N}")
        return ep.chassis * N + ep.card
    if config.F == 0:
        raise ValueError("add/drop ports do not exist when F = 0")
    if not (0 <= ep.chassis < config.F and 0 <= ep.port < N):
        raise ValueError(f"{ep} outside F={config.F}, ports={N}")
    return (config.E + ep.chassis) * N + ep.port


def endpoint_from_id(config: ClusterConfig, idx: int) -> Endpoint:
    c, k = divmod(int(idx), config.N)
    if c < config.E:
        return LineDegree(c, k)
    return AddDropPort(c - config.E, k)


@dataclass(frozen=True)
class ConnectionRequest:
    src: Endpoint
    dst: Endpoint
    wavelength: int

    def __post_init__(self) -> None:
        if self.src == self.dst:
            raise ValueError("src and dst must differ")
        if self.wavelength < 0:
            raise ValueError(f"negative wavelength {self.wavelength}")


@dataclass(frozen=True)
class SimConfig:
    connections_per_map: int = DEFAULT_CONNECTIONS
    wavelengths: int = DEFAULT_WAVELENGTHS
    maps: int = 1
    seed: int = 0
    method: ConnectionMethod = ConnectionMethod.ORDER_BASED
    pattern: InterconnectPattern = field(default_factory=InterconnectPattern)

    def __post_init__(self) -> None:
        for name in ("connections_per_map", "wavelengths", "maps"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")

    @classmethod
    def at_load(cls, config: ClusterConfig, load: float, **kwargs) -> SimConfig:
        """Size ``connections_per_map`` to light ``load`` of the line ingress channels."""
        if not 0 < load <= 1:
            raise ValueError(f"load must lie in (0, 1], got {load}")
        W = kwargs.get("wavelengths", DEFAULT_WAVELENGTHS)
        n = max(1, round(load * total_degrees(config) * W))
        return cls(connections_per_map=n, **kwargs)

    def to_dict(self) -> dict:
        return {
            "connections_per_map": self.connections_per_map,
            "wavelengths": self.wavelengths,
            "maps": self.maps,
            "seed": self.seed,
            "method": self.method.value,
            "pattern": self.pattern.kind.value,
            "pattern_seed": self.pattern.seed,
        }


@dataclass(frozen=True, eq=False)
class ConnectivityMap(Sequence):
    """One generated map, stored as flat endpoint ids per request."""

    config: ClusterConfig
    src: np.ndarray
    dst: np.ndarray
    wavelength: np.ndarray

    def __len__(self) -> int:
        return len(self.src)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        return ConnectionRequest(
            endpoint_from_id(self.config, self.src[i]),
            endpoint_from_id(self.config, self.dst[i]),
            int(self.wavelength[i]),
        )

    def __iter__(self) -> Iterator[ConnectionRequest]:
        return (self[i] for i in range(len(self)))

    def tobytes(self) -> bytes:
        return self.src.tobytes() + self.dst.tobytes() + self.wavelength.tobytes()


def map_rng(seed: int, map_index: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(entropy=seed, spawn_key=(map_index,)))
    )


def generate_connectivity_map(
    config: ClusterConfig, sim: SimConfig, map_index: int = 0
) -> ConnectivityMap:
    """Draw ``sim.connections_per_map`` requests for one full-load map.

    Endpoint/wavelength collisions are resampled, never emitted. A map with
    ``L`` requests is a prefix of the map with ``L + 1`` for the same seed.
    """
    EN, D, W = config.E * config.N, config.chassis_count * config.N, sim.wavelengths
    L = sim.connections_per_map
    if L > EN * W:
        raise ValueError(
            f"{L} connections exceed the {EN * W} line ingress channels "
            f"({EN} degrees x {W} wavelengths)"
        )
    rng = map_rng(sim.seed, map_index)
    chans = rng.permutation(EN * W)[:L]
    wl, src = np.divmod(chans, EN)
    order = rng.permuted(np.tile(np.arange(D, dtype=np.int64), (W, 1)), axis=1)
    redraw = rng.random((W, D))

    counts = np.bincount(wl, minlength=W)
    by_plane = np.argsort(wl, kind="stable")
    rank = np.empty(L, dtype=np.int64)
    rank[by_plane] = np.arange(L) - np.repeat(np.cumsum(counts) - counts, counts)

    # a destination equal to the source is redrawn from the plane's
    # remaining free egress endpoints; swaps only touch later positions
    clash = np.flatnonzero(order[wl, rank] == src)
    for i in clash[np.lexsort((rank[clash], wl[clash]))]:
        w, k = wl[i], rank[i]
        row = order[w]
        if row[k] != src[i]:
            continue
        rest = D - k - 1
        if rest == 0:
            raise ValueError(f"wavelength {w} has no free destination left for request {i}")
        j = k + 1 + int(redraw[w, k] * rest)
        row[k], row[j] = row[j], row[k]
    dst = order[wl, rank]
    return ConnectivityMap(config, src.astype(np.int64), dst, wl.astype(np.int64))


@dataclass(frozen=True)
class RouteOutcome:
    accepted: bool
    middle: int | None = None

    @property
    def local(self) -> bool:
        return self.accepted and self.middle is None


BLOCKED = RouteOutcome(False)


class FabricState:
    """Per-wavelength occupancy of every fiber direction and endpoint."""

    def __init__(self, topology: ClusterTopology, wavelengths: int = DEFAULT_WAVELENGTHS):
        cfg = topology.config
        self.topology = topology
        self.config = cfg
        self.wavelengths = wavelengths
        self.capacity = topology.capacity_matrix()
        C, M, D = cfg.chassis_count, cfg.M, cfg.chassis_count * cfg.N
        self.up = np.zeros((C, M, wavelengths), dtype=np.int64)
        self.down = np.zeros((C, M, wavelengths), dtype=np.int64)
        self.ingress_busy = np.zeros((D, wavelengths), dtype=bool)
        self.egress_busy = np.zeros((D, wavelengths), dtype=bool)
        self.routed = 0
        self.local = 0

    @property
    def accepted(self) -> int:
        return self.routed + self.local

    def occupied_units(self) -> int:
        return int(self.up.sum() + self.down.sum())

    def copy(self) -> FabricState:
        new = object.__new__(FabricState)
        new.__dict__.update(self.__dict__)
        for name in ("up", "down", "ingress_busy", "egress_busy"):
            setattr(new, name, getattr(self, name).copy())
        return new


def route_request(
    state: FabricState,
    req: ConnectionRequest,
    method: ConnectionMethod = ConnectionMethod.ORDER_BASED,
) -> RouteOutcome:
    """First-fit over interconnect chassis in ascending index order."""
    if method is not ConnectionMethod.ORDER_BASED:
        raise ValueError(f"unsupported method {method}")
    cfg = state.config
    s, d, w = endpoint_id(cfg, req.src), endpoint_id(cfg, req.dst), req.wavelength
    if not 0 <= w < state.wavelengths:
        raise ValueError(f"wavelength {w} outside 0..{state.wavelengths - 1}")
    if state.ingress_busy[s, w]:
        raise EndpointBusyError(f"{req.src} already sources a connection on wavelength {w}")
    if state.egress_busy[d, w]:
        raise EndpointBusyError(f"{req.dst} already terminates a connection on wavelength {w}")
    cs, cd = s // cfg.N, d // cfg.N
    if cs == cd:
        middle = None
        state.local += 1
    else:
        cap = state.capacity
        for m in range(cfg.M):
            if state.up[cs, m, w] < cap[cs, m] and state.down[cd, m, w] < cap[cd, m]:
                break
        else:
            return BLOCKED
        middle = m
        state.up[cs, m, w] += 1
        state.down[cd, m, w] += 1
        state.routed += 1
    state.ingress_busy[s, w] = True
    state.egress_busy[d, w] = True
    return RouteOutcome(True, middle)


def route_maps(topology: ClusterTopology, maps: Sequence[ConnectivityMap], W: int) -> list[np.ndarray]:
    """Route several maps at once; returns a blocked flag per request per map.

    All wavelength planes of all maps advance together, one request per
    plane per step. Planes share nothing, so this matches routing each map's
    requests one by one with :func:`route_request`.
    """
    N = topology.config.N
    cap = topology.capacity_matrix()
    C, M = cap.shape
    P = len(maps) * W
    plane = np.concatenate([mp.wavelength + i * W for i, mp in enumerate(maps)])
    cs = np.concatenate([mp.src for mp in maps]) // N
    cd = np.concatenate([mp.dst for mp in maps]) // N
    counts = np.bincount(plane, minlength=P)
    K = int(counts.max()) if len(plane) else 0
    by_plane = np.argsort(plane, kind="stable")
    rank = np.empty(len(plane), dtype=np.int64)
    rank[by_plane] = np.arange(len(plane)) - np.repeat(np.cumsum(counts) - counts, counts)

    grid_s = np.full((P, K), -1, dtype=np.int64)
    grid_d = np.full((P, K), -1, dtype=np.int64)
    grid_s[plane, rank] = cs
    grid_d[plane, rank] = cd
    blocked_grid = np.zeros((P, K), dtype=bool)
    up = np.zeros((P, C, M), dtype=np.int32)
    down = np.zeros((P, C, M), dtype=np.int32)
    for k in range(K):
        s, d = grid_s[:, k], grid_d[:, k]
        rows = np.flatnonzero((s >= 0) & (s != d))
        s, d = s[rows], d[rows]
        free = (up[rows, s] < cap[s]) & (down[rows, d] < cap[d])
        ok = free.any(axis=1)
        m = free.argmax(axis=1)
        r, s, d, m = rows[ok], s[ok], d[ok], m[ok]
        up[r, s, m] += 1
        down[r, d, m] += 1
        blocked_grid[rows[~ok], k] = True
    flags = blocked_grid[plane, rank]
    out, start = [], 0
    for mp in maps:
        out.append(flags[start : start + len(mp)])
        start += len(mp)
    return out


@dataclass(frozen=True)
class SimResult:
    offered: int
    blocked: int
    per_degree_offered: tuple[int, ...] = field(repr=False)
    per_degree_blocked: tuple[int, ...] = field(repr=False)
    ci_low: float = 0.0
    ci_high: float = 0.0

    @property
    def blocking_rate(self) -> float:
        return self.blocked / self.offered if self.offered else 0.0

    @property
    def accepted(self) -> int:
        return self.offered - self.blocked

    @property
    def confidence(self) -> float:
        """Half-width of the 95% Wilson-score interval."""
        return (self.ci_high - self.ci_low) / 2


def wilson_interval(blocked: int, offered: int) -> tuple[float, float]:
    if offered == 0:
        return 0.0, 1.0
    ci = binomtest(blocked, offered).proportion_ci(confidence_level=0.95, method="wilson")
    return float(ci.low), float(ci.high)


def _run_batch(args: tuple[ClusterConfig, SimConfig, list[int]]) -> tuple[np.ndarray, np.ndarray]:
    config, sim, indices = args
    topo = build_cluster(config, sim.pattern)
    maps = [generate_connectivity_map(config, sim, i) for i in indices]
    flags = route_maps(topo, maps, sim.wavelengths)
    EN = config.E * config.N
    offered = np.zeros(EN, dtype=np.int64)
    blocked = np.zeros(EN, dtype=np.int64)
    for mp, fl in zip(maps, flags):
        offered += np.bincount(mp.src, minlength=EN)
        blocked += np.bincount(mp.src[fl], minlength=EN)
    return offered, blocked


def run_full_load(config: ClusterConfig, sim: SimConfig, workers: int = 1) -> SimResult:
    """Route ``sim.maps`` independent maps on fresh fabrics and pool the counts."""
    batches = [
        (config, sim, list(range(i, min(i + _BATCH_MAPS, sim.maps))))
        for i in range(0, sim.maps, _BATCH_MAPS)
    ]
    if workers > 1 and len(batches) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_batch, batches))
    else:
        parts = [_run_batch(b) for b in batches]
    offered = sum(p[0] for p in parts)
    blocked = sum(p[1] for p in parts)
    n, b = int(offered.sum()), int(blocked.sum())
    low, high = wilson_interval(b, n)
    return SimResult(n, b, tuple(int(x) for x in offered), tuple(int(x) for x in blocked), low, high)


@dataclass(frozen=True)
class Scenario:
    name: str
    config: ClusterConfig
    sim: SimConfig


def default_cases(
    maps: int = 1,
    seed: int = 1,
    load: float = REFERENCE_LINE_LOAD,
    wavelengths: int = DEFAULT_WAVELENGTHS,
    pattern: InterconnectPattern | None = None,
) -> list[Scenario]:
    """The five reference cluster sizings at a common line load."""
    pattern = pattern or InterconnectPattern()
    out = []
    for i, (E, F) in enumerate(REFERENCE_CASES, start=1):
        cfg = ClusterConfig(N=REFERENCE_N, M=REFERENCE_M, E=E, F=F)
        sim = SimConfig.at_load(cfg, load, wavelengths=wavelengths, maps=maps, seed=seed, pattern=pattern)
        out.append(Scenario(str(i), cfg, sim))
    return out


def maps_for_volume(sim: SimConfig, volume: int) -> int:
    """Number of maps needed to offer at least ``volume`` requests."""
    return max(1, math.ceil(volume / sim.connections_per_map))


@dataclass(frozen=True)
class ScenarioRow:
    case: str
    E: int
    F: int
    degrees: int
    add_drop_rate: float
    offered: int = 0
    blocked: int = 0
    blocking_rate: float = float("nan")
    ci95: float = float("nan")
    ci_high: float = float("nan")
    error: str | None = None


def run_scenarios(cases: Sequence[Scenario], workers: int = 1) -> list[ScenarioRow]:
    if not cases:
        raise ValueError("no scenarios given")
    rows = []
    for sc in cases:
        cfg = sc.config
        head = dict(case=sc.name, E=cfg.E, F=cfg.F, degrees=total_degrees(cfg), add_drop_rate=add_drop_rate(cfg))
        try:
            res = run_full_load(cfg, sc.sim, workers=workers)
        except Exception as exc:  # recorded per case, remaining cases still run
            rows.append(ScenarioRow(**head, error=f"{type(exc).__name__}: {exc}"))
            continue
        rows.append(
            ScenarioRow(
                **head,
                offered=res.offered,
                blocked=res.blocked,
                blocking_rate=res.blocking_rate,
                ci95=res.confidence,
                ci_high=res.ci_high,
            )
        )
    return rows


def rearrangement_oracle(requests: Sequence[ConnectionRequest], config: ClusterConfig) -> int:
    """Fewest requests that must be blocked over every middle-stage assignment.

    Exhaustive branch-and-bound on one wavelength plane with single-fiber
    wiring; unused middles are interchangeable, so only the lowest one is
    tried. Same-chassis requests never need a middle.
    """
    if len(requests) > 12 and config.chassis_count > 4:
        raise InstanceTooLarge(
            f"{len(requests)} requests on {config.chassis_count} chassis is beyond exact search"
        )
    if len({r.wavelength for r in requests}) > 1:
        raise ValueError("oracle works on a single wavelength plane")
    N, M = config.N, config.M
    pairs = []
    for r in requests:
        cs, cd = endpoint_id(config, r.src) // N, endpoint_id(config, r.dst) // N
        if cs != cd:
            pairs.append((cs, cd))
    n = len(pairs)
    up_deg = np.bincount([p[0] for p in pairs], minlength=config.chassis_count)
    dn_deg = np.bincount([p[1] for p in pairs], minlength=config.chassis_count)
    floor = max(int(np.maximum(up_deg - M, 0).sum()), int(np.maximum(dn_deg - M, 0).sum()))
    up = [set() for _ in range(config.chassis_count)]
    down = [set() for _ in range(config.chassis_count)]
    best = n

    def search(i: int, blocked: int, used: int) -> bool:
        nonlocal best
        if blocked >= best:
            return False
        if i == n:
            best = blocked
            return best == floor
        cs, cd = pairs[i]
        for m in range(min(used + 1, M)):
            if m in up[cs] or m in down[cd]:
                continue
            up[cs].add(m)
            down[cd].add(m)
            done = search(i + 1, blocked, max(used, m + 1))
            up[cs].discard(m)
            down[cd].discard(m)
            if done:
                return True
        return search(i + 1, blocked + 1, used)

    search(0, 0, 0)
    return best


def first_fit_blocked(requests: Sequence[ConnectionRequest], topology: ClusterTopology, W: int = 1) -> int:
    state = FabricState(topology, W)
    return sum(not route_request(state, r).accepted for r in requests)


def canonical_pair_sequences(chassis: int, max_len: int, per_chassis: int) -> Iterator[tuple[tuple[int, int], ...]]:
    """Chassis-level request sequences up to relabelling of chassis.

    Each chassis sources and terminates at most ``per_chassis`` requests.
    Labels are introduced in order of first appearance, which visits one
    representative of every class of sequences equivalent under chassis
    permutation.
    """

    def grow(seq, nlab, up, dn):
        yield seq
        if len(seq) == max_len:
            return
        limit = min(nlab + 2, chassis)
        for s, d in itertools.product(range(limit), repeat=2):
            if s == d or up[s] >= per_chassis or dn[d] >= per_chassis:
                continue
            fresh = (s >= nlab) + (d >= nlab)
            if fresh == 1 and max(s, d) != nlab:
                continue
            if fresh == 2 and (s, d) != (nlab, nlab + 1):
                continue
            up[s] += 1
            dn[d] += 1
            yield from grow(seq + ((s, d),), max(nlab, s + 1, d + 1), up, dn)
            up[s] -= 1
            dn[d] -= 1

    yield from grow((), 0, [0] * chassis, [0] * chassis)
