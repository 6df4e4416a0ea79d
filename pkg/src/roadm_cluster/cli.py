"""Command-line front end.

Subcommands: ``analytic``, ``montecarlo``, ``eon table2``, ``eon compare``
and ``topology``. Every option may also come from a JSON file given with
``--config`` (either a plain mapping of option names or a report written by
an earlier run, whose manifest is reused); flags win over file values.

Exit codes: 0 success, 1 runtime/domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from decimal import Decimal, InvalidOperation
from typing import Any

from . import reports
from .analytics import DomainError, analytic_sweep, load_averaged_blocking
from .fullload import (
    DEFAULT_WAVELENGTHS,
    REFERENCE_LINE_LOAD,
    REFERENCE_CASES,
    Scenario,
    SimConfig,
    default_cases,
    maps_for_volume,
    run_scenarios,
)
from .spectrum import WidthMode, compare_approaches, table2_rows
from .topology import (
    ClusterConfig,
    InterconnectPattern,
    NonblockingClass,
    SizingError,
    build_cluster,
    classify_nonblocking,
    validate_sizing,
)

REFERENCE_IMPROVEMENT = 0.20


class UsageError(Exception):
    pass


def _paint(text: str, code: str) -> str:
    if os.environ.get("NO_COLOR") or not sys.stderr.isatty():
        return text
    return f"\033[{code}m{text}\033[0m"


def _err(msg: str) -> None:
    print(f"{_paint('error:', '31')} {msg}", file=sys.stderr)


def _number(text: str) -> Decimal:
    try:
        return Decimal(text)
    except InvalidOperation:
        raise UsageError(f"not a number: {text!r}") from None


def _as_float_or_int(x: Decimal) -> float | int:
    return int(x) if x == x.to_integral_value() else float(x)


def parse_values(text: str | list | float | int) -> list[float | int]:
    """``start:stop:step``, a comma list, or a single number."""
    if isinstance(text, (list, tuple)):
        return list(text)
    if isinstance(text, (int, float)):
        return [text]
    text = str(text)
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError(f"range must be start:stop:step, got {text!r}")
        start, stop, step = map(_number, parts)
        if step <= 0 or stop < start:
            raise UsageError(f"empty or invalid range {text!r}")
        count = int((stop - start) / step) + 1
        return [float(start + i * step) for i in range(count)]
    return [_as_float_or_int(_number(t)) for t in text.split(",") if t.strip()]


def parse_seeds(text: str | list | int) -> list[int]:
    """``lo..hi`` inclusive, a comma list, or a single seed."""
    if isinstance(text, (list, tuple)):
        return [int(s) for s in text]
    if isinstance(text, int):
        return [text]
    text = str(text)
    try:
        if ".." in text:
            lo, hi = text.split("..")
            return list(range(int(lo), int(hi) + 1))
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"bad seed list {text!r}") from None


def _load_config(path: str | None) -> dict[str, Any]:
    if not path:
        return {}
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if "manifest" in data:
        data = data["manifest"]
    if "config" in data and isinstance(data["config"], dict):
        data = data["config"]
    return data


class Options:
    """Flag values layered over a config file and built-in defaults."""

    def __init__(self, args: argparse.Namespace, defaults: dict[str, Any]):
        self._args = args
        self._file = _load_config(getattr(args, "config", None))
        self._defaults = defaults
        self.used: dict[str, Any] = {}

    def get(self, name: str, default: Any = None) -> Any:
        value = getattr(self._args, name, None)
        if value is None:
            value = self._file.get(name, self._defaults.get(name, default))
        self.used[name] = value
        return value

    def require(self, name: str) -> Any:
        value = self.get(name)
        if value is None:
            raise UsageError(f"--{name.replace('_', '-')} is required")
        return value


def _emit(opts: Options, command: str, seed: int | None, csv_text: str, body: dict, out: str | None) -> None:
    outputs = [out, str(reports.sidecar(out))] if out else []
    config = {k: v for k, v in opts.used.items() if k not in ("out", "workers")}
    man = reports.manifest(command, config, seed, outputs)
    if out:
        reports.write_text(out, csv_text)
        reports.write_text(reports.sidecar(out), reports.render_json(man, body))
    else:
        sys.stdout.write(csv_text)


def cmd_analytic(args: argparse.Namespace) -> int:
    opts = Options(args, {"d": "0", "samples": 48000, "clamp": False})
    N, M = int(opts.require("n")), int(opts.require("m"))
    loads = parse_values(opts.require("a"))
    d_values = parse_values(opts.get("d"))
    samples = int(opts.get("samples"))
    clamp = bool(opts.get("clamp"))
    out = opts.get("out")
    if N < 1 or M < 1 or samples < 1:
        raise UsageError("--n, --m and --samples must be >= 1")
    cells = analytic_sweep((N, M), loads, d_values, clamp=clamp)
    summary = []
    for d in d_values:
        try:
            summary.append({"d": d, "load_averaged_P_b": load_averaged_blocking(N, M, d, sample_count=samples)})
        except DomainError as exc:
            summary.append({"d": d, "load_averaged_P_b": None, "error": str(exc)})
    body = {
        "rows": [{"a": c.a, "d": c.d, "P_b": c.P_b, "error": c.error} for c in cells],
        "load_averaged": summary,
    }
    _emit(opts, "analytic", None, reports.render_csv(reports.SWEEP_HEADER, reports.sweep_rows(cells)), body, out)
    for s in summary:
        if s["load_averaged_P_b"] is not None:
            print(f"d={s['d']}: load-averaged P_b = {s['load_averaged_P_b']:.6e} over {samples + 1} loads",
                  file=sys.stdout if out else sys.stderr)
    bad = [c for c in cells if c.error] + [s for s in summary if s.get("error")]
    for c in bad:
        if isinstance(c, dict):
            _err(f"d={c['d']}: {c['error']}")
        else:
            _err(f"cell a={c.a}, d={c.d}: {c.error}")
    return 1 if bad else 0


def _montecarlo_cases(opts: Options) -> tuple[list[Scenario], int]:
    case = opts.get("case")
    seed = int(opts.get("seed"))
    W = int(opts.get("wavelengths"))
    load = float(opts.get("load"))
    maps = opts.get("maps")
    volume = opts.get("volume")
    connections = opts.get("connections")
    pattern = InterconnectPattern.parse(str(opts.get("pattern")), int(opts.get("pattern_seed")))
    if maps is not None and int(maps) < 1:
        raise UsageError("--maps must be >= 1")
    if volume is not None and int(volume) < 1:
        raise UsageError("--volume must be >= 1")
    if connections is not None and int(connections) < 1:
        raise UsageError("--connections must be >= 1")
    if not 0 < load <= 1:
        raise UsageError("--load must lie in (0, 1]")

    if case is not None:
        allc = default_cases(seed=seed, load=load, wavelengths=W, pattern=pattern)
        if str(case) == "all":
            chosen = allc
        elif str(case) in {sc.name for sc in allc}:
            chosen = [sc for sc in allc if sc.name == str(case)]
        else:
            raise UsageError(f"unknown case {case!r}; use 1..{len(REFERENCE_CASES)} or 'all'")
        configs = [(sc.name, sc.config, sc.sim.connections_per_map) for sc in chosen]
    else:
        cfg = ClusterConfig(
            N=int(opts.require("n")), M=int(opts.require("m")),
            E=int(opts.require("e")), F=int(opts.get("f", 0)),
        )
        for msg in validate_sizing(cfg):
            print(f"warning: {msg}", file=sys.stderr)
        if classify_nonblocking(cfg.N, cfg.M) is NonblockingClass.BLOCKING:
            raise SizingError("M", f"M={cfg.M} < N={cfg.N} gives a blocking fabric")
        n = SimConfig.at_load(cfg, load, wavelengths=W).connections_per_map
        configs = [("custom", cfg, n)]

    out = []
    for name, cfg, n in configs:
        n = int(connections) if connections is not None else n
        base = SimConfig(connections_per_map=n, wavelengths=W, seed=seed, pattern=pattern)
        m = int(maps) if maps is not None else (maps_for_volume(base, int(volume)) if volume is not None else 1)
        out.append(Scenario(name, cfg, SimConfig(n, W, m, seed, pattern=pattern)))
    return out, seed


def cmd_montecarlo(args: argparse.Namespace) -> int:
    opts = Options(
        args,
        {"seed": 1, "wavelengths": DEFAULT_WAVELENGTHS, "load": REFERENCE_LINE_LOAD,
         "pattern": "proposed", "pattern_seed": 0, "workers": 1},
    )
    cases, seed = _montecarlo_cases(opts)
    workers = int(opts.get("workers"))
    out = opts.get("out")
    rows = run_scenarios(cases, workers=workers)
    body = {
        "rows": [
            {**dict(zip(reports.SCENARIO_HEADER, r)), "ci_high": row.ci_high,
             "connections_per_map": sc.sim.connections_per_map, "maps": sc.sim.maps, "error": row.error}
            for r, row, sc in zip(reports.scenario_rows(rows), rows, cases)
        ]
    }
    _emit(opts, "montecarlo", seed, reports.render_csv(reports.SCENARIO_HEADER, reports.scenario_rows(rows)), body, out)
    stream = sys.stdout if out else sys.stderr
    for row in rows:
        if row.error:
            _err(f"case {row.case}: {row.error}")
            continue
        print(
            f"case {row.case}: degrees={row.degrees} add/drop={row.add_drop_rate:.0%} "
            f"blocked {row.blocked}/{row.offered} = {row.blocking_rate:.3e} +/- {row.ci95:.2e}",
            file=stream,
        )
    return 1 if any(r.error for r in rows) else 0


def cmd_table2(args: argparse.Namespace) -> int:
    opts = Options(args, {})
    out = opts.get("out")
    body = {"rows": [{"design": name, "widths_ghz": cells} for name, cells in table2_rows()]}
    _emit(opts, "eon table2", None, reports.table2_csv(), body, out)
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    opts = Options(args, {"routers": 6, "demands": 1500, "seeds": "1..20", "slots": 320, "mode": "new-design"})
    routers, demands = int(opts.get("routers")), int(opts.get("demands"))
    seeds = parse_seeds(opts.get("seeds"))
    slots = int(opts.get("slots"))
    mode = WidthMode(opts.get("mode"))
    out = opts.get("out")
    if routers < 2:
        raise UsageError(f"--routers must be >= 2, got {routers}")
    if demands < 1 or not seeds or slots < 1:
        raise UsageError("--demands, --slots and --seeds must be non-empty and positive")
    if mode is WidthMode.FIXED_WDM:
        raise UsageError("--mode must be an elastic mode")
    cmp = compare_approaches(routers, demands, seeds, slots=slots, elastic=mode)
    body = {
        "rows": [dict(zip(reports.COMPARE_HEADER, r)) for r in reports.compare_rows(cmp)],
        "mean_ratio": cmp.mean, "min_ratio": cmp.min, "max_ratio": cmp.max,
        "reference_improvement": REFERENCE_IMPROVEMENT,
    }
    _emit(opts, "eon compare", seeds[0], reports.render_csv(reports.COMPARE_HEADER, reports.compare_rows(cmp)), body, out)
    print(
        f"carried ratio {mode.value}/fixed-wdm over {len(seeds)} seeds: mean {cmp.mean:.4f} "
        f"(min {cmp.min:.4f}, max {cmp.max:.4f}); reference figure +{REFERENCE_IMPROVEMENT:.0%}",
        file=sys.stdout if out else sys.stderr,
    )
    return 0


def cmd_topology(args: argparse.Namespace) -> int:
    opts = Options(args, {"f": 0, "pattern": "proposed", "pattern_seed": 0})
    cfg = ClusterConfig(
        N=int(opts.require("n")), M=int(opts.require("m")), E=int(opts.require("e")), F=int(opts.get("f"))
    )
    topo = build_cluster(cfg, InterconnectPattern.parse(str(opts.get("pattern")), int(opts.get("pattern_seed"))))
    text = json.dumps(topo.to_json(), indent=2) + "\n"
    out = opts.get("out")
    if out:
        reports.write_text(out, text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="roadm-cluster", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON file of option values or a previous report")
        sp.add_argument("--out", help="CSV path; a .json report is written next to it")

    a = sub.add_parser("analytic", help="Lee blocking sweep over loads and packing degrees")
    a.add_argument("--n", type=int, help="line cards per line chassis")
    a.add_argument("--m", type=int, help="interconnect chassis")
    a.add_argument("--a", help="loads: start:stop:step, list, or value")
    a.add_argument("--d", help="packing degrees (comma list)")
    a.add_argument("--samples", type=int, help="load samples for the averaged blocking (default 48000)")
    a.add_argument("--clamp", action="store_true", default=None, help="report P_b=1 when N*a > M")
    common(a)
    a.set_defaults(func=cmd_analytic)

    mc = sub.add_parser("montecarlo", help="full-load cluster simulation")
    mc.add_argument("--case", help="reference case 1..5 or 'all'")
    for name, what in (("n", "line cards per chassis"), ("m", "interconnect chassis"),
                       ("e", "line chassis"), ("f", "add/drop chassis")):
        mc.add_argument(f"--{name}", type=int, help=f"{what} (custom sizing)")
    mc.add_argument("--maps", type=int, help="connectivity maps per case")
    mc.add_argument("--volume", type=int, help="offered requests per case; sets --maps")
    mc.add_argument("--connections", type=int, help="requests per map (default: from --load)")
    mc.add_argument("--load", type=float, help=f"lit fraction of line ingress channels (default {REFERENCE_LINE_LOAD})")
    mc.add_argument("--wavelengths", type=int, help=f"wavelength planes (default {DEFAULT_WAVELENGTHS})")
    mc.add_argument("--seed", type=int)
    mc.add_argument("--pattern", choices=["proposed", "random"])
    mc.add_argument("--pattern-seed", type=int, dest="pattern_seed")
    mc.add_argument("--workers", type=int, help="worker processes")
    common(mc)
    mc.set_defaults(func=cmd_montecarlo)

    eon = sub.add_parser("eon", help="elastic spectrum studies")
    esub = eon.add_subparsers(dest="eon_command", required=True)
    t2 = esub.add_parser("table2", help="spectral width per flow bit rate")
    common(t2)
    t2.set_defaults(func=cmd_table2)
    cp = esub.add_parser("compare", help="elastic vs fixed-grid carried traffic")
    cp.add_argument("--routers", type=int)
    cp.add_argument("--demands", type=int)
    cp.add_argument("--seeds", help="lo..hi, comma list, or single seed")
    cp.add_argument("--slots", type=int, help="12.5 GHz slots per link")
    cp.add_argument("--mode", choices=["new-design", "original-eon"])
    common(cp)
    cp.set_defaults(func=cmd_compare)

    tp = sub.add_parser("topology", help="dump a cluster topology as JSON")
    for name in ("n", "m", "e", "f"):
        tp.add_argument(f"--{name}", type=int)
    tp.add_argument("--pattern", choices=["proposed", "random"])
    tp.add_argument("--pattern-seed", type=int, dest="pattern_seed")
    common(tp)
    tp.set_defaults(func=cmd_topology)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        _err(str(exc))
        return 2
    except (ValueError, RuntimeError, OSError) as exc:
        _err(str(exc))
        return 1
