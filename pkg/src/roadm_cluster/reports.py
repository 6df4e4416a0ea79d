"""CSV/JSON report emission with an embedded run manifest."""

from __future__ import annotations

import csv
import io
import json
import math
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Any

from . import __version__
from .analytics import SweepCell
from .fullload import RNG_NAME, ScenarioRow
from .spectrum import TABLE2_RATES, Comparison, table2_rows

SWEEP_HEADER = ("a", "d", "P_b")
SCENARIO_HEADER = (
    "case", "E", "F", "degrees", "add_drop_rate", "offered", "blocked", "blocking_rate", "ci95",
)
COMPARE_HEADER = ("seed", "carried_elastic_gbps", "carried_fixed_gbps", "ratio")
TABLE2_HEADER = ("design",) + tuple(str(r) for r in TABLE2_RATES)


def fmt(value: Any) -> str:
    # repr is locale independent and round-trips floats exactly
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isnan(value):
            return ""
        return repr(value)
    return str(value)


def render_csv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def manifest(command: str, config: dict[str, Any], seed: int | None, outputs: Sequence[str]) -> dict[str, Any]:
    return {
        "command": command,
        "config": config,
        "seed": seed,
        "rng": RNG_NAME,
        "version": __version__,
        "outputs": list(outputs),
    }


def render_json(man: dict[str, Any], body: dict[str, Any]) -> str:
    def clean(v):
        if isinstance(v, float) and not math.isfinite(v):
            return None
        if isinstance(v, dict):
            return {k: clean(x) for k, x in v.items()}
        if isinstance(v, (list, tuple)):
            return [clean(x) for x in v]
        return v

    return json.dumps({"manifest": man, **clean(body)}, indent=2, sort_keys=False) + "\n"


def sweep_rows(cells: Sequence[SweepCell]) -> list[tuple]:
    return [(c.a, c.d, c.P_b) for c in cells]


def scenario_rows(rows: Sequence[ScenarioRow]) -> list[tuple]:
    return [
        (r.case, r.E, r.F, r.degrees, r.add_drop_rate, r.offered, r.blocked, r.blocking_rate, r.ci95)
        for r in rows
    ]


def compare_rows(cmp: Comparison) -> list[tuple]:
    return [(r.seed, r.carried_elastic_gbps, r.carried_fixed_gbps, r.ratio) for r in cmp.runs]


def table2_csv() -> str:
    return render_csv(TABLE2_HEADER, [(name, *cells) for name, cells in table2_rows()])


def write_text(path: str | Path, text: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def sidecar(path: str | Path) -> Path:
    return Path(path).with_suffix(".json")
