"""Flex-grid spectrum model for the elastic network layer.

Widths are kept as exact fractions of GHz and rounded up to whole 12.5 GHz
slots only when spectrum is allocated.
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

import numpy as np

SLOT_GHZ = Fraction(25, 2)
DEFAULT_SLOTS = 320
MIN_RATE, MAX_RATE, RATE_STEP = 40, 1000, 20
SUBCHANNELS = 10
# FixedWDM: one 100 Gb/s wavelength per 50 GHz channel
WDM_RATE, WDM_WIDTH = 100, 50


class WidthMode(str, Enum):
    ORIGINAL_EON = "original-eon"
    NEW_DESIGN = "new-design"
    FIXED_WDM = "fixed-wdm"


# (bit rate Gb/s, width GHz) anchors per elastic mode
WIDTH_TABLE: dict[WidthMode, tuple[tuple[int, int], ...]] = {
    WidthMode.ORIGINAL_EON: ((40, 25), (100, 50), (400, 100), (1000, 150)),
    WidthMode.NEW_DESIGN: ((40, 25), (100, 45), (400, 90), (1000, 130)),
}
TABLE2_RATES = (40, 100, 400, 1000)


class CapacityError(ValueError):
    pass


def _width(bitrate: float, mode: WidthMode) -> Fraction:
    if not 0 < bitrate <= MAX_RATE:
        raise ValueError(f"bit rate {bitrate} Gb/s outside (0, {MAX_RATE}]")
    rate = Fraction(bitrate)
    if mode is WidthMode.FIXED_WDM:
        return Fraction(math.ceil(rate / WDM_RATE) * WDM_WIDTH)
    anchors = WIDTH_TABLE[mode]
    if rate <= anchors[0][0]:
        return Fraction(anchors[0][1])
    for (r0, w0), (r1, w1) in itertools.pairwise(anchors):
        if rate <= r1:
            return w0 + (rate - r0) * Fraction(w1 - w0, r1 - r0)
    raise AssertionError("unreachable")


def spectral_width(bitrate: float, mode: WidthMode) -> float:
    """Occupied spectrum in GHz for one optical flow.

    Elastic modes interpolate linearly between the anchor widths and
    stay flat below 40 Gb/s.
    """
    return float(_width(bitrate, mode))


def slot_span(width_ghz: float | Fraction) -> int:
    return math.ceil(Fraction(width_ghz) / SLOT_GHZ)


@dataclass(frozen=True)
class Flow:
    bitrate: int
    width: float
    slots: int

    def __post_init__(self) -> None:
        if self.width <= 0:
            raise ValueError("flow width must be positive")


def split_flows(bitrate: int, subchannel_rate: int = 100, max_flow: int = 400) -> list[int]:
    """Greedy multi-flow split, largest flows first."""
    if bitrate <= 0 or bitrate % RATE_STEP:
        raise ValueError(f"bit rate {bitrate} must be a positive multiple of {RATE_STEP}")
    if bitrate > SUBCHANNELS * subchannel_rate:
        raise CapacityError(
            f"{bitrate} Gb/s exceeds the transponder's {SUBCHANNELS} x {subchannel_rate} Gb/s"
        )
    full, rest = divmod(bitrate, max_flow)
    return [max_flow] * full + ([rest] if rest else [])


def flows_for(bitrate: int, mode: WidthMode) -> list[Flow]:
    """Optical flows carrying one demand under ``mode``."""
    if mode is WidthMode.FIXED_WDM:
        n = math.ceil(bitrate / WDM_RATE)
        return [Flow(WDM_RATE, WDM_WIDTH, slot_span(WDM_WIDTH))] * n
    out = []
    for rate in split_flows(bitrate):
        w = _width(rate, mode)
        out.append(Flow(rate, float(w), slot_span(w)))
    return out


class SpectrumGrid:
    """Occupancy bitmap of one link, one byte per 12.5 GHz slot."""

    def __init__(self, slots: int = DEFAULT_SLOTS):
        if slots < 1:
            raise ValueError("a grid needs at least one slot")
        self.bits = bytearray(slots)

    def __len__(self) -> int:
        return len(self.bits)

    @property
    def occupied(self) -> int:
        return self.bits.count(1)

    def release(self, start: int, span: int) -> None:
        if self.bits[start : start + span] != b"\x01" * span:
            raise ValueError(f"slots {start}..{start + span - 1} are not fully allocated")
        self.bits[start : start + span] = bytes(span)

    def to_array(self) -> np.ndarray:
        return np.frombuffer(bytes(self.bits), dtype=np.uint8).astype(bool)


def allocate_first_fit(grid: SpectrumGrid, span: int) -> int | None:
    """Occupy the lowest contiguous free run of ``span`` slots.

    Returns the start slot, or ``None`` (grid untouched) when no run fits.
    """
    if span < 1:
        raise ValueError(f"span must be >= 1, got {span}")
    start = grid.bits.find(bytes(span))
    if start < 0:
        return None
    grid.bits[start : start + span] = b"\x01" * span
    return start


@dataclass(frozen=True)
class Demand:
    src: int
    dst: int
    bitrate: int

    def __post_init__(self) -> None:
        if self.src == self.dst:
            raise ValueError("demand endpoints must differ")
        if not MIN_RATE <= self.bitrate <= MAX_RATE or self.bitrate % RATE_STEP:
            raise ValueError(f"bit rate {self.bitrate} not in {MIN_RATE}..{MAX_RATE} step {RATE_STEP}")

    @property
    def link(self) -> tuple[int, int]:
        return (min(self.src, self.dst), max(self.src, self.dst))


def generate_demands(router_count: int, demand_count: int, seed: int) -> list[Demand]:
    if router_count < 2:
        raise ValueError(f"need at least 2 routers, got {router_count}")
    if demand_count < 1:
        raise ValueError(f"demand_count must be >= 1, got {demand_count}")
    rng = np.random.default_rng(seed)
    src = rng.integers(0, router_count, size=demand_count)
    # offset in 1..R-1 keeps dst uniform over the other routers
    dst = (src + rng.integers(1, router_count, size=demand_count)) % router_count
    rates = MIN_RATE + RATE_STEP * rng.integers(0, (MAX_RATE - MIN_RATE) // RATE_STEP + 1, size=demand_count)
    return [Demand(int(s), int(d), int(r)) for s, d, r in zip(src, dst, rates)]


def reference_network(router_count: int = 6, slots: int = DEFAULT_SLOTS) -> dict[tuple[int, int], SpectrumGrid]:
    """Complete graph: one link per router pair."""
    return {pair: SpectrumGrid(slots) for pair in itertools.combinations(range(router_count), 2)}


class MissingLinkError(KeyError):
    pass


@dataclass(frozen=True)
class Placement:
    demand: Demand
    carried: bool
    # (start, span) of every allocated flow on the demand's link
    slots: tuple[tuple[int, int], ...] = ()


@dataclass(frozen=True)
class Accommodation:
    carried_gbps: int
    offered_gbps: int
    placements: tuple[Placement, ...]


def accommodate(
    demands: Sequence[Demand], links: Mapping[tuple[int, int], SpectrumGrid], mode: WidthMode
) -> Accommodation:
    """Admit demands first-come; a demand is carried only if all its flows fit."""
    placements = []
    carried = 0
    for dem in demands:
        grid = links.get(dem.link)
        if grid is None:
            raise MissingLinkError(f"no link between routers {dem.link}")
        got = []
        for flow in flows_for(dem.bitrate, mode):
            start = allocate_first_fit(grid, flow.slots)
            if start is None:
                for s, n in got:
                    grid.release(s, n)
                got = None
                break
            got.append((start, flow.slots))
        if got is None:
            placements.append(Placement(dem, False))
        else:
            carried += dem.bitrate
            placements.append(Placement(dem, True, tuple(got)))
    offered = sum(d.bitrate for d in demands)
    return Accommodation(carried, offered, tuple(placements))


@dataclass(frozen=True)
class SeedComparison:
    seed: int
    carried_elastic_gbps: int
    carried_fixed_gbps: int

    @property
    def ratio(self) -> float:
        if self.carried_fixed_gbps == 0:
            return math.inf if self.carried_elastic_gbps else 1.0
        return self.carried_elastic_gbps / self.carried_fixed_gbps


@dataclass(frozen=True)
class Comparison:
    runs: tuple[SeedComparison, ...]

    @property
    def ratios(self) -> list[float]:
        return [r.ratio for r in self.runs]

    @property
    def mean(self) -> float:
        return math.fsum(self.ratios) / len(self.runs)

    @property
    def min(self) -> float:
        return min(self.ratios)

    @property
    def max(self) -> float:
        return max(self.ratios)


def compare_approaches(
    router_count: int,
    demand_count: int,
    seeds: Sequence[int],
    slots: int = DEFAULT_SLOTS,
    elastic: WidthMode = WidthMode.NEW_DESIGN,
) -> Comparison:
    """Carried traffic of an elastic mode against fixed 100G/50GHz WDM, per seed."""
    if not seeds:
        raise ValueError("need at least one seed")
    runs = []
    for seed in seeds:
        demands = generate_demands(router_count, demand_count, seed)
        el = accommodate(demands, reference_network(router_count, slots), elastic)
        fx = accommodate(demands, reference_network(router_count, slots), WidthMode.FIXED_WDM)
        runs.append(SeedComparison(seed, el.carried_gbps, fx.carried_gbps))
    return Comparison(tuple(runs))


def table2_rows() -> list[tuple[str, list[int]]]:
    """Two-row width table at the anchor bit rates."""
    label = {WidthMode.ORIGINAL_EON: "EON Original", WidthMode.NEW_DESIGN: "New design EON"}
    return [(label[m], [int(_width(r, m)) for r in TABLE2_RATES]) for m in label]
