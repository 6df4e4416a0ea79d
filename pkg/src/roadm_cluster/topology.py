"""Cluster-node topology: line, interconnect and add/drop chassis wired as a
three-stage Clos fabric.

Chassis are indexed in one flat "edge" numbering used throughout the
package: line chassis occupy ``0..E-1`` and add/drop chassis ``E..E+F-1``.
Interconnect chassis (the middle stage) are indexed ``0..M-1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np


class SizingError(ValueError):
    """Raised for a cluster configuration that violates a sizing invariant."""

    def __init__(self, field_name: str, message: str) -> None:
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


class NonblockingClass(str, Enum):
    BLOCKING = "blocking"
    REARRANGEABLE = "rearrangeably-nonblocking"
    STRICT_SENSE = "strict-sense-nonblocking"

    @property
    def rank(self) -> int:
        return _CLASS_RANK[self]


_CLASS_RANK = {
    NonblockingClass.BLOCKING: 0,
    NonblockingClass.REARRANGEABLE: 1,
    NonblockingClass.STRICT_SENSE: 2,
}


class PatternKind(str, Enum):
    PROPOSED = "proposed"
    RANDOM = "random"


@dataclass(frozen=True)
class InterconnectPattern:
    """How add/drop chassis are wired to the interconnect stage.

    ``PROPOSED`` gives every chassis exactly one fiber to every interconnect
    chassis. ``RANDOM`` keeps that for line chassis but lands each of an
    add/drop chassis' M interconnect cards on a uniformly drawn interconnect
    chassis, so some middles get two fibers and others none.
    """

    kind: PatternKind = PatternKind.PROPOSED
    seed: int = 0

    @classmethod
    def parse(cls, text: str, seed: int = 0) -> InterconnectPattern:
        return cls(PatternKind(text.lower()), seed)


@dataclass(frozen=True)
class ClusterConfig:
    """Sizing tuple of one ROADM cluster node.

    Attributes:
        N: line cards per line chassis (degrees per chassis).
        M: connection cards per line chassis, equal to the number of
            interconnect chassis.
        E: number of line chassis.
        F: number of add/drop chassis.
    """

    N: int
    M: int
    E: int
    F: int = 0

    def __post_init__(self) -> None:
        for name, low in (("N", 1), ("M", 1), ("E", 1), ("F", 0)):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise SizingError(name, f"must be an integer, got {value!r}")
            if value < low:
                raise SizingError(name, f"must be >= {low}, got {value}")

    @property
    def S(self) -> int:
        """Interconnect cards per interconnect chassis."""
        return self.E + self.F

    @property
    def chassis_count(self) -> int:
        return self.E + self.F

    @property
    def degrees(self) -> int:
        return total_degrees(self)

    def to_dict(self) -> dict[str, int]:
        return {"N": self.N, "M": self.M, "E": self.E, "F": self.F}


@dataclass(frozen=True)
class ClusterTopology:
    config: ClusterConfig
    pattern: InterconnectPattern
    # fibers[c][m] = number of fibers between edge chassis c and interconnect m
    fibers: tuple[tuple[int, ...], ...] = field(repr=False)

    @property
    def degree(self) -> int:
        return total_degrees(self.config)

    @property
    def fiber_count(self) -> int:
        return sum(map(sum, self.fibers))

    def capacity_matrix(self) -> np.ndarray:
        return np.array(self.fibers, dtype=np.int64)

    def chassis_name(self, c: int) -> str:
        E = self.config.E
        return f"L{c}" if c < E else f"A{c - E}"

    def to_json(self) -> dict[str, Any]:
        cfg = self.config
        cap = self.capacity_matrix()
        return {
            "config": {**cfg.to_dict(), "S": cfg.S},
            "degree": self.degree,
            "pattern": {"kind": self.pattern.kind.value, "seed": self.pattern.seed},
            "chassis": {
                "line": [
                    {"id": f"L{e}", "line_cards": cfg.N, "connection_cards": cfg.M}
                    for e in range(cfg.E)
                ],
                "add_drop": [
                    {"id": f"A{f}", "add_drop_ports": cfg.N, "interconnect_cards": cfg.M}
                    for f in range(cfg.F)
                ],
                "interconnect": [
                    {"id": f"I{m}", "cards": int(cap[:, m].sum())} for m in range(cfg.M)
                ],
            },
            "fibers": [
                {"chassis": self.chassis_name(c), "interconnect": f"I{m}", "count": int(cap[c, m])}
                for c in range(cfg.chassis_count)
                for m in range(cfg.M)
                if cap[c, m]
            ],
        }


def build_cluster(
    config: ClusterConfig, pattern: InterconnectPattern | None = None
) -> ClusterTopology:
    pattern = pattern or InterconnectPattern()
    C, M = config.chassis_count, config.M
    cap = np.ones((C, M), dtype=np.int64)
    if pattern.kind is PatternKind.RANDOM and config.F:
        rng = np.random.default_rng(pattern.seed)
        for c in range(config.E, C):
            cap[c] = np.bincount(rng.integers(0, M, size=M), minlength=M)
    return ClusterTopology(config, pattern, tuple(tuple(int(x) for x in row) for row in cap))


def classify_nonblocking(n: int, k: int) -> NonblockingClass:
    """Clos taxonomy for ``n`` inlets per first-stage switch and ``k`` middles."""
    if n < 1 or k < 1:
        raise ValueError(f"n and k must be >= 1, got n={n}, k={k}")
    if k >= 2 * n - 1:
        return NonblockingClass.STRICT_SENSE
    if k >= n:
        return NonblockingClass.REARRANGEABLE
    return NonblockingClass.BLOCKING


def total_degrees(config: ClusterConfig) -> int:
    return config.E * config.N


def add_drop_rate(config: ClusterConfig) -> float:
    return config.F / config.E


def validate_sizing(config: ClusterConfig) -> list[str]:
    """Advisory checks against the recommended ``N < M < 1.2 N`` window.

    Never raises; callers decide whether to escalate.
    """
    out = []
    N, M = config.N, config.M
    if M <= N:
        out.append(f"M={M} is not strictly greater than N={N}")
    if 5 * M >= 6 * N:
        out.append(f"M={M} >= 1.2*N={1.2 * N:g}: more common equipment for the same degree")
    if classify_nonblocking(N, M) is NonblockingClass.BLOCKING:
        out.append(f"M={M} < N={N}: fabric is blocking even with rearrangement")
    return out

