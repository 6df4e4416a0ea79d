"""Closed-form blocking model for the cluster fabric (Lee's approximation).

A request between two edge chassis finds a free path if at least one of the
``M - d`` unpacked middle links is free on both hops. With per-link
occupancy ``p = (N a - d) / (M - d)`` and independent links this gives::

    P_b = [1 - (1 - p)^2] ^ (M - d)
"""

from __future__ import annotations

import math
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .topology import ClusterConfig

DEFAULT_SAMPLE_COUNT = 48000
# below this occupancy the power is taken through exp/log
_SMALL_P = 1e-8
_SLACK = 1e-12


class DomainError(ValueError):
    """Inputs fall outside the regime the blocking formula covers."""

    def __init__(self, bound: str, message: str) -> None:
        super().__init__(message)
        self.bound = bound


@dataclass(frozen=True)
class TrafficProfile:
    """Analytic load parameters.

    Attributes:
        a: carried traffic per line card, in erlangs (0..1).
        d: packing degree.
        lambda_d: offered light-path load per degree, in erlangs.
    """

    a: float
    d: float = 0
    lambda_d: tuple[float, ...] = (1.0,)

    def __post_init__(self) -> None:
        if not 0.0 <= self.a <= 1.0:
            raise ValueError(f"a must lie in [0, 1], got {self.a}")
        if self.d < 0:
            raise ValueError(f"d must be >= 0, got {self.d}")
        if not self.lambda_d or any(x < 0 for x in self.lambda_d):
            raise ValueError("lambda_d must be non-empty and non-negative")
        if not any(x > 0 for x in self.lambda_d):
            raise ValueError("lambda_d needs at least one positive load")

    def check(self, N: int, M: int) -> None:
        if self.d > math.floor(N * self.a + _SLACK):
            raise ValueError(f"d={self.d} exceeds floor(N*a)={math.floor(N * self.a + _SLACK)}")
        if self.d >= M:
            raise ValueError(f"d={self.d} must be < M={M}")


def link_occupancy(N: int, M: int, a: float, d: float = 0) -> float:
    """Occupancy ``(N a - d) / (M - d)`` of one unpacked middle link."""
    if M <= d:
        raise DomainError("M>d", f"M={M} must exceed the packing degree d={d}")
    carried = N * a
    if carried > M * (1 + _SLACK):
        raise DomainError("Na<=M", f"N*a={carried:g} exceeds M={M}: occupancy above 1")
    # exact, so N a close to d does not cancel to a spurious zero
    num = float(Fraction(N) * Fraction(a) - Fraction(d))
    if num < 0:
        if num < -_SLACK * max(1.0, d):
            raise DomainError("Na>=d", f"N*a={carried:g} is below the packing degree d={d}")
        num = 0.0
    return min(num / (M - d), 1.0)


def lee_blocking(N: int, M: int, a: float, d: float = 0) -> float:
    p = link_occupancy(N, M, a, d)
    if p == 0.0:
        return 0.0
    # 1 - (1 - p)^2 without the cancellation
    base = p * (2.0 - p)
    if p < _SMALL_P:
        return math.exp((M - d) * math.log(base))
    return base ** (M - d)


def weighted_blocking(per_degree: Iterable[tuple[float, float]]) -> float:
    """Load-weighted mean of per-degree blocking, ``sum(P_b * lam) / sum(lam)``."""
    pairs = list(per_degree)
    if not pairs:
        raise ValueError("per_degree must not be empty")
    for pb, lam in pairs:
        if not 0.0 <= pb <= 1.0:
            raise ValueError(f"blocking probability {pb} outside [0, 1]")
        if lam < 0:
            raise ValueError(f"negative load {lam}")
    total = math.fsum(lam for _, lam in pairs)
    if total <= 0:
        raise ZeroDivisionError("total offered load is zero")
    return math.fsum(pb * lam for pb, lam in pairs) / total


def sample_loads(sample_count: int = DEFAULT_SAMPLE_COUNT) -> np.ndarray:
    """The ``sample_count + 1`` equally spaced loads ``i / sample_count``."""
    if sample_count < 1:
        raise ValueError(f"sample_count must be >= 1, got {sample_count}")
    return np.arange(sample_count + 1, dtype=np.float64) / sample_count


def average_over_loads(
    integrand: Callable[[np.ndarray], np.ndarray], sample_count: int = DEFAULT_SAMPLE_COUNT
) -> float:
    """Mean of ``integrand`` over the evaluated load points.

    Divides by the number of points evaluated, so a constant integrand is
    returned unchanged.
    """
    values = np.asarray(integrand(sample_loads(sample_count)), dtype=np.float64)
    return math.fsum(values) / values.size


def lee_blocking_array(N: int, M: int, a: np.ndarray, d: float = 0) -> np.ndarray:
    """Vectorised :func:`lee_blocking` over loads.

    Loads whose carried traffic ``N a`` falls short of ``d`` are fully packed
    and contribute zero blocking. Loads are clamped so ``N a <= M``.
    """
    if M <= d:
        raise DomainError("M>d", f"M={M} must exceed the packing degree d={d}")
    a = np.minimum(np.asarray(a, dtype=np.float64), M / N)
    p = np.clip((N * a - d) / (M - d), 0.0, 1.0)
    base = p * (2.0 - p)
    out = np.power(base, M - d)
    small = (p > 0) & (p < _SMALL_P)
    if small.any():
        out[small] = np.exp((M - d) * np.log(base[small]))
    return out


def load_averaged_blocking(
    N: int,
    M: int,
    d: float = 0,
    lambda_profile: Sequence[float] | None = None,
    sample_count: int = DEFAULT_SAMPLE_COUNT,
) -> float:
    """Blocking averaged over per-card loads ``a = i / sample_count``.

    At every sampled load the per-degree blocking is combined with the
    ``lambda_profile`` weights; the same load applies to every degree.
    """
    lam = np.asarray(lambda_profile if lambda_profile is not None else [1.0], dtype=np.float64)
    if lam.size == 0 or (lam < 0).any() or lam.sum() <= 0:
        raise ValueError("lambda_profile must be non-negative with a positive total")
    if M <= d:
        raise DomainError("M>d", f"at p_0=0: M={M} must exceed the packing degree d={d}")
    total = lam.sum()

    def integrand(loads: np.ndarray) -> np.ndarray:
        pb = lee_blocking_array(N, M, loads, d)
        return (pb[:, None] * lam[None, :]).sum(axis=1) / total

    return average_over_loads(integrand, sample_count)


@dataclass(frozen=True)
class SweepCell:
    a: float
    d: float
    P_b: float | None
    error: str | None = None


def analytic_sweep(
    config: ClusterConfig | tuple[int, int],
    loads: Sequence[float],
    d_values: Sequence[float],
    clamp: bool = False,
) -> list[SweepCell]:
    """Evaluate every ``(a, d)`` pair, loads-major, recording failures per cell.

    With ``clamp`` a cell whose occupancy would exceed one reports ``P_b = 1``
    instead of an error.
    """
    if isinstance(config, ClusterConfig):
        N, M = config.N, config.M
    else:
        N, M = config
    cells = []
    for a in loads:
        for d in d_values:
            try:
                cells.append(SweepCell(a, d, lee_blocking(N, M, a, d)))
            except DomainError as exc:
                if clamp and exc.bound == "Na<=M":
                    cells.append(SweepCell(a, d, 1.0))
                else:
                    cells.append(SweepCell(a, d, None, str(exc)))
    return cells
