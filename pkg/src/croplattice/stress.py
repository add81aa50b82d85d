"""Multivariate stress metric and its decomposition.

Per-cell stress is the Euclidean distance in (N, P, K) space between the
current and initial states, so simultaneous depletion of several nutrients
compounds quadratically and a cell back at its initial state scores zero.
The dominant stressor of a cell is the channel with the largest squared
deviation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import CHANNELS, GridSpec, LatticeState

Array = np.ndarray

DEFAULT_CRITICAL_STRESS = 0.3


@dataclass
class StressMap:
    """Per-cell stress values for one time slice."""

    grid: GridSpec
    d: Array
    year: int

    def __post_init__(self) -> None:
        if self.d.shape != (self.grid.nx, self.grid.ny):
            raise ValueError("stress map shape does not match grid")
        if not np.all(self.d >= 0):
            raise ValueError("stress values must be non-negative")


@dataclass
class StressSummary:
    mean_d: float
    max_d: float
    min_d: float
    cv_d: float
    exceed_fraction: float


@dataclass
class Decomposition:
    """Dominant-stressor labels and per-channel dominance fractions."""

    dominant: Array  # (nx, ny) channel indices into CHANNELS
    fractions: dict[str, float]

    def labels(self) -> Array:
        return np.asarray(CHANNELS, dtype=object)[self.dominant]


def stress_map(state: LatticeState, year: int) -> StressMap:
    """Euclidean distance of slice ``year`` from the initial slice, per cell."""
    current = state.slice(year)
    deviation = current - state.initial()
    d = np.sqrt((deviation**2).sum(axis=2))
    return StressMap(grid=state.grid, d=d, year=year)


def decompose(state: LatticeState, year: int) -> Decomposition:
    """Dominant channel per cell by squared deviation from the initial state.

    Ties resolve to the earliest channel in (N, P, K) order; in particular a
    cell identical to its initial state is labeled N.
    """
    deviation2 = (state.slice(year) - state.initial()) ** 2
    dominant = deviation2.argmax(axis=2)
    n = dominant.size
    fractions = {name: float((dominant == i).sum()) / n for i, name in enumerate(CHANNELS)}
    return Decomposition(dominant=dominant, fractions=fractions)


def summarize(stress: StressMap, threshold: float = DEFAULT_CRITICAL_STRESS) -> StressSummary:
    """Field summary: mean/max/min, coefficient of variation, exceedance.

    CV uses the sample standard deviation (n-1 denominator); it is defined
    as zero on a constant field. ``exceed_fraction`` is the share of cells
    strictly above the critical threshold.
    """
    d = stress.d.ravel()
    if d.size == 0:
        raise ValueError("stress map is empty")
    mean = float(d.mean())
    sd = float(d.std(ddof=1)) if d.size > 1 else 0.0
    cv = sd / mean if mean > 0 else 0.0
    return StressSummary(
        mean_d=mean,
        max_d=float(d.max()),
        min_d=float(d.min()),
        cv_d=cv,
        exceed_fraction=float((d > threshold).mean()),
    )
