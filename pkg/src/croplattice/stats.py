"""Distribution-shift and spatial-autocorrelation tests.

The distribution-shift statistic is a two-sample Cramér–von Mises form
evaluated on the pooled sorted support of both samples:

    omega^2 = (1 / 2n) * sum over all 2n pooled points z of
              [F_a(z) - F_b(z)]^2

with right-continuous empirical CDFs. Evaluating over the pooled support
keeps the statistic meaningful when one sample is constant (the uniform
initial state), where a statistic evaluated only on initial-sample points
would degenerate.

Significance comes from a paired label-swap permutation test: each cell's
(initial, final) pair swaps labels independently with probability 1/2, and
the p-value uses the add-one estimator (1 + b) / (R + 1), so the smallest
attainable p at R=999 is 0.001. Each replicate draws from its own RNG
substream keyed by (seed, replicate index), making results independent of
execution order.

Global Moran's I uses inverse-distance weights (zero diagonal, no row
standardization) on cell centers; significance is a two-sided permutation
test of the cell values against the analytic expectation -1/(n-1).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .lattice import GridSpec
from .seeding import substream

Array = np.ndarray

MIN_PERMUTATIONS = 99


@dataclass
class CvmResult:
    """Distribution-shift test outcome."""

    statistic: float
    p_value: float
    permutations: int
    per_channel: dict[str, tuple[float, float]] | None = None


@dataclass
class MoranResult:
    """Spatial autocorrelation test outcome."""

    i: float
    expected: float
    p_value: float
    permutations: int
    method: str = "permutation"


def _as_sample(values) -> Array:
    arr = np.asarray(values, dtype=float).ravel()
    if not np.all(np.isfinite(arr)):
        raise ValueError("samples must be finite")
    return arr


def cvm_statistic(sample_a, sample_b) -> float:
    """Pooled-support two-sample statistic; zero iff equal multisets.

    Rank-based, hence invariant under any common strictly increasing
    transform of both samples.
    """
    a = _as_sample(sample_a)
    b = _as_sample(sample_b)
    if a.size != b.size:
        raise ValueError(f"paired samples must match in length: {a.size} != {b.size}")
    if a.size < 2:
        raise ValueError(f"need at least 2 pairs, got {a.size}")
    return _cvm_pooled(a, b)


def _cvm_pooled(a: Array, b: Array) -> float:
    n = a.size
    values = np.concatenate([a, b])
    from_a = np.concatenate([np.ones(n, dtype=bool), np.zeros(n, dtype=bool)])
    order = np.argsort(values, kind="stable")
    v = values[order]
    count_a = np.cumsum(from_a[order])
    # Right-continuous ECDFs evaluate at each pooled VALUE: within a block of
    # ties, every point sees the cumulative count at the end of the block.
    end = np.where(np.append(v[1:] != v[:-1], True), np.arange(2 * n), 2 * n)
    end = np.minimum.accumulate(end[::-1])[::-1]
    f_a = count_a[end] / n
    f_b = (end + 1 - count_a[end]) / n
    return float(((f_a - f_b) ** 2).sum() / (2 * n))


def cvm_permutation_test(
    initial, final, permutations: int = 999, seed: int = 0
) -> CvmResult:
    """Paired label-swap permutation test for a shift between two states.

    Each replicate swaps the (initial, final) labels of every pair
    independently with probability 1/2 and recomputes the statistic;
    p = (1 + #{replicates >= observed}) / (R + 1).
    """
    a = _as_sample(initial)
    b = _as_sample(final)
    if a.size != b.size:
        raise ValueError(f"paired samples must match in length: {a.size} != {b.size}")
    if a.size < 2:
        raise ValueError(f"need at least 2 pairs, got {a.size}")
    if permutations < MIN_PERMUTATIONS:
        raise ValueError(
            f"need at least {MIN_PERMUTATIONS} permutations for usable resolution, "
            f"got {permutations}"
        )
    observed = _cvm_pooled(a, b)
    exceed = 0
    for r in range(permutations):
        swap = substream(seed, r).random(a.size) < 0.5
        perm_a = np.where(swap, b, a)
        perm_b = np.where(swap, a, b)
        if _cvm_pooled(perm_a, perm_b) >= observed:
            exceed += 1
    p = (1 + exceed) / (permutations + 1)
    return CvmResult(statistic=observed, p_value=p, permutations=permutations)


def cvm_combined(per_channel_stats) -> float:
    """Combined statistic: arithmetic mean of the per-channel statistics."""
    stats = [float(s) for s in per_channel_stats]
    if any(s < 0 or not np.isfinite(s) for s in stats):
        raise ValueError("per-channel statistics must be finite and non-negative")
    return sum(stats) / len(stats)


def cvm_combined_permutation_test(
    initial: Array, final: Array, permutations: int = 999, seed: int = 0
) -> CvmResult:
    """Joint test over all channels with one swap indicator per cell.

    ``initial`` and ``final`` are (n, channels) arrays paired by row. A
    single per-cell swap applies to every channel of that cell, preserving
    cross-channel dependence under the null. The statistic is the mean of
    the per-channel pooled statistics.
    """
    a = np.asarray(initial, dtype=float)
    b = np.asarray(final, dtype=float)
    if a.shape != b.shape or a.ndim != 2:
        raise ValueError("initial and final must be matching (n, channels) arrays")
    if a.shape[0] < 2:
        raise ValueError(f"need at least 2 pairs, got {a.shape[0]}")
    if permutations < MIN_PERMUTATIONS:
        raise ValueError(
            f"need at least {MIN_PERMUTATIONS} permutations for usable resolution, "
            f"got {permutations}"
        )
    n_channels = a.shape[1]
    observed = cvm_combined(
        [_cvm_pooled(a[:, c], b[:, c]) for c in range(n_channels)]
    )
    exceed = 0
    for r in range(permutations):
        swap = substream(seed, r).random(a.shape[0]) < 0.5
        stats = []
        for c in range(n_channels):
            perm_a = np.where(swap, b[:, c], a[:, c])
            perm_b = np.where(swap, a[:, c], b[:, c])
            stats.append(_cvm_pooled(perm_a, perm_b))
        if cvm_combined(stats) >= observed:
            exceed += 1
    p = (1 + exceed) / (permutations + 1)
    return CvmResult(statistic=observed, p_value=p, permutations=permutations)


@lru_cache(maxsize=8)
def _inverse_distance_weights(nx: int, ny: int) -> Array:
    """Dense inverse-distance weight matrix over cell centers, zero diagonal.

    Distances are in cell units; any common distance scale cancels in the
    Moran statistic.
    """
    xs, ys = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    pts = np.column_stack([xs.ravel(), ys.ravel()]).astype(float)
    d = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=-1))
    with np.errstate(divide="ignore"):
        w = 1.0 / d
    np.fill_diagonal(w, 0.0)
    w.setflags(write=False)
    return w


def _moran_value(z: Array, weights: Array, s0: float) -> float:
    return float((z.size / s0) * (z @ weights @ z) / (z @ z))


def morans_i(
    values, grid: GridSpec, permutations: int = 999, seed: int = 0
) -> MoranResult:
    """Global Moran's I with permutation significance.

    The p-value is two-sided against the expectation -1/(n-1): replicates
    shuffle the cell values uniformly, and p = (1 + #{|I_r - E| >= |I - E|})
    / (R + 1). A constant field has no defined autocorrelation and raises.
    """
    field = np.asarray(values, dtype=float)
    if field.shape != (grid.nx, grid.ny):
        raise ValueError(f"field shape {field.shape} does not match grid")
    n = field.size
    if n < 3:
        raise ValueError(f"need at least 3 cells, got {n}")
    flat = field.ravel()
    if np.var(flat) == 0:
        raise ValueError("Moran's I is undefined for a zero-variance field")
    if permutations < 1:
        raise ValueError(f"permutations must be >= 1, got {permutations}")
    weights = _inverse_distance_weights(grid.nx, grid.ny)
    s0 = float(weights.sum())
    observed = _moran_value(flat - flat.mean(), weights, s0)
    expected = -1.0 / (n - 1)
    exceed = 0
    for r in range(permutations):
        shuffled = substream(seed, r).permutation(flat)
        i_r = _moran_value(shuffled - shuffled.mean(), weights, s0)
        if abs(i_r - expected) >= abs(observed - expected):
            exceed += 1
    p = (1 + exceed) / (permutations + 1)
    return MoranResult(i=observed, expected=expected, p_value=p, permutations=permutations)
