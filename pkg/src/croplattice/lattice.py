"""Lattice state, grid geometry, initial-condition generators, stiffness maps.

The simulation state is a dense 4D tensor of normalized nutrient
concentrations indexed ``[x, y, t, c]`` with channels ordered (N, P, K).
Values are dimensionless multiples of a reference concentration, so a cell
holding 0.7 in one channel sits at 70% of its reference level.

Initial conditions are either uniform, spatially structured Gaussian fields
(exponential covariance, practical-range convention), or log-normal fields.
Structured fields are generated by dense covariance factorization, which is
exact and fast for the grid sizes this model targets (up to ~64 x 64 cells).

Per-cell stiffness alpha in (0, 1] scales the effective crop force: alpha = 1
on unbuffered sand, smaller on buffered soils. Stiffness maps come from a
three-class texture map, from a buffering-capacity index via
``alpha = 1 / (1 + beta * B)``, or directly from a raster file.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .seeding import substream

Array = np.ndarray

CHANNELS = ("N", "P", "K")

TEXTURE_CLASSES = ("sand", "loam", "clay")

# Default per-class stiffness: sand unbuffered, clay strongly buffered.
DEFAULT_CLASS_ALPHA = {"sand": 1.0, "loam": 0.5, "clay": 0.2}

# Dense covariance factorization is exact but cubic; beyond this many cells
# the structured generator refuses rather than silently degrading.
MAX_STRUCTURED_CELLS = 64 * 64


@dataclass(frozen=True)
class GridSpec:
    """Regular grid geometry: cell counts and physical cell size."""

    nx: int
    ny: int
    cell_size_m: float = 10.0

    def __post_init__(self) -> None:
        if self.nx < 2 or self.ny < 2:
            raise ValueError(f"grid must be at least 2x2, got {self.nx}x{self.ny}")
        if not self.cell_size_m > 0:
            raise ValueError(f"cell_size_m must be positive, got {self.cell_size_m}")

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    def cell_centers_m(self) -> Array:
        """(n_cells, 2) array of cell-center coordinates in meters."""
        xs, ys = np.meshgrid(np.arange(self.nx), np.arange(self.ny), indexing="ij")
        return np.column_stack([xs.ravel(), ys.ravel()]).astype(float) * self.cell_size_m


@dataclass
class LatticeState:
    """4D concentration tensor S[x, y, t, c] plus its grid geometry.

    ``values`` has shape (nx, ny, years, 3) where ``years`` counts stored
    time slices including the initial one at t=0. Slice t=0 is set once by
    an initializer and must not be rewritten; the simulation loop is the
    single writer for slices t >= 1.
    """

    grid: GridSpec
    values: Array
    channels: tuple[str, ...] = CHANNELS

    def __post_init__(self) -> None:
        expected = (self.grid.nx, self.grid.ny)
        if self.values.ndim != 4 or self.values.shape[:2] != expected:
            raise ValueError(
                f"state tensor must be (nx, ny, years, 3), got {self.values.shape}"
            )
        if self.values.shape[3] != len(self.channels):
            raise ValueError("channel dimension does not match channel names")
        if self.values.shape[2] < 1:
            raise ValueError("state needs at least the initial time slice")
        if not np.all(self.values > 0):
            raise ValueError("concentrations must be strictly positive")

    @property
    def years(self) -> int:
        """Number of stored time slices, including t=0."""
        return self.values.shape[2]

    def slice(self, year: int) -> Array:
        """(nx, ny, 3) view of one time slice."""
        if not 0 <= year < self.years:
            raise ValueError(f"year {year} outside stored range [0, {self.years - 1}]")
        return self.values[:, :, year, :]

    def initial(self) -> Array:
        return self.values[:, :, 0, :]


@dataclass(frozen=True)
class FieldParams:
    """Parameters of one random initial-condition field.

    ``spatial_sill`` is the variance of the spatially structured component,
    ``nugget`` the variance of the unstructured i.i.d. component, and
    ``range_m`` the practical autocorrelation range: covariance drops to 5%
    of the sill at that distance. ``floor`` clamps structured fields from
    below; log-normal fields use ``log_mean`` and need no floor.
    """

    mean: float = 1.0
    spatial_sill: float = 0.0
    nugget: float = 0.0
    range_m: float = 100.0
    floor: float = 0.01
    lognormal: bool = False
    log_mean: float = 0.0

    def __post_init__(self) -> None:
        if self.spatial_sill < 0:
            raise ValueError(f"spatial_sill must be >= 0, got {self.spatial_sill}")
        if self.nugget < 0:
            raise ValueError(f"nugget must be >= 0, got {self.nugget}")
        if not self.range_m > 0:
            raise ValueError(f"range_m must be positive, got {self.range_m}")
        if not self.lognormal and not 0 < self.floor < self.mean:
            raise ValueError(
                f"floor must satisfy 0 < floor < mean, got floor={self.floor} mean={self.mean}"
            )


@dataclass
class TextureClassMap:
    """Per-cell soil texture labels in {sand, loam, clay}."""

    grid: GridSpec
    classes: Array  # dtype object/str, shape (nx, ny)

    def __post_init__(self) -> None:
        if self.classes.shape != (self.grid.nx, self.grid.ny):
            raise ValueError("texture map shape does not match grid")
        bad = set(np.unique(self.classes)) - set(TEXTURE_CLASSES)
        if bad:
            raise ValueError(f"unknown texture classes: {sorted(bad)}")


@dataclass
class StiffnessMap:
    """Per-cell force-modulation factor alpha in (0, 1]."""

    grid: GridSpec
    alpha: Array

    def __post_init__(self) -> None:
        if self.alpha.shape != (self.grid.nx, self.grid.ny):
            raise ValueError("stiffness map shape does not match grid")
        if not np.all((self.alpha > 0) & (self.alpha <= 1)):
            raise ValueError("stiffness values must lie in (0, 1]")


@dataclass(frozen=True)
class BufferingParams:
    """Scaling and weights for the buffering-capacity index."""

    beta: float = 4.0
    weights: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)

    def __post_init__(self) -> None:
        if self.beta < 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("weights must be finite")


# ---------------------------------------------------------------------------
# State initializers
# ---------------------------------------------------------------------------


def new_uniform(grid: GridSpec, years: int, value: float = 1.0) -> LatticeState:
    """Uniform initial state; all slices start equal to t=0.

    Later slices are placeholders that the simulation overwrites year by
    year.
    """
    if years < 1:
        raise ValueError(f"years must be >= 1, got {years}")
    if not value > 0:
        raise ValueError(f"initial value must be positive, got {value}")
    values = np.full((grid.nx, grid.ny, years, len(CHANNELS)), float(value))
    return LatticeState(grid=grid, values=values)


def new_from_layers(grid: GridSpec, years: int, layers: Array) -> LatticeState:
    """Build a state from per-channel initial layers of shape (nx, ny, 3)."""
    if years < 1:
        raise ValueError(f"years must be >= 1, got {years}")
    layers = np.asarray(layers, dtype=float)
    if layers.shape != (grid.nx, grid.ny, len(CHANNELS)):
        raise ValueError(f"layers must be (nx, ny, 3), got {layers.shape}")
    values = np.repeat(layers[:, :, None, :], years, axis=2)
    return LatticeState(grid=grid, values=values)


@lru_cache(maxsize=8)
def _covariance_factor(
    nx: int, ny: int, cell_size_m: float, spatial_sill: float, range_m: float
) -> Array:
    """Lower-triangular factor of the exponential covariance over the grid.

    C(d) = spatial_sill * exp(-3 d / range_m), with 1e-10 diagonal jitter
    before factorization. Cached: the factor depends only on geometry and
    covariance parameters, not on the seed.
    """
    grid = GridSpec(nx, ny, cell_size_m)
    pts = grid.cell_centers_m()
    d = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=-1))
    cov = spatial_sill * np.exp(-3.0 * d / range_m)
    cov[np.diag_indices_from(cov)] += 1e-10
    try:
        factor = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise ValueError(
            "covariance matrix is not positive definite after jitter; "
            "field parameters are degenerate"
        ) from exc
    factor.setflags(write=False)
    return factor


def _gaussian_components(grid: GridSpec, params: FieldParams, seed: int) -> Array:
    """Zero-mean structured + nugget field on the grid, shape (nx, ny).

    Draw order is fixed (structured normals first, nugget second) so a seed
    identifies the field bit-for-bit.
    """
    rng = substream(seed)
    n = grid.n_cells
    out = np.zeros(n)
    if params.spatial_sill > 0:
        if n > MAX_STRUCTURED_CELLS:
            raise ValueError(
                f"structured generation uses dense factorization and supports up to "
                f"{MAX_STRUCTURED_CELLS} cells; got {n}"
            )
        factor = _covariance_factor(
            grid.nx, grid.ny, grid.cell_size_m, params.spatial_sill, params.range_m
        )
        out = out + factor @ rng.standard_normal(n)
    if params.nugget > 0:
        out = out + np.sqrt(params.nugget) * rng.standard_normal(n)
    return out.reshape(grid.nx, grid.ny)


def generate_structured_field(grid: GridSpec, params: FieldParams, seed: int) -> Array:
    """Spatially structured random layer: max(floor, mean + structured + nugget).

    The structured component has exponential covariance
    ``spatial_sill * exp(-3 d / range_m)`` (practical-range convention); the
    nugget component is i.i.d. Gaussian. Deterministic per seed.
    """
    if params.lognormal:
        raise ValueError("params are flagged lognormal; use generate_lognormal_field")
    layer = params.mean + _gaussian_components(grid, params, seed)
    return np.maximum(params.floor, layer)


def generate_lognormal_field(grid: GridSpec, params: FieldParams, seed: int) -> Array:
    """Log-normal random layer: exp(log_mean + structured + nugget).

    The Gaussian machinery operates on the log scale, so the layer is
    strictly positive with no floor clamp.
    """
    if not params.lognormal:
        raise ValueError("params are not flagged lognormal; use generate_structured_field")
    return np.exp(params.log_mean + _gaussian_components(grid, params, seed))


# ---------------------------------------------------------------------------
# Stiffness construction
# ---------------------------------------------------------------------------


def quadrant_texture_map(grid: GridSpec) -> TextureClassMap:
    """Reference texture layout: lower-left quadrant sand, upper-right clay,
    the remaining two quadrants loam.

    With the default per-class alphas this is the canonical heterogeneous
    stiffness layout used by the built-in scenarios; on a 20x20 grid the
    sand block covers cells x, y in [0, 10).
    """
    classes = np.full((grid.nx, grid.ny), "loam", dtype=object)
    classes[: grid.nx // 2, : grid.ny // 2] = "sand"
    classes[grid.nx // 2 :, grid.ny // 2 :] = "clay"
    return TextureClassMap(grid=grid, classes=classes)


def uniform_texture_map(grid: GridSpec, texture: str) -> TextureClassMap:
    """Single-texture map (every cell the same class)."""
    if texture not in TEXTURE_CLASSES:
        raise ValueError(f"unknown texture class {texture!r}")
    return TextureClassMap(grid=grid, classes=np.full((grid.nx, grid.ny), texture, dtype=object))


def stiffness_from_texture(
    classes: TextureClassMap,
    sand_alpha: float = 1.0,
    loam_alpha: float = 0.5,
    clay_alpha: float = 0.2,
) -> StiffnessMap:
    """Piecewise stiffness from a three-class texture map."""
    by_class = {"sand": sand_alpha, "loam": loam_alpha, "clay": clay_alpha}
    for name, a in by_class.items():
        if not 0 < a <= 1:
            raise ValueError(f"{name} alpha must lie in (0, 1], got {a}")
    alpha = np.empty(classes.classes.shape, dtype=float)
    for name, a in by_class.items():
        alpha[classes.classes == name] = a
    return StiffnessMap(grid=classes.grid, alpha=alpha)


def stiffness_from_buffering(
    buffering: Array, grid: GridSpec, params: BufferingParams
) -> StiffnessMap:
    """Stiffness from a buffering index: alpha = 1 / (1 + beta * B).

    B must be pre-normalized to [0, 1]; alpha then lands in (0, 1], with
    beta = 0 disabling buffering entirely.
    """
    buffering = np.asarray(buffering, dtype=float)
    if buffering.shape != (grid.nx, grid.ny):
        raise ValueError("buffering index shape does not match grid")
    if not np.all((buffering >= 0) & (buffering <= 1)):
        raise ValueError("buffering index must lie in [0, 1]")
    alpha = 1.0 / (1.0 + params.beta * buffering)
    return StiffnessMap(grid=grid, alpha=alpha)


def buffering_index_k(
    clay: Array,
    smectite_illite: Array,
    cec: Array,
    weights: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3),
) -> Array:
    """Weighted potassium-buffering index, clamped to [0, 1].

    Inputs must be co-registered rasters already normalized to [0, 1]; raw
    survey units (clay %, cmol/kg CEC) are out of scope here.
    """
    clay = np.asarray(clay, dtype=float)
    smectite_illite = np.asarray(smectite_illite, dtype=float)
    cec = np.asarray(cec, dtype=float)
    if not clay.shape == smectite_illite.shape == cec.shape:
        raise ValueError(
            f"input rasters must share one grid, got {clay.shape}, "
            f"{smectite_illite.shape}, {cec.shape}"
        )
    w1, w2, w3 = weights
    return np.clip(w1 * clay + w2 * smectite_illite + w3 * cec, 0.0, 1.0)


# ---------------------------------------------------------------------------
# Raster ingestion (CSV, header x,y,value or x,y,class; 0-based indices)
# ---------------------------------------------------------------------------


def _read_raster_rows(path: str | Path, value_column: str) -> tuple[int, int, dict]:
    cells: dict[tuple[int, int], str] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or set(reader.fieldnames) != {"x", "y", value_column}:
            raise ValueError(
                f"raster {path} must have header x,y,{value_column}, "
                f"got {reader.fieldnames}"
            )
        for row in reader:
            key = (int(row["x"]), int(row["y"]))
            if key in cells:
                raise ValueError(f"raster {path}: duplicate cell {key}")
            cells[key] = row[value_column]
    if not cells:
        raise ValueError(f"raster {path} is empty")
    nx = max(x for x, _ in cells) + 1
    ny = max(y for _, y in cells) + 1
    if len(cells) != nx * ny:
        raise ValueError(f"raster {path}: expected {nx * ny} cells, got {len(cells)}")
    return nx, ny, cells


def read_value_raster(path: str | Path) -> Array:
    """Read a per-cell scalar raster from CSV with header x,y,value."""
    nx, ny, cells = _read_raster_rows(path, "value")
    out = np.empty((nx, ny), dtype=float)
    for (x, y), v in cells.items():
        out[x, y] = float(v)
    return out


def read_class_raster(path: str | Path) -> Array:
    """Read a per-cell texture-class raster from CSV with header x,y,class."""
    nx, ny, cells = _read_raster_rows(path, "class")
    out = np.empty((nx, ny), dtype=object)
    for (x, y), v in cells.items():
        out[x, y] = v.strip()
    return out
