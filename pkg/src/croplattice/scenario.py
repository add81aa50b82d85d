"""Scenario configuration, presets, and end-to-end execution.

A scenario is described by a single JSON document (see README for the
schema). Named presets cover the reference simulation and its four
sensitivity variants; a config may start from a preset and override any
field. ``run_scenario`` executes the full pipeline:

    init -> (force, smooth) per year -> stress -> decomposition
         -> per-channel and combined shift tests -> Moran's I

deterministically for a given seed. ``run_suite`` executes several
scenarios (optionally in parallel), emits per-scenario artifacts plus one
combined summary table, and shares the heatmap color scale across the
suite.
"""

from __future__ import annotations

import copy
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .forces import (
    CropForce,
    CropLibrary,
    Rotation,
    baseline_crop_library,
    run_rotation,
    scale_forces,
)
from .lattice import (
    CHANNELS,
    FieldParams,
    GridSpec,
    LatticeState,
    StiffnessMap,
    generate_lognormal_field,
    generate_structured_field,
    new_from_layers,
    new_uniform,
    quadrant_texture_map,
    read_class_raster,
    read_value_raster,
    stiffness_from_texture,
    uniform_texture_map,
    TextureClassMap,
)
from .seeding import STREAM_CVM, STREAM_INIT, STREAM_MORAN, subseed
from .smoothing import KernelSpec
from .stats import (
    CvmResult,
    MoranResult,
    cvm_combined_permutation_test,
    cvm_permutation_test,
    morans_i,
)
from .stress import (
    DEFAULT_CRITICAL_STRESS,
    Decomposition,
    StressMap,
    StressSummary,
    decompose,
    stress_map,
    summarize,
)

Array = np.ndarray


class ConfigError(ValueError):
    """A configuration failed schema or invariant validation."""


class SimulationError(RuntimeError):
    """A validated scenario failed during execution."""


# ---------------------------------------------------------------------------
# Config dataclasses
# ---------------------------------------------------------------------------


@dataclass
class StiffnessSpec:
    layout: str = "quadrant"  # quadrant | uniform | raster
    alphas: dict = field(
        default_factory=lambda: {"sand": 1.0, "loam": 0.5, "clay": 0.2}
    )
    texture: str = "sand"  # uniform layout only
    path: str | None = None  # raster layout only
    kind: str = "class"  # raster layout: class | alpha


@dataclass
class InitSpec:
    mode: str = "uniform"  # uniform | structured | lognormal
    value: float = 1.0
    channel_params: dict[str, FieldParams] | None = None


@dataclass
class OutputSpec:
    directory: str = "outputs"
    summary: bool = True
    cells: bool = True
    heatmap: bool = True


@dataclass
class ScenarioConfig:
    name: str
    grid: GridSpec
    seed: int
    rotation: Rotation
    crops: CropLibrary
    force_scale: float
    stiffness: StiffnessSpec
    smoothing: KernelSpec
    init: InitSpec
    permutations: int
    threshold: float
    output: OutputSpec
    base_dir: Path = field(default_factory=Path)

    @property
    def n_years(self) -> int:
        return self.rotation.n_years


@dataclass
class ChannelStats:
    mean: float
    sd: float
    min: float
    max: float


@dataclass
class RunReport:
    """Everything a scenario run produces, ready for serialization."""

    name: str
    grid: GridSpec
    stress_summary: StressSummary
    decomposition: Decomposition
    channel_stats: dict[str, ChannelStats]
    cvm: CvmResult
    moran: MoranResult
    stress: StressMap
    final: Array
    duration_s: float


@dataclass
class SuiteResult:
    reports: list[RunReport]
    failures: list[tuple[str, Exception]]
    summary_path: Path | None = None


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------

_BASELINE = {
    "name": "baseline",
    "seed": 42,
    "grid": {"nx": 20, "ny": 20, "cell_size_m": 10.0},
    "rotation": {"sequence": ["Corn", "Soybean", "Wheat"], "cycles": 1},
    "crops": "baseline",
    "force_scale": 1.0,
    "stiffness": {"layout": "quadrant", "sand": 1.0, "loam": 0.5, "clay": 0.2},
    "smoothing": {"sigma": 1.2, "boundary": "truncated_renormalized"},
    "init": {"mode": "uniform", "value": 1.0},
    "stats": {"permutations": 999},
    "threshold": DEFAULT_CRITICAL_STRESS,
    "output": {"directory": "outputs", "summary": True, "cells": True, "heatmap": True},
}


def _preset(name: str, **overrides) -> dict:
    cfg = copy.deepcopy(_BASELINE)
    cfg["name"] = name
    for key, value in overrides.items():
        if isinstance(value, dict):
            cfg[key] = {**cfg[key], **value}
        else:
            cfg[key] = value
    return cfg


PRESETS: dict[str, dict] = {
    "baseline": _preset("baseline"),
    "s1_sigma3": _preset("s1_sigma3", smoothing={"sigma": 3.0}),
    "s2_low_contrast": _preset(
        "s2_low_contrast", stiffness={"layout": "quadrant", "sand": 1.0, "loam": 0.9, "clay": 0.8}
    ),
    "s3_force15": _preset("s3_force15", force_scale=1.5),
    "s4_continuous_corn": _preset(
        "s4_continuous_corn", rotation={"sequence": ["Corn", "Corn", "Corn"], "cycles": 1}
    ),
}


def preset_names() -> list[str]:
    return list(PRESETS)


def preset_config(name: str) -> ScenarioConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {preset_names()}")
    return config_from_dict({"preset": name})


# ---------------------------------------------------------------------------
# Validation helpers
# ---------------------------------------------------------------------------


def _expect_mapping(value, path: str) -> dict:
    if not isinstance(value, dict):
        raise ConfigError(f"{path}: expected an object, got {type(value).__name__}")
    return value


def _reject_unknown(raw: dict, allowed: set[str], path: str) -> None:
    unknown = set(raw) - allowed
    if unknown:
        where = f"{path}." if path else ""
        raise ConfigError(f"unknown field(s): {', '.join(sorted(where + k for k in unknown))}")


def _number(raw: dict, key: str, path: str, default=None) -> float:
    value = raw.get(key, default)
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ConfigError(f"{path}.{key}: expected a number, got {value!r}")
    return float(value)


def _integer(raw: dict, key: str, path: str, default=None) -> int:
    value = raw.get(key, default)
    if not isinstance(value, int) or isinstance(value, bool):
        raise ConfigError(f"{path}.{key}: expected an integer, got {value!r}")
    return value


def _deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _parse_grid(raw: dict) -> GridSpec:
    raw = _expect_mapping(raw, "grid")
    _reject_unknown(raw, {"nx", "ny", "cell_size_m"}, "grid")
    nx = _integer(raw, "nx", "grid", 20)
    ny = _integer(raw, "ny", "grid", 20)
    cell = _number(raw, "cell_size_m", "grid", 10.0)
    try:
        return GridSpec(nx=nx, ny=ny, cell_size_m=cell)
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}") from exc


def _parse_rotation(raw: dict) -> Rotation:
    raw = _expect_mapping(raw, "rotation")
    _reject_unknown(raw, {"sequence", "cycles"}, "rotation")
    seq = raw.get("sequence")
    if not isinstance(seq, list) or not all(isinstance(s, str) for s in seq):
        raise ConfigError("rotation.sequence: expected a list of crop names")
    cycles = _integer(raw, "cycles", "rotation", 1)
    try:
        return Rotation(sequence=tuple(seq), cycles=cycles)
    except ValueError as exc:
        raise ConfigError(f"rotation: {exc}") from exc


def _parse_crops(raw) -> CropLibrary:
    if raw == "baseline":
        return baseline_crop_library()
    raw = _expect_mapping(raw, "crops")
    crops = []
    for name, vec in raw.items():
        if (
            not isinstance(vec, list)
            or len(vec) != 3
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in vec)
        ):
            raise ConfigError(f"crops.{name}: expected [f_N, f_P, f_K] numbers, got {vec!r}")
        try:
            crops.append(CropForce(name, tuple(float(v) for v in vec)))
        except ValueError as exc:
            raise ConfigError(f"crops.{name}: {exc}") from exc
    try:
        return CropLibrary(crops)
    except ValueError as exc:
        raise ConfigError(f"crops: {exc}") from exc


def _parse_stiffness(raw: dict) -> StiffnessSpec:
    raw = _expect_mapping(raw, "stiffness")
    _reject_unknown(raw, {"layout", "sand", "loam", "clay", "texture", "path", "kind"}, "stiffness")
    layout = raw.get("layout", "quadrant")
    if layout not in ("quadrant", "uniform", "raster"):
        raise ConfigError(
            f"stiffness.layout: expected quadrant, uniform or raster, got {layout!r}"
        )
    alphas = {
        "sand": _number(raw, "sand", "stiffness", 1.0),
        "loam": _number(raw, "loam", "stiffness", 0.5),
        "clay": _number(raw, "clay", "stiffness", 0.2),
    }
    for cls, a in alphas.items():
        if not 0 < a <= 1:
            raise ConfigError(f"stiffness.{cls}: alpha must lie in (0, 1], got {a}")
    spec = StiffnessSpec(layout=layout, alphas=alphas)
    if layout == "uniform":
        texture = raw.get("texture", "sand")
        if texture not in ("sand", "loam", "clay"):
            raise ConfigError(f"stiffness.texture: unknown class {texture!r}")
        spec.texture = texture
    if layout == "raster":
        path = raw.get("path")
        if not isinstance(path, str) or not path:
            raise ConfigError("stiffness.path: raster layout needs a CSV path")
        kind = raw.get("kind", "class")
        if kind not in ("class", "alpha"):
            raise ConfigError(f"stiffness.kind: expected class or alpha, got {kind!r}")
        spec.path = path
        spec.kind = kind
    return spec


def _parse_smoothing(raw: dict) -> KernelSpec:
    raw = _expect_mapping(raw, "smoothing")
    _reject_unknown(raw, {"sigma", "radius", "boundary"}, "smoothing")
    sigma = _number(raw, "sigma", "smoothing", 1.2)
    if not sigma > 0:
        raise ConfigError(f"smoothing.sigma: must be positive, got {sigma}")
    radius = raw.get("radius")
    if radius is not None:
        radius = _integer(raw, "radius", "smoothing")
        if radius < 0:
            raise ConfigError(f"smoothing.radius: must be >= 0, got {radius}")
    boundary = raw.get("boundary", "truncated_renormalized")
    try:
        return KernelSpec(sigma=sigma, radius=radius, boundary=boundary)
    except ValueError as exc:
        raise ConfigError(f"smoothing: {exc}") from exc


_FIELD_KEYS = {"mean", "spatial_sill", "nugget", "range_m", "floor", "log_mean"}


def _parse_field_params(raw: dict, path: str, lognormal: bool) -> FieldParams:
    raw = _expect_mapping(raw, path)
    _reject_unknown(raw, _FIELD_KEYS, path)
    try:
        return FieldParams(
            mean=_number(raw, "mean", path, 1.0),
            spatial_sill=_number(raw, "spatial_sill", path, 0.0),
            nugget=_number(raw, "nugget", path, 0.0),
            range_m=_number(raw, "range_m", path, 100.0),
            floor=_number(raw, "floor", path, 0.01),
            lognormal=lognormal,
            log_mean=_number(raw, "log_mean", path, 0.0),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _parse_init(raw: dict) -> InitSpec:
    raw = _expect_mapping(raw, "init")
    _reject_unknown(raw, {"mode", "value", "params", "channels"}, "init")
    mode = raw.get("mode", "uniform")
    if mode not in ("uniform", "structured", "lognormal"):
        raise ConfigError(
            f"init.mode: expected uniform, structured or lognormal, got {mode!r}"
        )
    if mode == "uniform":
        value = _number(raw, "value", "init", 1.0)
        if not value > 0:
            raise ConfigError(f"init.value: must be positive, got {value}")
        return InitSpec(mode=mode, value=value)
    lognormal = mode == "lognormal"
    shared = raw.get("params", {})
    per_channel = _expect_mapping(raw.get("channels", {}), "init.channels")
    _reject_unknown(per_channel, set(CHANNELS), "init.channels")
    channel_params = {}
    for channel in CHANNELS:
        merged = _deep_merge(
            _expect_mapping(shared, "init.params"),
            _expect_mapping(per_channel.get(channel, {}), f"init.channels.{channel}"),
        )
        channel_params[channel] = _parse_field_params(
            merged, f"init.channels.{channel}", lognormal
        )
    return InitSpec(mode=mode, channel_params=channel_params)


def _parse_output(raw: dict) -> OutputSpec:
    raw = _expect_mapping(raw, "output")
    _reject_unknown(raw, {"directory", "summary", "cells", "heatmap"}, "output")
    directory = raw.get("directory", "outputs")
    if not isinstance(directory, str) or not directory:
        raise ConfigError(f"output.directory: expected a non-empty string, got {directory!r}")
    flags = {}
    for key in ("summary", "cells", "heatmap"):
        value = raw.get(key, True)
        if not isinstance(value, bool):
            raise ConfigError(f"output.{key}: expected a boolean, got {value!r}")
        flags[key] = value
    return OutputSpec(directory=directory, **flags)


_TOP_KEYS = {
    "preset",
    "name",
    "seed",
    "grid",
    "rotation",
    "crops",
    "force_scale",
    "stiffness",
    "smoothing",
    "init",
    "stats",
    "threshold",
    "output",
}


def config_from_dict(raw: dict, base_dir: str | Path = ".") -> ScenarioConfig:
    """Validate a raw config mapping into a ScenarioConfig.

    Fields omitted from the document take the reference-simulation defaults;
    a ``preset`` key starts from that preset's full parameter set before
    overrides are applied. Every diagnostic names the offending field path.
    """
    raw = _expect_mapping(raw, "config")
    _reject_unknown(raw, _TOP_KEYS, "")
    preset = raw.get("preset")
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"preset: unknown preset {preset!r}; available: {preset_names()}")
        base = copy.deepcopy(PRESETS[preset])
    else:
        base = copy.deepcopy(_BASELINE)
        base["name"] = None  # require an explicit name without a preset
    merged = _deep_merge(base, {k: v for k, v in raw.items() if k != "preset"})

    name = merged.get("name")
    if not isinstance(name, str) or not name:
        raise ConfigError("name: expected a non-empty string (required when no preset is named)")
    seed = merged.get("seed")
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError(f"seed: expected a non-negative integer, got {seed!r}")

    grid = _parse_grid(merged["grid"])
    rotation = _parse_rotation(merged["rotation"])
    crops = _parse_crops(merged["crops"])
    force_scale = _number(merged, "force_scale", "config", 1.0)
    if not force_scale > 0:
        raise ConfigError(f"force_scale: must be positive, got {force_scale}")
    stiffness = _parse_stiffness(merged["stiffness"])
    smoothing = _parse_smoothing(merged["smoothing"])
    init = _parse_init(merged["init"])
    stats_raw = _expect_mapping(merged["stats"], "stats")
    _reject_unknown(stats_raw, {"permutations"}, "stats")
    permutations = _integer(stats_raw, "permutations", "stats", 999)
    if permutations < 99:
        raise ConfigError(f"stats.permutations: must be >= 99, got {permutations}")
    threshold = _number(merged, "threshold", "config", DEFAULT_CRITICAL_STRESS)
    if threshold < 0:
        raise ConfigError(f"threshold: must be >= 0, got {threshold}")
    output = _parse_output(merged["output"])

    missing = [c for c in rotation.sequence if c not in crops]
    if missing:
        raise ConfigError(f"rotation.sequence: unknown crop(s) {missing}; define them under crops")

    return ScenarioConfig(
        name=name,
        grid=grid,
        seed=seed,
        rotation=rotation,
        crops=crops,
        force_scale=force_scale,
        stiffness=stiffness,
        smoothing=smoothing,
        init=init,
        permutations=permutations,
        threshold=threshold,
        output=output,
        base_dir=Path(base_dir),
    )


def load_config(path: str | Path) -> ScenarioConfig:
    """Load and validate a scenario config from a JSON file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    return config_from_dict(raw, base_dir=path.parent)


# ---------------------------------------------------------------------------
# Execution
# ---------------------------------------------------------------------------


def build_stiffness(config: ScenarioConfig) -> StiffnessMap:
    spec = config.stiffness
    a = spec.alphas
    if spec.layout == "quadrant":
        classes = quadrant_texture_map(config.grid)
    elif spec.layout == "uniform":
        classes = uniform_texture_map(config.grid, spec.texture)
    else:
        path = config.base_dir / spec.path
        if spec.kind == "alpha":
            alpha = read_value_raster(path)
            if alpha.shape != (config.grid.nx, config.grid.ny):
                raise ConfigError(
                    f"stiffness.path: raster shape {alpha.shape} does not match grid "
                    f"({config.grid.nx}, {config.grid.ny})"
                )
            try:
                return StiffnessMap(grid=config.grid, alpha=alpha)
            except ValueError as exc:
                raise ConfigError(f"stiffness.path: {exc}") from exc
        classes_arr = read_class_raster(path)
        if classes_arr.shape != (config.grid.nx, config.grid.ny):
            raise ConfigError(
                f"stiffness.path: raster shape {classes_arr.shape} does not match grid "
                f"({config.grid.nx}, {config.grid.ny})"
            )
        try:
            classes = TextureClassMap(grid=config.grid, classes=classes_arr)
        except ValueError as exc:
            raise ConfigError(f"stiffness.path: {exc}") from exc
    return stiffness_from_texture(classes, a["sand"], a["loam"], a["clay"])


def build_initial_state(config: ScenarioConfig) -> LatticeState:
    years = config.n_years + 1
    if config.init.mode == "uniform":
        return new_uniform(config.grid, years, config.init.value)
    layers = np.empty((config.grid.nx, config.grid.ny, len(CHANNELS)))
    for index, channel in enumerate(CHANNELS):
        params = config.init.channel_params[channel]
        channel_seed = subseed(config.seed, STREAM_INIT, index)
        if config.init.mode == "lognormal":
            layers[:, :, index] = generate_lognormal_field(config.grid, params, channel_seed)
        else:
            layers[:, :, index] = generate_structured_field(config.grid, params, channel_seed)
    return new_from_layers(config.grid, years, layers)


def run_scenario(config: ScenarioConfig) -> RunReport:
    """Execute a validated scenario and return its full report.

    Deterministic per (config, seed): all randomness flows through
    documented substreams of the scenario seed.
    """
    started = time.perf_counter()
    try:
        library = config.crops
        if config.force_scale != 1.0:
            library = scale_forces(library, config.force_scale)
        stiffness = build_stiffness(config)
        state = build_initial_state(config)
        run_rotation(state, config.rotation, library, stiffness, config.smoothing)

        final_year = config.n_years
        smap = stress_map(state, final_year)
        summary = summarize(smap, config.threshold)
        decomposition = decompose(state, final_year)

        n = config.grid.n_cells
        initial = state.initial().reshape(n, len(CHANNELS))
        final = state.slice(final_year).reshape(n, len(CHANNELS))
        per_channel: dict[str, tuple[float, float]] = {}
        channel_stats: dict[str, ChannelStats] = {}
        for index, channel in enumerate(CHANNELS):
            result = cvm_permutation_test(
                initial[:, index],
                final[:, index],
                permutations=config.permutations,
                seed=subseed(config.seed, STREAM_CVM, index),
            )
            per_channel[channel] = (result.statistic, result.p_value)
            values = final[:, index]
            channel_stats[channel] = ChannelStats(
                mean=float(values.mean()),
                sd=float(values.std(ddof=1)),
                min=float(values.min()),
                max=float(values.max()),
            )
        combined = cvm_combined_permutation_test(
            initial,
            final,
            permutations=config.permutations,
            seed=subseed(config.seed, STREAM_CVM, len(CHANNELS)),
        )
        combined.per_channel = per_channel

        moran = morans_i(
            smap.d,
            config.grid,
            permutations=config.permutations,
            seed=subseed(config.seed, STREAM_MORAN, 0),
        )
    except ConfigError:
        raise
    except Exception as exc:
        raise SimulationError(f"scenario {config.name!r}: {exc}") from exc

    return RunReport(
        name=config.name,
        grid=config.grid,
        stress_summary=summary,
        decomposition=decomposition,
        channel_stats=channel_stats,
        cvm=combined,
        moran=moran,
        stress=smap,
        final=state.slice(final_year).copy(),
        duration_s=time.perf_counter() - started,
    )


def run_suite(
    configs: list[ScenarioConfig],
    out_dir: str | Path | None = None,
    workers: int = 1,
    emit: bool = True,
) -> SuiteResult:
    """Run several scenarios, optionally in parallel, and emit artifacts.

    Scenario failures are collected rather than aborting the rest. Reports
    keep the input order regardless of completion order, and all heatmaps
    share one color scale spanning the suite's stress range.
    """
    from .reports import emit_reports, write_summary_csv

    if not configs:
        raise ConfigError("suite needs at least one scenario config")
    names = [c.name for c in configs]
    duplicates = sorted({n for n in names if names.count(n) > 1})
    if duplicates:
        raise ConfigError(f"duplicate scenario names in suite: {duplicates}")
    if workers < 1:
        raise ConfigError(f"workers must be >= 1, got {workers}")

    def _guarded(config: ScenarioConfig):
        try:
            return run_scenario(config)
        except Exception as exc:  # collected; suite continues
            return exc

    if workers == 1:
        outcomes = [_guarded(c) for c in configs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_guarded, configs))

    reports: list[RunReport] = []
    failures: list[tuple[str, Exception]] = []
    for config, outcome in zip(configs, outcomes):
        if isinstance(outcome, Exception):
            failures.append((config.name, outcome))
        else:
            reports.append(outcome)

    summary_path: Path | None = None
    if emit and reports:
        scale_max = max(report.stress_summary.max_d for report in reports)
        for config, outcome in zip(configs, outcomes):
            if isinstance(outcome, Exception):
                continue
            emit_reports(
                outcome, config, out_dir=out_dir, scale_max=scale_max, write_summary=False
            )
        first_out = Path(out_dir) if out_dir is not None else Path(configs[0].output.directory)
        first_out.mkdir(parents=True, exist_ok=True)
        summary_path = first_out / "summary.csv"
        write_summary_csv(reports, summary_path)
    return SuiteResult(reports=reports, failures=failures, summary_path=summary_path)
