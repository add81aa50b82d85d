"""Spatial lattice simulator for crop-rotation impact on soil N-P-K.

The model tracks normalized nutrient concentrations on a 2D grid through a
rotation of crops. Each crop applies a multiplicative force per nutrient,
modulated by a per-cell stiffness (buffering) factor; mass-conserving
Gaussian smoothing redistributes nutrients laterally each year. Cumulative
impact is summarized by a per-cell multivariate stress metric, and validated
statistically with paired-permutation distribution-shift tests and Moran's I
spatial autocorrelation.
"""

from .forces import (
    CropForce,
    CropLibrary,
    Rotation,
    apply_force,
    baseline_crop_library,
    run_rotation,
    scale_forces,
)
from .lattice import (
    CHANNELS,
    BufferingParams,
    FieldParams,
    GridSpec,
    LatticeState,
    StiffnessMap,
    TextureClassMap,
    buffering_index_k,
    generate_lognormal_field,
    generate_structured_field,
    new_from_layers,
    new_uniform,
    quadrant_texture_map,
    read_class_raster,
    read_value_raster,
    stiffness_from_buffering,
    stiffness_from_texture,
    uniform_texture_map,
)
from .reports import (
    emit_reports,
    load_cells_csv,
    write_cells_csv,
    write_heatmap_svg,
    write_summary_csv,
)
from .scenario import (
    ConfigError,
    RunReport,
    ScenarioConfig,
    SimulationError,
    SuiteResult,
    config_from_dict,
    load_config,
    preset_config,
    preset_names,
    run_scenario,
    run_suite,
)
from .seeding import subseed, substream
from .smoothing import KernelSpec, gaussian_kernel, smooth, smooth_reflective
from .stats import (
    CvmResult,
    MoranResult,
    cvm_combined,
    cvm_combined_permutation_test,
    cvm_permutation_test,
    cvm_statistic,
    morans_i,
)
from .stress import (
    Decomposition,
    StressMap,
    StressSummary,
    decompose,
    stress_map,
    summarize,
)

__version__ = "0.1.0"

__all__ = [
    "CHANNELS",
    "BufferingParams",
    "ConfigError",
    "CropForce",
    "CropLibrary",
    "CvmResult",
    "Decomposition",
    "FieldParams",
    "GridSpec",
    "KernelSpec",
    "LatticeState",
    "MoranResult",
    "Rotation",
    "RunReport",
    "ScenarioConfig",
    "SimulationError",
    "StiffnessMap",
    "StressMap",
    "StressSummary",
    "SuiteResult",
    "TextureClassMap",
    "apply_force",
    "baseline_crop_library",
    "buffering_index_k",
    "config_from_dict",
    "cvm_combined",
    "cvm_combined_permutation_test",
    "cvm_permutation_test",
    "cvm_statistic",
    "decompose",
    "emit_reports",
    "gaussian_kernel",
    "generate_lognormal_field",
    "generate_structured_field",
    "load_cells_csv",
    "load_config",
    "morans_i",
    "new_from_layers",
    "new_uniform",
    "preset_config",
    "preset_names",
    "quadrant_texture_map",
    "read_class_raster",
    "read_value_raster",
    "run_rotation",
    "run_scenario",
    "run_suite",
    "scale_forces",
    "smooth",
    "smooth_reflective",
    "stiffness_from_buffering",
    "stiffness_from_texture",
    "stress_map",
    "subseed",
    "substream",
    "summarize",
    "uniform_texture_map",
    "write_cells_csv",
    "write_heatmap_svg",
    "write_summary_csv",
]
