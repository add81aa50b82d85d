"""Crop force vectors, rotations, and the annual force-then-smooth update.

A crop's seasonal effect on each nutrient is a proportional change f in
(-1, 1): negative values remove, positive values add (legume fixation).
Applied to a cell, the effective change is scaled by the local stiffness:

    S'(x, y, t, c) = S(x, y, t-1, c) * (1 + f_c * alpha(x, y))

so strongly buffered cells (small alpha) respond less. One simulated year is
a force application followed by mass-conserving smoothing of each channel;
only the post-smoothing slice is stored.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import CHANNELS, LatticeState, StiffnessMap
from .smoothing import KernelSpec, smooth

Array = np.ndarray


@dataclass
class CropForce:
    """Named per-season proportional force on (N, P, K)."""

    name: str
    f: tuple[float, float, float]

    def __post_init__(self) -> None:
        if len(self.f) != len(CHANNELS):
            raise ValueError(f"force vector needs {len(CHANNELS)} components, got {len(self.f)}")
        self.f = tuple(float(v) for v in self.f)
        for channel, value in zip(CHANNELS, self.f):
            if not -1.0 < value < 1.0:
                raise ValueError(
                    f"crop {self.name!r}: f_{channel} must lie in (-1, 1), got {value}"
                )


class CropLibrary:
    """Collection of uniquely named crop forces."""

    def __init__(self, crops: list[CropForce] | None = None):
        self._crops: dict[str, CropForce] = {}
        for crop in crops or []:
            self.add(crop)

    def add(self, crop: CropForce) -> None:
        if crop.name in self._crops:
            raise ValueError(f"duplicate crop name {crop.name!r}")
        self._crops[crop.name] = crop

    def __getitem__(self, name: str) -> CropForce:
        try:
            return self._crops[name]
        except KeyError:
            raise KeyError(
                f"unknown crop {name!r}; available: {sorted(self._crops)}"
            ) from None

    def __contains__(self, name: str) -> bool:
        return name in self._crops

    def __len__(self) -> int:
        return len(self._crops)

    def names(self) -> list[str]:
        return list(self._crops)

    def crops(self) -> list[CropForce]:
        return list(self._crops.values())


@dataclass
class Rotation:
    """Ordered crop sequence repeated for a number of cycles."""

    sequence: tuple[str, ...]
    cycles: int = 1

    def __post_init__(self) -> None:
        if not self.sequence:
            raise ValueError("rotation sequence must not be empty")
        if self.cycles < 1:
            raise ValueError(f"cycles must be >= 1, got {self.cycles}")
        self.sequence = tuple(self.sequence)

    @property
    def n_years(self) -> int:
        return len(self.sequence) * self.cycles

    def crop_for_year(self, year: int) -> str:
        """Crop name grown in simulation year ``year`` (1-based)."""
        if year < 1:
            raise ValueError(f"year must be >= 1, got {year}")
        return self.sequence[(year - 1) % len(self.sequence)]

    def resolve(self, library: CropLibrary) -> None:
        missing = [name for name in self.sequence if name not in library]
        if missing:
            raise ValueError(f"rotation references unknown crops: {missing}")


def baseline_crop_library() -> CropLibrary:
    """Reference three-crop library: corn, soybean, wheat.

    Corn is a heavy N remover, soybean fixes N while drawing down P and K,
    wheat removes P hardest.
    """
    return CropLibrary(
        [
            CropForce("Corn", (-0.6, -0.2, -0.2)),
            CropForce("Soybean", (0.2, -0.1, -0.1)),
            CropForce("Wheat", (-0.2, -0.4, -0.1)),
        ]
    )


def scale_forces(library: CropLibrary, factor: float) -> CropLibrary:
    """Scale every force component by a common factor.

    Raises if any scaled component leaves (-1, 1), which would permit
    non-positive concentrations.
    """
    if not factor > 0:
        raise ValueError(f"scale factor must be positive, got {factor}")
    scaled = []
    for crop in library.crops():
        f = tuple(v * factor for v in crop.f)
        for channel, value in zip(CHANNELS, f):
            if not -1.0 < value < 1.0:
                raise ValueError(
                    f"scaling {crop.name!r} by {factor} drives f_{channel} to {value}, "
                    f"outside (-1, 1)"
                )
        scaled.append(CropForce(crop.name, f))
    return CropLibrary(scaled)


def apply_force(
    state: LatticeState, year: int, crop: CropForce, stiffness: StiffnessMap
) -> Array:
    """One crop season applied to the previous year's slice.

    Returns the pre-smoothing intermediate (nx, ny, 3); the stored state is
    not modified. The multiplier (1 + f * alpha) must stay positive in every
    cell or the update would destroy positivity.
    """
    if year < 1:
        raise ValueError(f"year must be >= 1, got {year}")
    if year >= state.years:
        raise ValueError(f"year {year} outside stored range [1, {state.years - 1}]")
    if stiffness.grid != state.grid:
        raise ValueError("stiffness map grid does not match state grid")
    prev = state.slice(year - 1)
    multipliers = 1.0 + np.asarray(crop.f)[None, None, :] * stiffness.alpha[:, :, None]
    if not np.all(multipliers > 0):
        worst = float(multipliers.min())
        raise ValueError(
            f"crop {crop.name!r} with the given stiffness yields a non-positive "
            f"multiplier (min {worst}); forces are too strong"
        )
    return prev * multipliers


def run_rotation(
    state: LatticeState,
    rotation: Rotation,
    library: CropLibrary,
    stiffness: StiffnessMap,
    kernel: KernelSpec,
) -> LatticeState:
    """Advance the state through a full rotation: force then smooth, yearly.

    Channels are updated independently within a year; years are sequential.
    Slice t=0 is never touched.
    """
    rotation.resolve(library)
    if state.years < rotation.n_years + 1:
        raise ValueError(
            f"state stores {state.years} slices but rotation needs {rotation.n_years + 1}"
        )
    for year in range(1, rotation.n_years + 1):
        crop = library[rotation.crop_for_year(year)]
        forced = apply_force(state, year, crop, stiffness)
        for c in range(len(CHANNELS)):
            state.values[:, :, year, c] = smooth(forced[:, :, c], kernel)
    return state
