"""Shared value types for the Elfpie reconstruction pipeline.

Complex and real planes are plain ``numpy`` arrays (``complex128`` /
``float64``), row-major with rows along ``y`` and columns along ``x``.
Spectra use a centered layout: DC sits at index ``(h // 2, w // 2)``.

The compound types below are frozen dataclasses; array members are made
read-only on construction so instances can be shared between threads.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Optional, Sequence

import numpy as np

FORMAT_VERSION = 1

NOISE_KINDS = ("none", "gaussian", "snp", "poisson")
FIDELITY_MODES = ("amplitude", "intensity", "gamma", "log1p")
OMEGA_MODES = ("isotropic", "anisotropic")
OPTIMIZERS = ("elfpie", "adabelief", "nadam", "sgd")


class ValidationError(ValueError):
    """Raised when a value violates one or more domain invariants.

    ``violations`` holds one human-readable line per failed invariant.
    """

    def __init__(self, violations: Sequence[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


def _frozen(a, dtype) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def _is_finite(a: np.ndarray) -> bool:
    return bool(np.all(np.isfinite(a)))


def check_field(a: np.ndarray, name: str = "field") -> list[str]:
    """Invariants shared by every 2-D plane: non-empty and finite."""
    problems = []
    if a.ndim != 2 or a.shape[0] <= 0 or a.shape[1] <= 0:
        problems.append(f"{name}: expected a non-empty 2-D array, got shape {a.shape}")
    elif not _is_finite(a):
        problems.append(f"{name}: non-finite entries")
    return problems


@dataclass(frozen=True)
class SystemGeometry:
    """Optical and LED-panel parameters, SI units throughout.

    ``lr_size`` and ``hr_size`` are ``(rows, cols)`` in pixels.
    ``panel_offset`` is the lateral ``(x, y)`` shift of the panel center
    from the optical axis.
    """

    wavelength: float
    objective_na: float
    magnification: float
    camera_pixel: float
    led_pitch: float
    led_grid: tuple[int, int]
    panel_distance: float
    panel_offset: tuple[float, float] = (0.0, 0.0)
    lr_size: tuple[int, int] = (128, 128)
    hr_size: tuple[int, int] = (513, 513)

    def __post_init__(self):
        object.__setattr__(self, "led_grid", tuple(int(v) for v in self.led_grid))
        object.__setattr__(self, "panel_offset", tuple(float(v) for v in self.panel_offset))
        object.__setattr__(self, "lr_size", tuple(int(v) for v in self.lr_size))
        object.__setattr__(self, "hr_size", tuple(int(v) for v in self.hr_size))

    @property
    def freq_step(self) -> tuple[float, float]:
        """Spatial-frequency step of one LR spectral pixel, ``(dv, du)`` per (row, col)."""
        bh, bw = self.lr_size
        return (self.magnification / (bh * self.camera_pixel),
                self.magnification / (bw * self.camera_pixel))

    def led_positions(self) -> np.ndarray:
        """Nominal lateral LED positions ``(x, y)`` in meters, row-major over the grid.

        The center LED of the grid sits at ``panel_offset`` (on-axis by default).
        """
        rows, cols = self.led_grid
        iy, ix = np.meshgrid(np.arange(rows) - (rows - 1) / 2.0,
                             np.arange(cols) - (cols - 1) / 2.0, indexing="ij")
        x = ix.ravel() * self.led_pitch + self.panel_offset[0]
        y = iy.ravel() * self.led_pitch + self.panel_offset[1]
        return np.stack([x, y], axis=1)

    def check(self) -> list[str]:
        problems = []
        for name in ("wavelength", "magnification", "camera_pixel", "led_pitch", "panel_distance"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                problems.append(f"{name} must be positive, got {v}")
        if not (0 < self.objective_na < 1):
            problems.append(f"objective_na must lie in (0, 1), got {self.objective_na}")
        if min(self.led_grid) < 1:
            problems.append(f"led_grid must be at least 1x1, got {self.led_grid}")
        if min(self.lr_size) < 1:
            problems.append(f"lr_size must be positive, got {self.lr_size}")
        if self.hr_size[0] < self.lr_size[0] or self.hr_size[1] < self.lr_size[1]:
            problems.append(f"B < A violated: hr_size {self.hr_size} smaller than lr_size {self.lr_size}")
        return problems

    def to_dict(self) -> dict:
        return {
            "wavelength": self.wavelength,
            "objective_na": self.objective_na,
            "magnification": self.magnification,
            "camera_pixel": self.camera_pixel,
            "led_pitch": self.led_pitch,
            "led_grid": list(self.led_grid),
            "panel_distance": self.panel_distance,
            "panel_offset": list(self.panel_offset),
            "lr_size": list(self.lr_size),
            "hr_size": list(self.hr_size),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SystemGeometry":
        return cls(**{f.name: d[f.name] for f in dataclasses.fields(cls) if f.name in d})


@dataclass(frozen=True)
class LedEntry:
    """One LED inside an illumination group.

    ``spectral_offset`` is the integer ``(row, col)`` displacement of the
    LR spectral window from the HR spectrum center. ``direction`` holds the
    illumination direction sines ``(sin_y, sin_x)``.
    """

    led_index: int
    spectral_offset: tuple[int, int]
    illumination_na: float
    is_dark_field: bool
    direction: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "led_index", int(self.led_index))
        object.__setattr__(self, "spectral_offset", tuple(int(v) for v in self.spectral_offset))
        object.__setattr__(self, "illumination_na", float(self.illumination_na))
        object.__setattr__(self, "is_dark_field", bool(self.is_dark_field))
        object.__setattr__(self, "direction", tuple(float(v) for v in self.direction))

    def to_dict(self) -> dict:
        return {
            "led_index": self.led_index,
            "spectral_offset": list(self.spectral_offset),
            "illumination_na": self.illumination_na,
            "is_dark_field": self.is_dark_field,
            "direction": list(self.direction),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LedEntry":
        return cls(d["led_index"], tuple(d["spectral_offset"]), d["illumination_na"],
                   d["is_dark_field"], tuple(d.get("direction", (0.0, 0.0))))


@dataclass(frozen=True)
class IlluminationPlan:
    """``N`` exposure groups of ``M`` simultaneously lit LEDs each."""

    groups: tuple[tuple[LedEntry, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "groups", tuple(tuple(g) for g in self.groups))

    @classmethod
    def sequential(cls, entries: Iterable[LedEntry]) -> "IlluminationPlan":
        """One LED per exposure (``M = 1``)."""
        return cls(tuple((e,) for e in entries))

    @property
    def n_images(self) -> int:
        return len(self.groups)

    @property
    def entries(self) -> list[LedEntry]:
        return [e for g in self.groups for e in g]

    @property
    def max_group_size(self) -> int:
        return max((len(g) for g in self.groups), default=0)

    def check(self, objective_na: float, lr_size=None, hr_size=None) -> list[str]:
        problems = []
        if not self.groups:
            problems.append("illumination plan has no groups")
        seen: dict[int, int] = {}
        for n, group in enumerate(self.groups):
            if not group:
                problems.append(f"group {n} is empty")
            for e in group:
                if e.led_index in seen:
                    problems.append(f"LED {e.led_index} lit in groups {seen[e.led_index]} and {n}")
                seen[e.led_index] = n
                if e.is_dark_field != (e.illumination_na > objective_na):
                    problems.append(f"LED {e.led_index}: dark-field flag inconsistent with NA "
                                    f"{e.illumination_na:.4f} vs objective {objective_na:.4f}")
                if lr_size is not None and hr_size is not None:
                    if not window_in_bounds(e.spectral_offset, lr_size, hr_size):
                        problems.append(f"LED {e.led_index}: LED exceeds synthetic aperture "
                                        f"(offset {e.spectral_offset})")
        return problems

    def to_dict(self) -> dict:
        return {"groups": [[e.to_dict() for e in g] for g in self.groups]}

    @classmethod
    def from_dict(cls, d: dict) -> "IlluminationPlan":
        return cls(tuple(tuple(LedEntry.from_dict(e) for e in g) for g in d["groups"]))


def window_in_bounds(offset, lr_size, hr_size) -> bool:
    """True if the LR window centered at ``hr_center + offset`` fits in the HR grid."""
    for o, b, a in zip(offset, lr_size, hr_size):
        start = a // 2 + o - b // 2
        if start < 0 or start + b > a:
            return False
    return True


@dataclass(frozen=True)
class AcquisitionStack:
    """Measured LR intensity frames plus the nominal acquisition description.

    ``signed`` marks readings that carry additive zero-mean noise and may
    dip below zero; such stacks skip the positivity check (the
    reconstructor clamps before applying ``g``).
    """

    images: np.ndarray
    plan: IlluminationPlan
    geometry: SystemGeometry
    truth_amplitude: Optional[np.ndarray] = None
    truth_phase: Optional[np.ndarray] = None
    signed: bool = False

    def __post_init__(self):
        object.__setattr__(self, "images", _frozen(self.images, np.float64))
        if self.truth_amplitude is not None:
            object.__setattr__(self, "truth_amplitude", _frozen(self.truth_amplitude, np.float64))
        if self.truth_phase is not None:
            object.__setattr__(self, "truth_phase", _frozen(self.truth_phase, np.float64))

    @property
    def has_truth(self) -> bool:
        return self.truth_amplitude is not None and self.truth_phase is not None

    def truth_field(self) -> np.ndarray:
        if not self.has_truth:
            raise ValueError("stack carries no ground truth")
        return self.truth_amplitude * np.exp(1j * self.truth_phase)

    def with_images(self, images: np.ndarray) -> "AcquisitionStack":
        return dataclasses.replace(self, images=images)


@dataclass(frozen=True)
class VignettingSpec:
    enabled: bool = False
    radius: float = 64.0
    softness: float = 2.0
    shift_gain: float = 0.0

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class DegradationSpec:
    """Degradation agents applied by the simulator.

    ``noise_level`` is the Gaussian standard deviation or the salt-and-pepper
    density depending on ``noise_kind``; Poisson noise is controlled by
    ``photon_scale`` (photons per unit intensity).
    """

    noise_kind: str = "none"
    noise_level: float = 0.0
    photon_scale: float = 1.0
    uneven_strength: float = 0.0
    blur_half_waist: float = 15.0
    led_shift_radius: float = 0.0
    vignetting: VignettingSpec = field(default_factory=VignettingSpec)
    background: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.vignetting, dict):
            object.__setattr__(self, "vignetting", VignettingSpec(**self.vignetting))

    def check(self) -> list[str]:
        problems = []
        if self.noise_kind not in NOISE_KINDS:
            problems.append(f"unknown noise kind {self.noise_kind!r}")
        if self.noise_kind == "gaussian" and self.noise_level < 0:
            problems.append("gaussian std must be >= 0")
        if self.noise_kind == "snp" and not (0 <= self.noise_level <= 1):
            problems.append("snp density must lie in [0, 1]")
        if self.noise_kind == "poisson" and not self.photon_scale > 0:
            problems.append("poisson photon scale must be > 0")
        if not (0 <= self.uneven_strength <= 1):
            problems.append("uneven illumination strength c must lie in [0, 1]")
        if self.led_shift_radius < 0:
            problems.append("LED shift radius d must be >= 0")
        if self.blur_half_waist <= 0:
            problems.append("blur half-waist must be > 0")
        return problems

    @property
    def is_clean(self) -> bool:
        return (self.noise_kind == "none" or (self.noise_kind != "poisson" and self.noise_level == 0)) \
            and self.uneven_strength == 0 and self.led_shift_radius == 0 \
            and not self.vignetting.enabled and self.background == 0

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["vignetting"] = self.vignetting.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DegradationSpec":
        d = dict(d)
        if "vignetting" in d:
            d["vignetting"] = VignettingSpec(**d["vignetting"])
        return cls(**d)


@dataclass(frozen=True)
class ReconstructionConfig:
    """Hyperparameters of one Elfpie run.

    ``alpha``/``beta`` of ``None`` mean "derive from the data". ``step`` is
    the initial step size; the optimizer's adaptive-rate field starts at
    ``step**2``. ``None`` (or ``"auto"`` in JSON) picks ``1/sqrt(pixels)``
    of the HR grid for the spectrum and of the LR grid for the pupil, which
    is a unit step on an unnormalized DFT. ``optimizer`` selects the update
    rule for the spectrum (``"elfpie"`` is the modified AdaBelief; the rest
    are comparators).
    """

    fidelity_mode: str = "amplitude"
    gamma: float = 0.5
    omega_mode: str = "isotropic"
    alpha: Optional[float] = None
    beta: Optional[float] = None
    gamma1: float = 0.9
    gamma2: float = 0.999
    eta_opt: float = 1e-8
    eta_phase: float = 1e-6
    epsilon_omega: float = 1e-8
    iterations: int = 100
    step: Optional[float] = None
    optimizer: str = "elfpie"
    learn_pupil: bool = False
    pupil_step: Optional[float] = None
    pupil_smooth_size: int = 3
    pupil_smooth_sigma: float = 1.0
    pupil_bound: float = 2.0
    deterministic_reduction: bool = True
    threads: int = 1
    literal_intensity_w: bool = False

    def check(self) -> list[str]:
        problems = []
        if self.fidelity_mode not in FIDELITY_MODES:
            problems.append(f"unknown fidelity mode {self.fidelity_mode!r}")
        if self.fidelity_mode == "gamma" and not self.gamma > 0:
            problems.append("gamma must be > 0 in gamma mode")
        if self.omega_mode not in OMEGA_MODES:
            problems.append(f"unknown omega mode {self.omega_mode!r}")
        if self.optimizer not in OPTIMIZERS:
            problems.append(f"unknown optimizer {self.optimizer!r}")
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if v is not None and v < 0:
                problems.append(f"{name} must be >= 0 or auto")
        for name in ("gamma1", "gamma2"):
            if not 0 < getattr(self, name) < 1:
                problems.append(f"{name} must lie in (0, 1)")
        for name in ("eta_opt", "eta_phase", "epsilon_omega"):
            if not getattr(self, name) > 0:
                problems.append(f"{name} must be > 0")
        for name in ("step", "pupil_step"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                problems.append(f"{name} must be > 0 or auto")
        if self.iterations < 0:
            problems.append("iterations must be >= 0")
        if self.threads < 1:
            problems.append("threads must be >= 1")
        if self.pupil_smooth_size % 2 != 1:
            problems.append("pupil smoothing kernel size must be odd")
        return problems

    def validated(self) -> "ReconstructionConfig":
        problems = self.check()
        if problems:
            raise ValidationError(problems)
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ReconstructionConfig":
        d = dict(d)
        for name in ("alpha", "beta", "step", "pupil_step"):
            if d.get(name) == "auto":
                d[name] = None
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValidationError([f"unknown config key {k!r}" for k in sorted(unknown)])
        return cls(**d)


@dataclass(frozen=True)
class ObjectEstimate:
    """High-resolution spectrum; the object field is its unitary inverse DFT."""

    spectrum: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "spectrum", _frozen(self.spectrum, np.complex128))

    @property
    def field(self) -> np.ndarray:
        from .operators import idft2
        return idft2(self.spectrum)

    @property
    def amplitude(self) -> np.ndarray:
        return np.abs(self.field)

    @property
    def phase(self) -> np.ndarray:
        return np.angle(self.field)


@dataclass(frozen=True)
class PupilFunction:
    """Complex pupil on the LR spectral grid, zero outside its cutoff disc."""

    field: np.ndarray
    cutoff_radius: float
    support: np.ndarray
    bound: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "field", _frozen(self.field, np.complex128))
        object.__setattr__(self, "support", _frozen(self.support, bool))

    def check(self) -> list[str]:
        problems = check_field(self.field, "pupil")
        if np.any(self.field[~self.support] != 0):
            problems.append("pupil has nonzero entries outside its cutoff disc")
        if np.max(np.abs(self.field), initial=0.0) > self.bound:
            problems.append(f"pupil modulus exceeds bound {self.bound}")
        return problems


def check_stack(stack: AcquisitionStack) -> list[str]:
    problems = []
    imgs = stack.images
    if imgs.ndim != 3:
        problems.append(f"stack images must be (N, rows, cols), got shape {imgs.shape}")
        return problems
    if imgs.shape[1:] != tuple(stack.geometry.lr_size):
        problems.append(f"frame shape {imgs.shape[1:]} != lr_size {stack.geometry.lr_size}")
    if not _is_finite(imgs):
        problems.append("non-finite intensity")
    elif not stack.signed and np.any(imgs < 0):
        problems.append("negative intensity")
    if imgs.shape[0] != stack.plan.n_images:
        problems.append(f"N mismatch: {imgs.shape[0]} images vs {stack.plan.n_images} plan groups")
    for name in ("truth_amplitude", "truth_phase"):
        t = getattr(stack, name)
        if t is not None and t.shape != tuple(stack.geometry.hr_size):
            problems.append(f"{name} shape {t.shape} != hr_size {stack.geometry.hr_size}")
    return problems


def validate(geometry: SystemGeometry, plan: Optional[IlluminationPlan] = None,
             stack: Optional[AcquisitionStack] = None) -> None:
    """Check the joint invariants of a geometry, plan and stack.

    Raises :class:`ValidationError` naming every violated invariant.
    """
    problems = geometry.check()
    if plan is not None:
        problems += plan.check(geometry.objective_na, geometry.lr_size, geometry.hr_size)
    if stack is not None:
        problems += check_stack(stack)
    if problems:
        raise ValidationError(problems)


def full_geometry() -> SystemGeometry:
    """Full-scale simulation geometry: 15x15 LEDs at 536 nm, 90 mm away."""
    return SystemGeometry(
        wavelength=536e-9, objective_na=0.10, magnification=4.0, camera_pixel=3.65e-6,
        led_pitch=6e-3, led_grid=(15, 15), panel_distance=90e-3,
        lr_size=(128, 128), hr_size=(513, 513))


def desk_geometry() -> SystemGeometry:
    """Desk-scale variant: same optics, 64x64 sensor crop, 9x9 LEDs, 257x257 HR grid."""
    return SystemGeometry(
        wavelength=536e-9, objective_na=0.10, magnification=4.0, camera_pixel=3.65e-6,
        led_pitch=6e-3, led_grid=(9, 9), panel_distance=90e-3,
        lr_size=(64, 64), hr_size=(257, 257))


def to_jsonable(obj: Any) -> Any:
    if dataclasses.is_dataclass(obj) and hasattr(obj, "to_dict"):
        return obj.to_dict()
    raise TypeError(f"cannot serialize {type(obj).__name__}")
