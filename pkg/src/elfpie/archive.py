"""On-disk dataset and reconstruction archives.

A dataset is a directory holding ``meta.json`` and ``stack.bin`` (raw
little-endian float64, row-major, image index slowest), plus optional
``truth_amp.bin`` / ``truth_phase.bin`` at the HR size. Reconstructions
are stored the same way: ``result.json`` next to ``spectrum.bin``
(little-endian complex128), ``amplitude.bin``, ``phase.bin``,
``pupil.bin`` and the loss trace ``trace.csv``.
"""

from __future__ import annotations

import csv
import json
import os
from pathlib import Path
from typing import Optional

import numpy as np

from .model import (FORMAT_VERSION, AcquisitionStack, DegradationSpec, IlluminationPlan, ReconstructionConfig,
                    SystemGeometry, ValidationError, validate)

F64 = np.dtype("<f8")
C128 = np.dtype("<c16")
TRACE_HEADER = ["iter", "fidelity", "amp_hessian", "phase_hessian", "total"]


class ArchiveError(ValueError):
    """Malformed, truncated or incompatible archive."""


def _write_raw(path: Path, a: np.ndarray, dtype) -> None:
    np.ascontiguousarray(a, dtype=dtype).tofile(path)


def _read_raw(path: Path, shape, dtype) -> np.ndarray:
    if not path.exists():
        raise FileNotFoundError(2, "missing file", str(path))
    expected = int(np.prod(shape)) * dtype.itemsize
    actual = path.stat().st_size
    if actual != expected:
        raise ArchiveError(f"{path.name}: expected {expected} bytes for shape {tuple(shape)}, found {actual}")
    return np.fromfile(path, dtype=dtype).reshape(shape).astype(dtype.newbyteorder("="))


def _read_json(path: Path) -> dict:
    if not path.exists():
        raise FileNotFoundError(2, "missing file", str(path))
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ArchiveError(f"{path.name}: invalid JSON ({exc})") from exc


def _check_version(meta: dict, name: str) -> None:
    v = meta.get("format_version")
    if v != FORMAT_VERSION:
        raise ArchiveError(f"{name}: format_version {v!r} not supported (expected {FORMAT_VERSION})")


def quantize(images: np.ndarray, bits: int = 16) -> np.ndarray:
    """Round frames to ``2**bits - 1`` levels over ``[0, max]`` (camera-style export)."""
    images = np.maximum(np.asarray(images, dtype=np.float64), 0.0)
    top = images.max()
    if top <= 0:
        return images
    levels = 2 ** bits - 1
    return np.round(images / top * levels) * (top / levels)


def save_dataset(stack: AcquisitionStack, path, degradation: Optional[DegradationSpec] = None,
                 seed: Optional[int] = None) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    meta = {
        "format_version": FORMAT_VERSION,
        "geometry": stack.geometry.to_dict(),
        "plan": stack.plan.to_dict(),
        "n_images": int(stack.images.shape[0]),
        "signed": bool(stack.signed),
        "has_truth": stack.has_truth,
        "degradation": degradation.to_dict() if degradation is not None else None,
        "seed": seed,
    }
    with open(path / "meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
    _write_raw(path / "stack.bin", stack.images, F64)
    if stack.has_truth:
        _write_raw(path / "truth_amp.bin", stack.truth_amplitude, F64)
        _write_raw(path / "truth_phase.bin", stack.truth_phase, F64)
    return path


def load_meta(path) -> dict:
    meta = _read_json(Path(path) / "meta.json")
    _check_version(meta, "meta.json")
    return meta


def load_dataset(path) -> AcquisitionStack:
    """Load and validate a dataset directory."""
    path = Path(path)
    meta = load_meta(path)
    try:
        geometry = SystemGeometry.from_dict(meta["geometry"])
        plan = IlluminationPlan.from_dict(meta["plan"])
        n = int(meta["n_images"])
    except (KeyError, TypeError) as exc:
        raise ArchiveError(f"meta.json: missing or malformed field {exc}") from exc
    problems = geometry.check()
    if problems:
        raise ValidationError(problems)
    bh, bw = geometry.lr_size
    images = _read_raw(path / "stack.bin", (n, bh, bw), F64)
    amp = phase = None
    if meta.get("has_truth"):
        amp = _read_raw(path / "truth_amp.bin", geometry.hr_size, F64)
        phase = _read_raw(path / "truth_phase.bin", geometry.hr_size, F64)
    stack = AcquisitionStack(images, plan, geometry, amp, phase, signed=bool(meta.get("signed", False)))
    validate(geometry, plan, stack)
    return stack


def load_degradation(path) -> Optional[DegradationSpec]:
    d = load_meta(path).get("degradation")
    return DegradationSpec.from_dict(d) if d else None


def write_trace(trace, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_HEADER)
        for r in trace:
            w.writerow([r.iteration] + [repr(float(v)) for v in (r.fidelity, r.amp_hessian, r.phase_hessian,
                                                                 r.total)])


def read_trace(path) -> np.ndarray:
    with open(path) as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != TRACE_HEADER:
        raise ArchiveError(f"{path}: unexpected trace header")
    return np.array([[float(v) for v in r] for r in rows[1:]])


def save_reconstruction(rec, config: ReconstructionConfig, path) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    spec = rec.estimate.spectrum
    meta = {
        "format_version": FORMAT_VERSION,
        "hr_size": list(spec.shape),
        "pupil_size": list(rec.pupil.field.shape),
        "pupil_cutoff": float(rec.pupil.cutoff_radius),
        "alpha": rec.alpha,
        "beta": rec.beta,
        "config": config.to_dict(),
    }
    with open(path / "result.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
    _write_raw(path / "spectrum.bin", spec, C128)
    _write_raw(path / "amplitude.bin", rec.estimate.amplitude, F64)
    _write_raw(path / "phase.bin", rec.estimate.phase, F64)
    _write_raw(path / "pupil.bin", rec.pupil.field, C128)
    write_trace(rec.trace, path / "trace.csv")
    return path


def load_reconstruction(path) -> dict:
    """Arrays of a reconstruction directory: ``spectrum``, ``amplitude``, ``phase``, ``pupil`` and ``meta``."""
    path = Path(path)
    meta = _read_json(path / "result.json")
    _check_version(meta, "result.json")
    hr = tuple(meta["hr_size"])
    return {
        "meta": meta,
        "spectrum": _read_raw(path / "spectrum.bin", hr, C128),
        "amplitude": _read_raw(path / "amplitude.bin", hr, F64),
        "phase": _read_raw(path / "phase.bin", hr, F64),
        "pupil": _read_raw(path / "pupil.bin", tuple(meta["pupil_size"]), C128),
    }


def load_json(path) -> dict:
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    return _read_json(Path(path))
