"""8-bit grayscale panel export and report figures."""

from __future__ import annotations

from typing import Sequence

import numpy as np
from PIL import Image

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

TARGETS = ("amplitude", "phase", "log_spectrum", "raw_frame")
# strip version/date metadata so re-rendering is byte-identical
_PNG_META = {"Software": None}


def log_spectrum(spectrum: np.ndarray) -> np.ndarray:
    return np.log10(np.abs(spectrum) + 1.0)


def to_uint8(plane: np.ndarray) -> np.ndarray:
    """Min-max normalize to 0..255; a constant plane maps to mid-gray (128)."""
    plane = np.asarray(plane, dtype=np.float64)
    if plane.ndim != 2:
        raise ValueError(f"expected a 2-D plane, got shape {plane.shape}")
    if not np.all(np.isfinite(plane)):
        raise ValueError("plane has non-finite values")
    lo, hi = plane.min(), plane.max()
    if hi == lo:
        return np.full(plane.shape, 128, dtype=np.uint8)
    return np.round((plane - lo) / (hi - lo) * 255.0).astype(np.uint8)


def save_gray(plane: np.ndarray, path) -> None:
    Image.fromarray(to_uint8(plane)).save(path, format="PNG")


def select_plane(target: str, *, amplitude=None, phase=None, spectrum=None, frames=None,
                 frame: int = 0) -> np.ndarray:
    if target == "amplitude" and amplitude is not None:
        return amplitude
    if target == "phase" and phase is not None:
        return phase
    if target == "log_spectrum" and spectrum is not None:
        return log_spectrum(spectrum)
    if target == "raw_frame" and frames is not None:
        if not 0 <= frame < len(frames):
            raise IndexError(f"frame {frame} out of range 0..{len(frames) - 1}")
        return frames[frame]
    if target not in TARGETS:
        raise ValueError(f"unknown render target {target!r}")
    raise ValueError(f"target {target!r} is not available in this input")


def plot_loss_trace(trace, path, title: str = "") -> None:
    it = [r.iteration for r in trace]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for name in ("fidelity", "amp_hessian", "phase_hessian", "total"):
        vals = np.array([getattr(r, name) for r in trace])
        if np.any(vals > 0):
            ax.semilogy(it, np.maximum(vals, 1e-300), label=name)
    ax.set_xlabel("iteration")
    ax.set_ylabel("loss")
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata=_PNG_META)
    plt.close(fig)


def plot_benchmark(cells: Sequence, path) -> None:
    """Grouped bars of mean LSNR per protocol cell, one bar per method."""
    labels, methods = [], []
    for c in cells:
        key = f"{c.noise} {c.level:g}\nd={c.d * 1e3:g}mm c={c.c:g}"
        if key not in labels:
            labels.append(key)
        if c.method not in methods:
            methods.append(c.method)
    vals = np.full((len(methods), len(labels)), np.nan)
    for c in cells:
        key = f"{c.noise} {c.level:g}\nd={c.d * 1e3:g}mm c={c.c:g}"
        vals[methods.index(c.method), labels.index(key)] = c.mean_lsnr
    x = np.arange(len(labels))
    width = 0.8 / max(len(methods), 1)
    fig, ax = plt.subplots(figsize=(max(4.0, 1.4 * len(labels) + 2), 3.8))
    for i, m in enumerate(methods):
        ax.bar(x + (i - (len(methods) - 1) / 2) * width, np.nan_to_num(vals[i]), width, label=m)
    ax.axhline(0.0, color="k", lw=0.5)
    ax.set_xticks(x)
    ax.set_xticklabels(labels, fontsize=7)
    ax.set_ylabel("mean LSNR (dB)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata=_PNG_META)
    plt.close(fig)
