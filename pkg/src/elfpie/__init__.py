"""Elfpie: error-laxity Fourier ptychographic reconstruction.

Gradient-feature data fidelity plus Hessian penalties on amplitude and
phase, minimized by a modified AdaBelief optimizer; with a degraded-
acquisition simulator, an FPIE baseline and a benchmark runner.
"""

from .model import (AcquisitionStack, DegradationSpec, IlluminationPlan, ObjectEstimate, PupilFunction,
                    ReconstructionConfig, SystemGeometry, ValidationError, VignettingSpec, desk_geometry,
                    full_geometry, validate)
from .optics import forward_ideal, multiplexed_plan, pupil_init, sequential_plan
from .solver import Reconstruction, ReconstructionError, reconstruct
from .baseline import fpie_momentum_reconstruct
from .degrade import noise_level_metric, simulate
from .metrics import lsnr, score_reconstruction

__version__ = "0.1.0"

__all__ = [
    "AcquisitionStack", "DegradationSpec", "IlluminationPlan", "ObjectEstimate", "PupilFunction",
    "ReconstructionConfig", "SystemGeometry", "ValidationError", "VignettingSpec", "desk_geometry",
    "full_geometry", "validate", "forward_ideal", "multiplexed_plan", "pupil_init", "sequential_plan",
    "Reconstruction", "ReconstructionError", "reconstruct", "fpie_momentum_reconstruct",
    "noise_level_metric", "simulate", "lsnr", "score_reconstruction",
]
