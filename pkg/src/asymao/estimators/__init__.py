"""Estimation stages: blind PSF recovery, phase retrieval, multi-frame refinement."""

from .blind import (PatchStack, PsfEstimate, estimate_psf_blind, kernel_ncc,
                    kernel_project, patchify, reassemble)
from .diversity import diversity_objective, refine_phase_diversity
from .optimize import armijo_minimize
from .phase import (PhaseEstimate, magnitude_misfit, refine_phase_zernike,
                    register_centroid, remove_tilt_piston,
                    retrieve_phase_iterative)
from .support import SupportBasis

__all__ = [
    "PatchStack", "PsfEstimate", "PhaseEstimate", "SupportBasis",
    "armijo_minimize", "diversity_objective", "estimate_psf_blind",
    "kernel_ncc", "kernel_project", "magnitude_misfit", "patchify",
    "reassemble", "refine_phase_diversity", "refine_phase_zernike",
    "register_centroid", "remove_tilt_piston", "retrieve_phase_iterative",
]
