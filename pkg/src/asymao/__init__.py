"""Guidestar-free closed-loop adaptive optics.

Simulates aberrated imaging through arbitrary apertures, estimates the PSF
blindly from natural-scene measurements, retrieves the pupil phase from it
(uniquely, when the aperture is asymmetric), and drives a closed correction
loop. See the README for the command-line interface.
"""

from .aperture import (Aperture, checkerboard_encode, is_point_symmetric,
                       make_aperture, zero_order_leakage)
from .config import RunConfig, dump_config, echo_config, load_config
from .fourier import (cfft2, check_grid_side, cifft2, center_flip,
                      circular_convolve, crop_center, embed_center,
                      subsample_center)
from .gridio import (GridFormatError, read_float_grid, read_gray8,
                     read_scene_image, write_float_grid, write_gray8,
                     write_phase_png)
from .loop import (LoopConfig, LoopTrace, SlmState, ao_step,
                   guidestar_mode_step, make_estimator, run_closed_loop)
from .metrics import (MtfProfile, disk_mtf_analytic, gradient_phase_error,
                      mtf, psnr, ssim, strehl_ratio)
from .optics import (ComplexField, Measurement, Psf, SceneImage,
                     conjugate_flip, corrected_psf, image_measurement,
                     measurement_kernel, psf_from_pupil, pupil_function)
from .scenes import synthetic_scene
from .zernike import (ZernikeBasis, ZernikeCoeffs, build_basis, fit_coeffs,
                      phase_from_coeffs, phase_gradient, sample_coeffs,
                      zernike_indices)
from .estimators import (PhaseEstimate, PsfEstimate, SupportBasis,
                         estimate_psf_blind, kernel_ncc,
                         refine_phase_diversity, refine_phase_zernike,
                         remove_tilt_piston, retrieve_phase_iterative)

__version__ = "0.1.0"

__all__ = [
    "Aperture", "ComplexField", "GridFormatError", "LoopConfig", "LoopTrace",
    "Measurement", "MtfProfile", "PhaseEstimate", "Psf", "PsfEstimate",
    "RunConfig", "SceneImage", "SlmState", "SupportBasis", "ZernikeBasis",
    "ZernikeCoeffs", "ao_step", "build_basis", "center_flip", "cfft2",
    "check_grid_side", "checkerboard_encode", "cifft2", "circular_convolve",
    "conjugate_flip", "corrected_psf", "crop_center", "disk_mtf_analytic",
    "dump_config", "echo_config", "embed_center", "estimate_psf_blind",
    "fit_coeffs", "gradient_phase_error", "guidestar_mode_step",
    "image_measurement", "is_point_symmetric", "kernel_ncc", "load_config",
    "make_aperture", "make_estimator", "measurement_kernel", "mtf", "psnr",
    "phase_from_coeffs", "phase_gradient", "psf_from_pupil",
    "pupil_function", "read_float_grid", "read_gray8", "read_scene_image",
    "refine_phase_diversity", "refine_phase_zernike", "remove_tilt_piston",
    "retrieve_phase_iterative", "run_closed_loop", "sample_coeffs", "ssim",
    "strehl_ratio", "subsample_center", "synthetic_scene",
    "write_float_grid", "write_gray8", "write_phase_png", "zernike_indices",
    "zero_order_leakage",
]
