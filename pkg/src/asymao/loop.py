"""Closed-loop adaptive optics: measure, estimate, correct, repeat.

Each step forms one measurement at the current SLM state, estimates the
residual phase, and subtracts it (scaled by the loop gain) from the SLM. A
final verification measurement after the last step brings the total to
loops + 1 frames; the trace carries one record per frame.

The production estimator chains blind kernel estimation with phase retrieval
on the first frame, then switches to multi-frame phase diversity once two or
more frames exist: the known SLM offsets between frames remove the blind
stage's kernel ambiguities. The first correction is applied with a reduced
gain because a single-frame estimate carries errors comparable to small
residuals; it mainly serves as the diversity probe for the next step.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .aperture import Aperture
from .estimators.blind import estimate_psf_blind
from .estimators.diversity import refine_phase_diversity
from .estimators.phase import (refine_phase_zernike, remove_tilt_piston,
                               retrieve_phase_iterative)
from .estimators.support import SupportBasis
from .fourier import circular_convolve
from .metrics import psnr, ssim, strehl_ratio
from .optics import (Measurement, Psf, SceneImage, corrected_psf,
                     image_measurement, measurement_kernel, psf_from_pupil,
                     pupil_function)
from .zernike import build_basis


@dataclass(frozen=True)
class SlmState:
    """Phase pattern currently displayed, with its update history."""

    phase: np.ndarray
    quantization_levels: int = 0
    history: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "phase",
                           np.asarray(self.phase, dtype=float))

    def apply(self, delta: np.ndarray) -> "SlmState":
        """Add an update; with quantization on, snap to the 2pi/levels lattice."""
        new = self.phase + delta
        if self.quantization_levels > 0:
            step = 2.0 * np.pi / self.quantization_levels
            new = np.round(new / step) * step
        return replace(self, phase=new, history=self.history + (delta,))


@dataclass(frozen=True)
class LoopConfig:
    """Loop schedule, estimator selection, and solver knobs."""

    loops: int = 3
    measurements_budget: int = 4
    noise_sigma: float = 0.0
    estimator: str = "blind"          # oracle | geometric | blind
    gain: float = 1.0
    first_gain: float = 0.5
    kernel_size: int = 63
    pad_factor: int = 2
    quantization_levels: int = 0
    early_stop_rms: float = 0.0       # 0 disables the Marechal-based stop
    disk_radius_fraction: float = 0.9
    max_radial_order: int = 6
    support_tau: float = 0.03
    pr_starts: int = 5
    diversity_iters: int = 60

    def __post_init__(self):
        if self.loops < 0:
            raise ValueError("loops must be >= 0")
        if self.measurements_budget != self.loops + 1:
            raise ValueError("measurements_budget must equal loops + 1")
        if not 0.0 < self.gain <= 1.0 or not 0.0 < self.first_gain <= 1.0:
            raise ValueError("gains must lie in (0, 1]")


@dataclass
class LoopTrace:
    """One record per measurement; arrays kept separately for image dumps."""

    records: list = field(default_factory=list)
    artifacts: dict = field(default_factory=dict)
    measurement_count: int = 0

    def to_jsonl(self) -> str:
        lines = [json.dumps(rec, sort_keys=True) for rec in self.records]
        return "\n".join(lines) + "\n"


class OracleEstimator:
    """Returns the true residual phase; simulation-only upper bound."""

    def __init__(self, phi_o: np.ndarray):
        self.phi_o = np.asarray(phi_o, dtype=float)

    def estimate_residual(self, measurement, slm_phase, iteration, seed):
        return self.phi_o + slm_phase, {"estimator": "oracle"}


class GeometricEstimator:
    """Returns a fixed fraction of the true residual (convergence probe)."""

    def __init__(self, phi_o: np.ndarray, factor: float = 0.5):
        self.phi_o = np.asarray(phi_o, dtype=float)
        self.factor = factor

    def estimate_residual(self, measurement, slm_phase, iteration, seed):
        return self.factor * (self.phi_o + slm_phase), {"estimator": "geometric"}


class BlindPipelineEstimator:
    """Blind kernel -> phase retrieval on frame one; phase diversity after.

    Accumulates (frame, slm) pairs across calls; a fresh instance per run
    keeps runs independent and deterministic.
    """

    def __init__(self, aperture: Aperture, config: LoopConfig,
                 support_basis: SupportBasis | None = None):
        self.aperture = aperture
        self.config = config
        self.basis = (support_basis.basis if support_basis is not None
                      else build_basis(aperture.n,
                                       config.disk_radius_fraction,
                                       config.max_radial_order))
        self.sb = (support_basis if support_basis is not None
                   else SupportBasis(self.basis, aperture.support,
                                     config.support_tau))
        self.frames: list = []
        self.slm_phases: list = []
        self.a_prev: np.ndarray | None = None
        self.kernels: list = []
        self.residual_phases: list = []

    def _single_frame(self, measurement, slm_phase, iteration, seed):
        cfg = self.config
        kernel = estimate_psf_blind(measurement, cfg.kernel_size)
        self.kernels.append(kernel.psf.kernel.copy())
        pr = retrieve_phase_iterative(kernel.psf, self.aperture, self.basis,
                                      n_starts=cfg.pr_starts,
                                      seed=seed * 31 + iteration)
        a_res = self.sb.fit(pr.phase)
        diag = {"kernel_fidelity": kernel.fidelity,
                "kernel_converged": kernel.converged,
                "pr_residual": pr.residual,
                "pr_converged": pr.converged}
        return a_res + self.sb.fit(slm_phase), diag

    def estimate_residual(self, measurement, slm_phase, iteration, seed):
        a_abs, diag = self._single_frame(measurement, slm_phase, iteration,
                                         seed)
        self.frames.append(np.asarray(
            getattr(measurement, "pixels", measurement), dtype=float))
        self.slm_phases.append(np.asarray(slm_phase, dtype=float).copy())
        if len(self.frames) >= 2:
            inits = [a_abs] if self.a_prev is None else [a_abs, self.a_prev]
            a_abs, objective = refine_phase_diversity(
                self.sb, self.aperture, self.frames, self.slm_phases, inits,
                self.config.pad_factor, self.config.diversity_iters)
            diag["diversity_objective"] = objective
        self.a_prev = a_abs.copy()
        diag["estimator"] = "blind"
        # estimated absolute aberration, re-expressed as the current residual
        phi_res = self.sb.phase(a_abs) + slm_phase
        self.residual_phases.append(phi_res.copy())
        return phi_res, diag


def make_estimator(name: str, phi_o: np.ndarray, aperture: Aperture,
                   config: LoopConfig,
                   support_basis: SupportBasis | None = None):
    if name == "oracle":
        return OracleEstimator(phi_o)
    if name == "geometric":
        return GeometricEstimator(phi_o)
    if name == "blind":
        return BlindPipelineEstimator(aperture, config, support_basis)
    raise ValueError(f"unknown estimator {name!r}")


def _reference_image(scene: SceneImage, aperture: Aperture,
                     pad_factor: int) -> np.ndarray:
    """Diffraction-limited view of the scene; not a counted measurement."""
    bare = psf_from_pupil(
        pupil_function(aperture, np.zeros((aperture.n, aperture.n))),
        pad_factor)
    kernel = measurement_kernel(bare, scene.pixels.shape)
    return circular_convolve(scene.pixels, kernel)


def ao_step(scene: SceneImage, phi_o: np.ndarray, slm: SlmState,
            aperture: Aperture, estimator, noise_sigma: float = 0.0,
            seed: int = 0, iteration: int = 0, gain: float = 1.0,
            pad_factor: int = 2):
    """One loop step: measure at the current state, estimate, correct.

    Returns (new_slm, record, measurement). The record reflects the entry
    state; estimator failures surface as flags, never exceptions.
    """
    psf_now = corrected_psf(aperture, phi_o, slm.phase, pad_factor)
    measurement = image_measurement(scene, psf_now, noise_sigma,
                                    seed=seed * 1009 + iteration)
    phi_hat, diag = estimator.estimate_residual(measurement, slm.phase,
                                                iteration, seed)
    new_slm = slm.apply(-gain * np.asarray(phi_hat, dtype=float))
    record = {"iteration": iteration,
              "strehl": strehl_ratio(psf_now, aperture),
              "gain": gain,
              "estimated_residual_rms": float(np.sqrt(np.mean(
                  phi_hat[aperture.support] ** 2)))}
    record.update(diag)
    return new_slm, record, measurement


def run_closed_loop(scene: SceneImage, phi_o: np.ndarray, aperture: Aperture,
                    config: LoopConfig, seed: int = 0,
                    support_basis: SupportBasis | None = None) -> LoopTrace:
    """Run the configured number of steps from a zero SLM state.

    The trace gains one record per measurement: `loops` entry-state records
    plus the final verification frame, each with ground-truth Strehl and
    PSNR/SSIM against the diffraction-limited view.
    """
    phi_o = np.asarray(phi_o, dtype=float)
    estimator = make_estimator(config.estimator, phi_o, aperture, config,
                               support_basis)
    reference = _reference_image(scene, aperture, config.pad_factor)
    trace = LoopTrace()
    slm = SlmState(np.zeros_like(phi_o),
                   quantization_levels=config.quantization_levels)
    slm_phases, measurements = [slm.phase.copy()], []

    measured_rms = None
    for k in range(config.loops):
        gain = config.first_gain if k == 0 else config.gain
        slm_new, record, measurement = ao_step(
            scene, phi_o, slm, aperture, estimator, config.noise_sigma,
            seed, iteration=k, gain=gain, pad_factor=config.pad_factor)
        trace.measurement_count += 1
        record["psnr"] = psnr(measurement.pixels, reference)
        record["ssim"] = ssim(measurement.pixels, reference)
        trace.records.append(record)
        measurements.append(measurement.pixels)
        slm = slm_new
        slm_phases.append(slm.phase.copy())
        measured_rms = record["estimated_residual_rms"]
        if config.early_stop_rms > 0 and measured_rms < config.early_stop_rms:
            break

    # final verification frame at the corrected state
    psf_final = corrected_psf(aperture, phi_o, slm.phase, config.pad_factor)
    final = image_measurement(scene, psf_final, config.noise_sigma,
                              seed=seed * 1009 + config.loops)
    trace.measurement_count += 1
    trace.records.append({
        "iteration": len(trace.records),
        "strehl": strehl_ratio(psf_final, aperture),
        "psnr": psnr(final.pixels, reference),
        "ssim": ssim(final.pixels, reference),
        "estimated_residual_rms": measured_rms,
    })
    measurements.append(final.pixels)
    trace.artifacts = {"slm_phases": slm_phases,
                       "measurements": measurements,
                       "reference": reference,
                       "final_slm": slm}
    if hasattr(estimator, "kernels"):
        trace.artifacts["kernel_estimates"] = list(estimator.kernels)
        trace.artifacts["estimated_residuals"] = list(
            estimator.residual_phases)
    return trace


def guidestar_mode_step(psf_measured: Psf, slm: SlmState, aperture: Aperture,
                        basis=None, n_starts: int = 8,
                        seed: int = 0) -> SlmState:
    """Correction step from a directly measured PSF: no blind stage.

    Retrieves the residual phase from the PSF, polishes it by coefficient
    descent (multi-start retrieval alone can stagnate on even-parity
    aberrations), and subtracts it from the SLM, honoring the state's
    quantization setting.
    """
    estimate = retrieve_phase_iterative(psf_measured, aperture, basis,
                                        n_starts=n_starts, seed=seed)
    refined = refine_phase_zernike(psf_measured, aperture, estimate.coeffs,
                                   basis)
    return slm.apply(-refined.phase)
