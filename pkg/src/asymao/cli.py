"""Command-line front end.

Subcommands cover the main workflows: the aperture-asymmetry demonstration,
closed-loop correction runs, single-shot phase retrieval and blind PSF
estimation, image metrics, and seed-fanned batches. Every command echoes its
fully resolved configuration into the output directory so artifacts are
self-describing.

Exit codes: 0 success, 1 bad arguments or configuration, 2 numerical
non-convergence (a requested estimate or check failed), 3 I/O failure.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .aperture import make_aperture
from .config import RunConfig, load_config, echo_config
from .fourier import center_flip, embed_center
from .gridio import (GridFormatError, read_float_grid, read_scene_image,
                     write_float_grid, write_gray8, write_phase_png)
from .loop import LoopConfig, run_closed_loop
from .metrics import mtf, psnr, ssim, strehl_ratio
from .optics import Psf, SceneImage, conjugate_flip, psf_from_pupil, \
    pupil_function
from .estimators import estimate_psf_blind, refine_phase_zernike, \
    remove_tilt_piston, retrieve_phase_iterative
from .scenes import synthetic_scene
from .zernike import build_basis, phase_from_coeffs, sample_coeffs

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NO_CONVERGENCE = 2
EXIT_IO = 3


def _outdir(cfg: RunConfig, sub: str) -> Path:
    out = cfg.resolved_output_dir() / sub
    out.mkdir(parents=True, exist_ok=True)
    return out


def _loop_config(cfg: RunConfig, loops: int | None = None) -> LoopConfig:
    n_loops = cfg.loops if loops is None else loops
    return LoopConfig(
        loops=n_loops,
        measurements_budget=n_loops + 1,
        noise_sigma=cfg.noise_sigma,
        estimator=cfg.estimator,
        gain=cfg.gain,
        first_gain=cfg.first_gain,
        kernel_size=cfg.kernel_size,
        pad_factor=cfg.pad_factor,
        quantization_levels=cfg.quantization_levels,
        early_stop_rms=cfg.early_stop_rms,
        disk_radius_fraction=cfg.disk_radius_fraction,
        max_radial_order=cfg.max_radial_order,
        support_tau=cfg.support_tau,
        pr_starts=cfg.pr_starts,
        diversity_iters=cfg.diversity_iters,
    )


def sample_aberration(cfg: RunConfig, aperture, seed: int) -> np.ndarray:
    """Random order-limited aberration, tilt/piston-free, with the target
    RMS taken over the aperture support."""
    basis = build_basis(cfg.grid_n, cfg.disk_radius_fraction,
                        cfg.max_radial_order)
    coeffs = sample_coeffs(seed, 1.0, basis)
    phi = remove_tilt_piston(phase_from_coeffs(coeffs, basis),
                             aperture.support)
    scale = np.sqrt(np.mean(phi[aperture.support] ** 2))
    if scale > 0 and cfg.rms_target > 0:
        phi = phi * (cfg.rms_target / scale)
    return phi


def _parity_scaled_phase(cfg: RunConfig, basis, tilt_only: bool) -> np.ndarray:
    """Demo phase: rescaled so even/odd parity parts hold 0.6/0.8 of the
    target RMS (total == rms_target), or a pure tilt when requested."""
    if tilt_only:
        values = np.zeros(basis.count)
        for i, (order, _) in enumerate(basis.indices):
            if order == 1:
                values[i] = cfg.rms_target / np.sqrt(2.0)
        return phase_from_coeffs(values, basis)
    phi = phase_from_coeffs(sample_coeffs(cfg.seed, cfg.rms_target, basis),
                            basis)
    # only the spatially even part changes sign under a conjugate flip, so
    # it must carry enough weight for the PSFs to be distinguishable
    even = 0.5 * (phi + center_flip(phi))
    odd = 0.5 * (phi - center_flip(phi))
    mask = basis.mask
    e_rms = np.sqrt(np.mean(even[mask] ** 2))
    o_rms = np.sqrt(np.mean(odd[mask] ** 2))
    if e_rms > 0:
        even *= 0.6 * cfg.rms_target / e_rms
    if o_rms > 0:
        odd *= 0.8 * cfg.rms_target / o_rms
    return even + odd


def cmd_demo_ambiguity(cfg: RunConfig, args) -> int:
    out = _outdir(cfg, "demo_ambiguity")
    echo_config(cfg, out)
    basis = build_basis(cfg.grid_n, cfg.disk_radius_fraction,
                        cfg.max_radial_order)
    phi = _parity_scaled_phase(cfg, basis, args.tilt_only)
    flipped = conjugate_flip(phi)
    mask = basis.mask
    spatial_flip = center_flip(phi)
    even_rms = float(np.sqrt(np.mean(
        (0.5 * (phi + spatial_flip))[mask] ** 2)))
    odd_rms = float(np.sqrt(np.mean(
        (0.5 * (phi - spatial_flip))[mask] ** 2)))
    degenerate = even_rms < 0.05

    write_phase_png(out / "phase.png", phi)
    write_phase_png(out / "phase_flipped.png", flipped)
    distances = {}
    for shape in ("disk", "rectangle", "triangle"):
        ap = make_aperture(shape, cfg.grid_n, cfg.aperture_size_fraction)
        p1 = psf_from_pupil(pupil_function(ap, phi), cfg.pad_factor)
        p2 = psf_from_pupil(pupil_function(ap, flipped), cfg.pad_factor)
        d = float(np.linalg.norm(p1.kernel - p2.kernel)
                  / np.linalg.norm(p1.kernel))
        distances[shape] = d
        write_gray8(out / f"psf_{shape}.png", p1.kernel ** 0.25)
        write_gray8(out / f"psf_{shape}_flipped.png", p2.kernel ** 0.25)

    symmetric_ok = distances["disk"] <= 1e-9 and \
        distances["rectangle"] <= 1e-9
    asymmetric_ok = distances["triangle"] >= 1e-2
    report = {"distances": distances, "even_rms": even_rms,
              "odd_rms": odd_rms, "odd_parity_degenerate": degenerate,
              "symmetric_indistinguishable": symmetric_ok,
              "asymmetric_distinguishable": asymmetric_ok}
    (out / "report.json").write_text(json.dumps(report, sort_keys=True,
                                                indent=2) + "\n")
    print(json.dumps(report, sort_keys=True, indent=2))
    if degenerate:
        # a pure-tilt phase equals its conjugate flip; nothing to distinguish
        return EXIT_OK if args.tilt_only else EXIT_NO_CONVERGENCE
    return EXIT_OK if symmetric_ok and asymmetric_ok else EXIT_NO_CONVERGENCE


def _write_loop_artifacts(out: Path, trace, cfg: RunConfig) -> None:
    (out / "trace.jsonl").write_text(trace.to_jsonl())
    fieldnames = ["iteration", "strehl", "psnr", "ssim", "gain",
                  "estimated_residual_rms"]
    with open(out / "metrics.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames,
                                extrasaction="ignore")
        writer.writeheader()
        for record in trace.records:
            writer.writerow({k: record.get(k, "") for k in fieldnames})
    art = trace.artifacts
    write_gray8(out / "reference.png", art["reference"])
    for k, pixels in enumerate(art["measurements"]):
        write_gray8(out / f"measurement_{k:02d}.png", pixels)
    for k, phase in enumerate(art["slm_phases"]):
        write_phase_png(out / f"slm_phase_{k:02d}.png", phase)
    for k, kernel in enumerate(art.get("kernel_estimates", [])):
        write_float_grid(out / f"kernel_estimate_{k:02d}.grid", kernel)
        write_gray8(out / f"kernel_estimate_{k:02d}.png", kernel ** 0.25)
    for k, phase in enumerate(art.get("estimated_residuals", [])):
        write_phase_png(out / f"estimated_residual_{k:02d}.png", phase)
    write_float_grid(out / "final_slm_phase.grid", art["final_slm"].phase)


def _run_loop_once(cfg: RunConfig, out: Path,
                   scene_path: str | None) -> dict:
    echo_config(cfg, out)
    if scene_path:
        pixels = np.asarray(read_scene_image(scene_path), dtype=float)
        if pixels.shape != (cfg.grid_n, cfg.grid_n):
            raise ValueError(f"scene is {pixels.shape}, config wants "
                             f"{cfg.grid_n}x{cfg.grid_n}")
        scene = SceneImage(pixels)
    else:
        scene = synthetic_scene(cfg.grid_n, cfg.scene_seed)
    aperture = make_aperture(cfg.aperture_shape, cfg.grid_n,
                             cfg.aperture_size_fraction)
    phi_o = sample_aberration(cfg, aperture, cfg.seed)
    trace = run_closed_loop(scene, phi_o, aperture, _loop_config(cfg),
                            seed=cfg.seed)
    _write_loop_artifacts(out, trace, cfg)
    return trace.records[-1]


def cmd_run_loop(cfg: RunConfig, args) -> int:
    out = _outdir(cfg, "run_loop")
    final = _run_loop_once(cfg, out, args.scene)
    print(f"final strehl {final['strehl']:.4f} "
          f"psnr {final['psnr']:.2f} ssim {final['ssim']:.4f}")
    return EXIT_OK


def _load_psf(path, cfg: RunConfig) -> Psf:
    kernel = np.asarray(read_scene_image(path), dtype=float)
    if kernel.ndim != 2 or kernel.shape[0] != kernel.shape[1]:
        raise ValueError(f"PSF must be square, got {kernel.shape}")
    side = kernel.shape[0]
    if side == cfg.pad_factor * cfg.grid_n:
        return Psf(kernel, pad_factor=cfg.pad_factor)
    if side < cfg.grid_n:
        kernel = embed_center(kernel, cfg.grid_n)
    elif side != cfg.grid_n:
        raise ValueError(f"PSF side {side} does not match grid_n "
                         f"{cfg.grid_n} or its padded size")
    return Psf(kernel, pad_factor=1)


def cmd_retrieve_phase(cfg: RunConfig, args) -> int:
    out = _outdir(cfg, "retrieve_phase")
    echo_config(cfg, out)
    psf = _load_psf(args.psf, cfg)
    aperture = make_aperture(cfg.aperture_shape, cfg.grid_n,
                             cfg.aperture_size_fraction)
    basis = build_basis(cfg.grid_n, cfg.disk_radius_fraction,
                        cfg.max_radial_order)
    estimate = retrieve_phase_iterative(psf, aperture, basis,
                                        n_starts=cfg.pr_starts,
                                        seed=cfg.seed)
    refined = refine_phase_zernike(psf, aperture, estimate.coeffs, basis)
    if not estimate.converged and refined.residual > 1e-6:
        refined = replace(refined, converged=False)
    write_float_grid(out / "phase_estimate.grid", refined.phase)
    write_phase_png(out / "phase_estimate.png", refined.phase)
    with open(out / "coefficients.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["radial_order", "azimuthal_order", "value"])
        for (order, azim), value in zip(basis.indices,
                                        refined.coeffs.values):
            writer.writerow([order, azim, f"{value:.9e}"])
    sup = aperture.support
    report = {"residual_misfit": refined.residual,
              "converged": bool(refined.converged),
              "ambiguous": bool(refined.ambiguous),
              "estimate_rms": float(np.sqrt(
                  np.mean(refined.phase[sup] ** 2)))}
    (out / "report.json").write_text(json.dumps(report, sort_keys=True,
                                                indent=2) + "\n")
    print(json.dumps(report, sort_keys=True))
    return EXIT_OK if refined.converged else EXIT_NO_CONVERGENCE


def cmd_estimate_psf(cfg: RunConfig, args) -> int:
    out = _outdir(cfg, "estimate_psf")
    echo_config(cfg, out)
    pixels = np.asarray(read_scene_image(args.image), dtype=float)
    estimate = estimate_psf_blind(pixels, cfg.kernel_size)
    write_float_grid(out / "kernel.grid", estimate.psf.kernel)
    write_gray8(out / "kernel.png", estimate.psf.kernel ** 0.25)
    report = {"fidelity": estimate.fidelity,
              "iterations_used": estimate.iterations_used,
              "converged": bool(estimate.converged)}
    (out / "report.json").write_text(json.dumps(report, sort_keys=True,
                                                indent=2) + "\n")
    print(json.dumps(report, sort_keys=True))
    return EXIT_OK if estimate.converged else EXIT_NO_CONVERGENCE


def cmd_metrics(cfg: RunConfig, args) -> int:
    out = _outdir(cfg, "metrics")
    echo_config(cfg, out)
    report = {}
    if args.ref and args.test:
        a = np.asarray(read_scene_image(args.ref), dtype=float)
        b = np.asarray(read_scene_image(args.test), dtype=float)
        peak = max(a.max(), b.max(), 1.0)
        report["psnr"] = psnr(b, a, peak=peak)
        report["ssim"] = ssim(b, a)
    if args.psf:
        psf = _load_psf(args.psf, cfg)
        aperture = make_aperture(cfg.aperture_shape, cfg.grid_n,
                                 cfg.aperture_size_fraction)
        width = 2.0 * cfg.aperture_size_fraction * cfg.grid_n \
            * psf.pad_factor
        profile = mtf(psf, aperture_width=width)
        with open(out / "mtf.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["frequency", "mtf"])
            for x, v in zip(profile.radial_frequency, profile.contrast):
                writer.writerow([f"{x:.6f}", f"{v:.9e}"])
        report["strehl"] = strehl_ratio(psf, aperture)
    if not report and not args.psf:
        raise ValueError("metrics needs --ref/--test images or a --psf")
    (out / "metrics.json").write_text(json.dumps(report, sort_keys=True,
                                                 indent=2) + "\n")
    print(json.dumps(report, sort_keys=True))
    return EXIT_OK


def cmd_batch(cfg: RunConfig, args) -> int:
    out = _outdir(cfg, "batch")
    echo_config(cfg, out)
    runs = args.runs

    def one(i: int) -> dict:
        sub_cfg = replace(cfg, seed=cfg.seed + i,
                          scene_seed=cfg.scene_seed + i)
        sub_out = out / f"run_{sub_cfg.seed:04d}"
        sub_out.mkdir(parents=True, exist_ok=True)
        final = _run_loop_once(sub_cfg, sub_out, None)
        return {"seed": sub_cfg.seed, "strehl": final["strehl"],
                "psnr": final["psnr"], "ssim": final["ssim"]}

    workers = args.workers or min(4, runs)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        rows = list(pool.map(one, range(runs)))

    with open(out / "summary.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["seed", "strehl", "psnr",
                                                "ssim"])
        writer.writeheader()
        writer.writerows(rows)
    finals = [r["strehl"] for r in rows]
    summary = {"runs": runs,
               "median_final_strehl": float(np.median(finals)),
               "fraction_above_0p9": float(np.mean(
                   [s >= 0.9 for s in finals]))}
    (out / "summary.json").write_text(json.dumps(summary, sort_keys=True,
                                                 indent=2) + "\n")
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="asymao",
        description="Closed-loop adaptive optics with asymmetric apertures: "
                    "PSF simulation, blind estimation, phase retrieval, and "
                    "correction loops.")
    parser.add_argument("--config", help="INI configuration file")
    parser.add_argument("--out", help="output directory root")
    parser.add_argument("--seed", type=int, help="master random seed")
    parser.add_argument("--grid-n", type=int, dest="grid_n",
                        help="simulation grid side (power of two)")
    parser.add_argument("--aperture", dest="aperture_shape",
                        choices=("disk", "rectangle", "triangle"),
                        help="aperture shape")
    parser.add_argument("--rms", type=float, dest="rms_target",
                        help="aberration RMS target in radians")
    parser.add_argument("--noise-sigma", type=float, dest="noise_sigma",
                        help="measurement noise level")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("demo-ambiguity",
                       help="show symmetric apertures cannot distinguish a "
                            "phase from its conjugate flip")
    p.add_argument("--tilt-only", action="store_true",
                   help="use a pure tilt (degenerate odd-parity case)")
    p.set_defaults(func=cmd_demo_ambiguity)

    p = sub.add_parser("run-loop", help="run a closed-loop correction")
    p.add_argument("--scene", help="scene image (float grid or 8-bit); "
                                   "synthetic if omitted")
    p.add_argument("--loops", type=int, help="number of correction steps")
    p.add_argument("--estimator", choices=("blind", "oracle", "geometric"),
                   help="residual estimator strategy")
    p.set_defaults(func=cmd_run_loop)

    p = sub.add_parser("retrieve-phase",
                       help="retrieve a pupil phase from a measured PSF")
    p.add_argument("psf", help="PSF image (float grid or 8-bit)")
    p.set_defaults(func=cmd_retrieve_phase)

    p = sub.add_parser("estimate-psf",
                       help="blind kernel estimate from one measurement")
    p.add_argument("image", help="measurement image")
    p.add_argument("--kernel-size", type=int, dest="kernel_size",
                   help="odd kernel side in pixels")
    p.set_defaults(func=cmd_estimate_psf)

    p = sub.add_parser("metrics", help="image quality and PSF metrics")
    p.add_argument("--ref", help="reference image")
    p.add_argument("--test", help="image to score against the reference")
    p.add_argument("--psf", help="PSF for Strehl and MTF")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("batch", help="fan a loop run across seeds")
    p.add_argument("--runs", type=int, default=5, help="number of runs")
    p.add_argument("--workers", type=int, help="thread pool size")
    p.set_defaults(func=cmd_batch)
    return parser


_OVERRIDE_FIELDS = ("seed", "grid_n", "aperture_shape", "rms_target",
                    "noise_sigma", "loops", "estimator", "kernel_size")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    overrides = {name: getattr(args, name)
                 for name in _OVERRIDE_FIELDS if hasattr(args, name)}
    if getattr(args, "out", None):
        overrides["output_dir"] = args.out
    try:
        cfg = load_config(args.config, overrides)
    except (ValueError, configparser.Error) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        return args.func(cfg, args)
    except GridFormatError as exc:
        print(f"format error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
