"""Artifact I/O: lossless float grids, 8-bit images with range sidecars,
and cyclic phase renders.

The float grid format is a 16-byte little-endian header (4-byte magic
b"AOG1", uint32 width, uint32 height, 4 reserved zero bytes) followed by
row-major float32 samples. It exists so phases and PSFs survive round trips
bit-exactly; 8-bit formats are for human inspection and carry a JSON sidecar
with the original min/max so values can be mapped back.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np
from PIL import Image

MAGIC = b"AOG1"


class GridFormatError(Exception):
    """Raised for bad magic, truncated data, or malformed headers."""


def write_float_grid(path, array: np.ndarray) -> None:
    a = np.asarray(array)
    if a.ndim != 2:
        raise ValueError("float grid I/O is 2-D only")
    a = np.ascontiguousarray(a, dtype="<f4")
    h, w = a.shape
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", w, h))
        fh.write(b"\x00" * 4)
        fh.write(a.tobytes())


def read_float_grid(path) -> np.ndarray:
    blob = Path(path).read_bytes()
    if len(blob) < 16:
        raise GridFormatError(f"{path}: header truncated")
    if blob[:4] != MAGIC:
        raise GridFormatError(f"{path}: bad magic {blob[:4]!r}")
    w, h = struct.unpack("<II", blob[4:12])
    expected = 16 + 4 * w * h
    if len(blob) != expected:
        raise GridFormatError(f"{path}: expected {expected} bytes, "
                              f"got {len(blob)}")
    return np.frombuffer(blob[16:], dtype="<f4").reshape(h, w).copy()


def write_gray8(path, array: np.ndarray, vmin: float | None = None,
                vmax: float | None = None) -> None:
    """Clamp-and-scale to 8 bits (PNG or PGM by extension) with a
    .range.json sidecar recording the mapping."""
    a = np.asarray(array, dtype=float)
    lo = float(a.min()) if vmin is None else float(vmin)
    hi = float(a.max()) if vmax is None else float(vmax)
    span = hi - lo if hi > lo else 1.0
    q = np.clip(np.rint((a - lo) / span * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(q, mode="L").save(path)
    sidecar = {"min": lo, "max": hi}
    Path(str(path) + ".range.json").write_text(
        json.dumps(sidecar, sort_keys=True) + "\n")


def read_gray8(path) -> np.ndarray:
    """Read an 8-bit grayscale image back to floats via its sidecar
    (unit range if no sidecar exists)."""
    try:
        img = Image.open(path)
    except (OSError, Image.UnidentifiedImageError) as exc:
        raise GridFormatError(f"{path}: {exc}") from exc
    a = np.asarray(img.convert("L"), dtype=float) / 255.0
    sidecar = Path(str(path) + ".range.json")
    if sidecar.exists():
        rng = json.loads(sidecar.read_text())
        a = rng["min"] + a * (rng["max"] - rng["min"])
    return a


def write_phase_png(path, phase: np.ndarray) -> None:
    """Render a phase map with a cyclic colormap over [-pi, pi).

    Hue encodes the wrapped phase so +pi and -pi coincide; full saturation
    and value keep the mapping invertible up to winding.
    """
    phi = np.mod(np.asarray(phase, dtype=float) + np.pi, 2 * np.pi) - np.pi
    hue = (phi + np.pi) / (2 * np.pi)       # [0, 1) around the circle
    h6 = hue * 6.0
    c = np.ones_like(h6)
    x = 1.0 - np.abs(np.mod(h6, 2.0) - 1.0)
    zeros = np.zeros_like(h6)
    bands = [np.stack([c, x, zeros]), np.stack([x, c, zeros]),
             np.stack([zeros, c, x]), np.stack([zeros, x, c]),
             np.stack([x, zeros, c]), np.stack([c, zeros, x])]
    rgb = np.zeros((3,) + h6.shape)
    for b, band in enumerate(bands):
        sel = (h6 >= b) & (h6 < b + 1)
        rgb = np.where(sel, band, rgb)
    out = np.clip(np.rint(rgb * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(np.moveaxis(out, 0, -1), mode="RGB").save(path)


def read_scene_image(path) -> np.ndarray:
    """Load a scene from a float grid or any 8-bit image, scaled to [0, 1]."""
    p = Path(path)
    if not p.exists():
        raise GridFormatError(f"{path}: no such file")
    if p.read_bytes()[:4] == MAGIC:
        return read_float_grid(p)
    return read_gray8(p)
