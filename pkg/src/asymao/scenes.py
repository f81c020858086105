"""Synthetic natural-scene generator for blind-estimation experiments.

The blind PSF estimator keys on sharp, multi-orientation edges, so scenes mix
a smooth background with hard-edged rectangles, disks, rotated bars, and one
square-wave grating patch. Contrast stays inside [0, 1] sensor range.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .optics import SceneImage


def synthetic_scene(grid_n: int, seed: int) -> SceneImage:
    """Deterministic textured scene on a grid_n square grid."""
    r = np.random.default_rng(seed)
    n = grid_n
    x = np.full((n, n), 0.35)
    yy, xx = np.mgrid[0:n, 0:n]
    bg = ndimage.gaussian_filter(r.standard_normal((n, n)), 24)
    x += 0.12 * bg / np.abs(bg).max()
    for _ in range(26):
        kind = r.integers(0, 3)
        v = r.uniform(0.05, 0.95)
        cy, cx = r.uniform(0.1 * n, 0.9 * n, 2)
        if kind == 0:
            h, w = r.uniform(0.03 * n, 0.2 * n, 2)
            sel = (np.abs(yy - cy) < h / 2) & (np.abs(xx - cx) < w / 2)
        elif kind == 1:
            rad = r.uniform(0.02 * n, 0.1 * n)
            sel = (yy - cy) ** 2 + (xx - cx) ** 2 < rad ** 2
        else:
            w = r.uniform(0.01 * n, 0.03 * n)
            length = r.uniform(0.1 * n, 0.3 * n)
            th = r.uniform(0, np.pi)
            u = (xx - cx) * np.cos(th) + (yy - cy) * np.sin(th)
            vv = -(xx - cx) * np.sin(th) + (yy - cy) * np.cos(th)
            sel = (np.abs(u) < length / 2) & (np.abs(vv) < w / 2)
        x[sel] = v
    # one grating patch: strong, clean high-frequency content in a known band
    gy, gx = int(r.uniform(0.1 * n, 0.6 * n)), int(r.uniform(0.1 * n, 0.6 * n))
    gs = int(0.25 * n)
    period = max(4, int(r.uniform(6, 14)))
    patch = (np.sin(2 * np.pi * xx[gy:gy + gs, gx:gx + gs] / period) > 0) * 0.5 + 0.25
    x[gy:gy + gs, gx:gx + gs] = patch
    return SceneImage(np.clip(x, 0.0, 1.0))
