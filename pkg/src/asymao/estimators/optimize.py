"""Small monotone gradient-descent helper shared by the phase estimators."""

from __future__ import annotations

import numpy as np


def armijo_minimize(fun_grad, x0: np.ndarray, iters: int = 80,
                    backtracks: int = 25, c1: float = 1e-4):
    """Backtracking gradient descent; the objective never increases.

    fun_grad(x) -> (f, g). Returns (x_best, f_best, n_evals, converged) where
    converged is False only if the very first line search fails to find any
    decrease (a stationary or pathological start).
    """
    x = np.asarray(x0, dtype=float).copy()
    f, g = fun_grad(x)
    evals = 1
    step = 1.0 / max(np.linalg.norm(g), 1e-12)
    made_progress = False
    for _ in range(iters):
        gg = float(np.dot(g, g))
        if gg == 0.0:
            made_progress = True
            break
        accepted = False
        for _ in range(backtracks):
            x_try = x - step * g
            f_try, g_try = fun_grad(x_try)
            evals += 1
            if f_try <= f - c1 * step * gg:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        made_progress = True
        x, f, g = x_try, f_try, g_try
        step *= 2.0
    return x, f, evals, made_progress
