"""Slow reference solvers used to cross-check the ADMM engines."""

from __future__ import annotations

import numpy as np
import scipy.optimize


def ista_lasso(a, y, reg_weight: float, n_iter: int = 100_000) -> np.ndarray:
    """Proximal gradient for ``0.5 ||y - A z||^2 + reg ||z||_1`` with step ``1/||A||_2^2``."""
    a = np.asarray(a, dtype=complex)
    y = np.asarray(y, dtype=complex)
    step = 1.0 / np.linalg.norm(a, 2) ** 2
    ah = a.conj().T
    z = np.zeros(a.shape[1], dtype=complex)
    t = step * reg_weight
    for _ in range(n_iter):
        v = z - step * (ah @ (a @ z - y))
        mag = np.abs(v)
        z = np.where(mag > t, v * (1 - t / np.maximum(mag, 1e-300)), 0)
    return z


def tv_denoise_exact(y, reg_weight: float) -> np.ndarray:
    """Exact minimizer of ``0.5 ||y - x||^2 + reg * sum |x_{j+1} - x_j|`` for real ``y``.

    Solves the box-constrained dual ``min_u 0.5 ||y - D^T u||^2, |u| <= reg``
    with bounded-variable least squares (finite active-set method) and
    returns ``x = y - D^T u``.
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    if n < 2:
        return y.copy()
    dt = np.zeros((n, n - 1))
    idx = np.arange(n - 1)
    dt[idx, idx] = -1.0
    dt[idx + 1, idx] = 1.0
    res = scipy.optimize.lsq_linear(dt, y, bounds=(-reg_weight, reg_weight), method="bvls", tol=1e-14)
    return y - dt @ res.x
