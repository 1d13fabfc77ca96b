"""ADMM solvers for l1-regularized and total-variation-regularized least squares.

Both solve ``min_z 0.5 ||y - A z||^2 + reg * R(z)`` over complex ``z``, with
``R(z) = ||z||_1`` (:func:`admm_lasso`) or ``R(z) = ||D z||_1`` for the first
difference operator ``D`` (:func:`admm_tv`).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse

log = logging.getLogger(__name__)

# set to True to check the normal-equation residual of every linear solve
DEBUG_CHECKS = False


class SingularSystemError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class AdmmParams:
    reg_weight: float
    penalty: float = 1.0
    max_iter: int = 100
    rel_tol: float = 0.0
    # recording the objective costs one extra matvec per iteration
    track_objective: bool = False

    def __post_init__(self):
        if not self.reg_weight >= 0:
            raise ValueError("reg_weight must be nonnegative")
        if not self.penalty > 0:
            raise ValueError("penalty must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")
        if not self.rel_tol >= 0:
            raise ValueError("rel_tol must be nonnegative")

    def replace(self, **changes) -> "AdmmParams":
        return AdmmParams(**{**self.__dict__, **changes})


@dataclass
class AdmmTrace:
    iterations_run: int = 0
    primal_residual_history: list = field(default_factory=list)
    objective_history: list = field(default_factory=list)


def soft_threshold(a, t: float):
    """Complex soft thresholding ``(a / |a|) * max(|a| - t, 0)``, with 0 kept at 0."""
    if t < 0:
        raise ValueError("threshold must be nonnegative")
    a = np.asarray(a)
    mag = np.abs(a)
    scale = np.maximum(mag - t, 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(mag > 0, a * (scale / np.where(mag > 0, mag, 1.0)), 0)
    return out.astype(np.result_type(a, float))


def lasso_objective(a, y, z, reg_weight: float) -> float:
    r = y - a @ z
    return float(0.5 * np.vdot(r, r).real + reg_weight * np.abs(z).sum())


def tv_objective(a, y, z, reg_weight: float) -> float:
    r = y - a @ z
    return float(0.5 * np.vdot(r, r).real + reg_weight * np.abs(np.diff(z)).sum())


def _check_inputs(a, y):
    a = np.asarray(a)
    y = np.asarray(y)
    if a.ndim != 2 or y.ndim != 1 or a.shape[0] != y.shape[0]:
        raise ValueError(f"shape mismatch: A {a.shape}, y {y.shape}")
    if a.shape[1] < 1:
        raise ValueError("A must have at least one column")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(y))):
        raise ValueError("inputs must be finite")
    return a, y


def _inverse(gram):
    # the system matrix is fixed across iterations: invert it once via Cholesky
    try:
        factor = scipy.linalg.cho_factor(gram, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError("ADMM system matrix is not positive definite") from exc
    piv = np.abs(np.diag(factor[0]))
    # squared pivot ratio bounds the condition number from below
    if (piv.min() / piv.max()) ** 2 < 1e-13:
        raise SingularSystemError("ADMM system matrix is numerically singular")
    inv = scipy.linalg.cho_solve(factor, np.eye(gram.shape[0], dtype=gram.dtype), check_finite=False)
    if not np.all(np.isfinite(inv)):
        raise SingularSystemError("ADMM system matrix is numerically singular")
    return inv


def _check_normal_equations(gram, rhs, x, label):
    res = np.linalg.norm(gram @ x - rhs) / max(np.linalg.norm(rhs), 1e-300)
    if res > 1e-8:
        raise AssertionError(f"{label}: normal-equation residual {res:.2e}")


def admm_lasso(a, y, params: AdmmParams):
    """Solve the LASSO by ADMM; the z-update system is inverted once up front.

    Parameters
    ----------
    a : ndarray, shape (m, n)
        Dictionary restricted to the candidate columns.
    y : ndarray, shape (m,)
        Observations, already divided by the pilot amplitude.
    params : AdmmParams
        ``reg_weight`` is the l1 weight, ``penalty`` the augmented-Lagrangian
        factor; the shrinkage threshold is ``reg_weight / penalty``.

    Returns
    -------
    zeta : ndarray, shape (n,)
        The thresholded (exactly sparse) iterate after the last update.
    trace : AdmmTrace
    """
    a, y = _check_inputs(a, y)
    n = a.shape[1]
    eps = params.penalty
    thresh = params.reg_weight / eps
    ahy = a.conj().T @ y
    gram = a.conj().T @ a + eps * np.eye(n)
    inv = _inverse(gram)
    base = inv @ ahy

    z = np.zeros(n, dtype=complex)
    zeta = np.zeros(n, dtype=complex)
    phi = np.zeros(n, dtype=complex)
    trace = AdmmTrace()
    for _ in range(params.max_iter):
        z = base + eps * (inv @ (zeta - phi))
        if DEBUG_CHECKS:
            _check_normal_equations(gram, ahy + eps * (zeta - phi), z, "lasso z-update")
        zeta = soft_threshold(z + phi, thresh)
        phi = phi + eps * (z - zeta)

        res = np.linalg.norm(z - zeta) / max(np.linalg.norm(z), 1.0)
        trace.iterations_run += 1
        trace.primal_residual_history.append(float(res))
        if params.track_objective:
            trace.objective_history.append(lasso_objective(a, y, zeta, params.reg_weight))
        if params.rel_tol > 0 and res < params.rel_tol:
            break
    return zeta, trace


def first_difference_matrix(n: int) -> scipy.sparse.csr_matrix:
    """``(n-1) x n`` operator with ``(D z)_j = z_{j+1} - z_j``."""
    if n < 2:
        raise ValueError("difference operator needs n >= 2")
    return scipy.sparse.diags([-np.ones(n - 1), np.ones(n - 1)], [0, 1], shape=(n - 1, n), format="csr")


def admm_tv(a, y, params: AdmmParams):
    """Total-variation regularized least squares by ADMM.

    Splits on ``beta = D z``; ``(A^H A + penalty D^T D)`` is factored once.
    Returns the final ``z`` iterate and an :class:`AdmmTrace`.
    """
    a, y = _check_inputs(a, y)
    n = a.shape[1]
    if n < 2:
        raise ValueError("admm_tv needs at least two unknowns")
    eps = params.penalty
    thresh = params.reg_weight / eps
    d = first_difference_matrix(n)
    dtd = (d.T @ d).toarray()
    ahy = a.conj().T @ y
    gram = a.conj().T @ a + eps * dtd
    inv = _inverse(gram)
    base = inv @ ahy
    # inv @ D^T, so each z-update is a single matrix-vector product
    inv_dt = (d @ inv.T).T

    z = np.zeros(n, dtype=complex)
    beta = np.zeros(n - 1, dtype=complex)
    xi = np.zeros(n - 1, dtype=complex)
    trace = AdmmTrace()
    for _ in range(params.max_iter):
        u = beta - xi
        z = base + eps * (inv_dt @ u)
        if DEBUG_CHECKS:
            _check_normal_equations(gram, ahy + eps * (d.T @ u), z, "tv z-update")
        dz = np.diff(z)
        beta = soft_threshold(dz + xi, thresh)
        xi = xi + eps * (dz - beta)

        res = np.linalg.norm(dz - beta) / max(np.linalg.norm(dz), 1.0)
        trace.iterations_run += 1
        trace.primal_residual_history.append(float(res))
        if params.track_objective:
            trace.objective_history.append(tv_objective(a, y, z, params.reg_weight))
        if params.rel_tol > 0 and res < params.rel_tol:
            break
    return z, trace
