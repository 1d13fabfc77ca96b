"""Channel estimators: BESVR, linear TVR, and OMP baselines (polar grid and DFT).

Every estimator sees only the received pilots and the known operators, never
the true channel.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .geometry import ArrayGeometry, rayleigh_distance
from .solvers import AdmmParams, AdmmTrace, admm_lasso, admm_tv

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BesvrConfig:
    n_peaks: int = 30
    lasso: AdmmParams = AdmmParams(reg_weight=0.01, penalty=1.0)
    # split the peak set at its largest gap into two blocks instead of one
    two_cluster: bool = False

    def __post_init__(self):
        if self.n_peaks < 1:
            raise ValueError("n_peaks must be positive")


@dataclass
class EstimateResult:
    h_hat: np.ndarray
    z_hat: np.ndarray
    support: np.ndarray
    wall_time_s: float = 0.0
    solver_trace: AdmmTrace | None = None
    meta: dict = field(default_factory=dict)


@dataclass(frozen=True)
class PolarGrid:
    """Angle x distance dictionary of unit-norm near-field steering vectors.

    Column ``k * n_rings_total + s`` is angle ``k`` on ring ``s``; the last
    ring of every angle is the far-field one (``distance = inf``).
    """

    angle_samples: np.ndarray
    distance_rings: np.ndarray
    dictionary: np.ndarray
    atom_distances: np.ndarray
    params: dict = field(default_factory=dict)

    @property
    def n_atoms(self) -> int:
        return self.dictionary.shape[1]


def _ls_fit(a, y):
    coef, _, rank, _ = np.linalg.lstsq(a, y, rcond=None)
    if rank < a.shape[1]:
        log.warning("least-squares fit is rank deficient (%d < %d)", rank, a.shape[1])
    return coef


def _omp(a, y, n_atoms, rtol=1e-10):
    """Greedy atom selection with least-squares refit; returns ``(support, coef)``.

    Stops early once the residual is zero to within ``rtol * ||y||``.
    """
    support = []
    coef = np.zeros(0, dtype=complex)
    r = y
    y_norm = np.linalg.norm(y)
    for _ in range(n_atoms):
        if np.linalg.norm(r) <= rtol * y_norm or y_norm == 0:
            break
        p = int(np.argmax(np.abs(a.conj().T @ r)))
        if p not in support:
            support.append(p)
        coef = _ls_fit(a[:, support], y)
        r = y - a[:, support] @ coef
    return np.array(support, dtype=int), coef


def besvr_stage1(y, psi, n_peaks: int, two_cluster: bool = False):
    """Locate the nonzero block of the angular vector.

    Runs ``n_peaks`` OMP iterations, collects the selected columns into the
    peak set, and returns ``(peaks, block)`` where ``block`` is the contiguous
    index range from the smallest to the largest peak (or two ranges joined,
    when ``two_cluster`` is set).
    """
    y = np.asarray(y)
    psi = np.asarray(psi)
    if n_peaks > psi.shape[1]:
        raise ValueError(f"n_peaks={n_peaks} exceeds {psi.shape[1]} columns")
    if n_peaks < 1:
        raise ValueError("n_peaks must be positive")
    peaks, _ = _omp(psi, y, n_peaks)
    peaks = np.sort(peaks)
    if peaks.size == 0:
        return peaks, peaks
    if two_cluster and peaks.size > 1:
        cut = int(np.argmax(np.diff(peaks))) + 1
        block = np.concatenate(
            [np.arange(peaks[0], peaks[cut - 1] + 1), np.arange(peaks[cut], peaks[-1] + 1)]
        )
    else:
        block = np.arange(peaks[0], peaks[-1] + 1)
    return peaks, block


def besvr(y, psi, dft, config: BesvrConfig = BesvrConfig(), tx_power: float = 1.0) -> EstimateResult:
    """Boundary estimation followed by LASSO recovery on the detected block."""
    t0 = time.perf_counter()
    y = np.asarray(y) / np.sqrt(tx_power)
    n = psi.shape[1]
    peaks, block = besvr_stage1(y, psi, config.n_peaks, config.two_cluster)
    z_hat = np.zeros(n, dtype=complex)
    trace = None
    if block.size:
        params = config.lasso.replace(max_iter=block.size)
        z_hat[block], trace = admm_lasso(psi[:, block], y, params)
    h_hat = dft @ z_hat
    return EstimateResult(
        h_hat=h_hat,
        z_hat=z_hat,
        support=block,
        wall_time_s=time.perf_counter() - t0,
        solver_trace=trace,
        meta={"peaks": peaks},
    )


def tvr_estimate(y, psi, dft, params: AdmmParams, tx_power: float = 1.0) -> EstimateResult:
    """Linear total-variation regularized recovery of the angular vector.

    ``params.max_iter`` is used as given; the experiment defaults set it to
    the number of elements.
    """
    t0 = time.perf_counter()
    y = np.asarray(y) / np.sqrt(tx_power)
    z_hat, trace = admm_tv(psi, y, params)
    h_hat = dft @ z_hat
    return EstimateResult(
        h_hat=h_hat,
        z_hat=z_hat,
        support=np.flatnonzero(z_hat),
        wall_time_s=time.perf_counter() - t0,
        solver_trace=trace,
    )


def build_polar_grid(
    geometry: ArrayGeometry,
    n_angle: int | None = None,
    n_rings: int = 30,
    min_distance: float = 10.0,
    max_distance: float | None = None,
    angle_scaled: bool = True,
) -> PolarGrid:
    """Sample the polar domain for the P-OMP baseline.

    Angles are uniform in ``sin(theta)`` over ``(-1, 1)``, ``2 * N`` of them
    by default. Ring ``s`` sits at an inverse distance uniformly spaced
    between ``1/max_distance`` (the Rayleigh distance by default) and
    ``1/min_distance``. With ``angle_scaled`` the ring radii shrink by
    ``cos(theta)^2``, which matches the ring spacing to the near-field phase
    curvature at each angle. One far-field ring is appended per angle.
    """
    n = geometry.n_elements
    n_angle = 2 * n if n_angle is None else n_angle
    if n_angle < 1 or n_rings < 1:
        raise ValueError("n_angle and n_rings must be positive")
    if max_distance is None:
        max_distance = max(rayleigh_distance(geometry), 2 * min_distance)
    if not 0 < min_distance < max_distance:
        raise ValueError("need 0 < min_distance < max_distance")
    k = np.arange(n_angle)
    sines = (2 * k - n_angle + 1) / n_angle
    angles = np.arcsin(sines)
    rings = 1 / np.linspace(1 / max_distance, 1 / min_distance, n_rings)

    scale = np.cos(angles) ** 2 if angle_scaled else np.ones(n_angle)
    # keep every sampled point off the array itself
    r_eff = np.maximum(np.outer(scale, rings), geometry.aperture / 2 + geometry.spacing)
    offsets = geometry.element_offsets
    dist = np.sqrt(
        r_eff[:, :, None] ** 2
        + offsets**2
        - 2 * r_eff[:, :, None] * offsets * sines[:, None, None]
    )
    near = np.exp(-1j * geometry.wavenumber * (dist - r_eff[:, :, None]))
    far = np.exp(1j * geometry.wavenumber * np.outer(sines, offsets))[:, None, :]
    atoms = np.concatenate([near, far], axis=1) / np.sqrt(n)
    dictionary = atoms.reshape(-1, n).T.copy()
    dictionary.setflags(write=False)
    atom_distances = np.concatenate([r_eff, np.full((n_angle, 1), np.inf)], axis=1).ravel()
    return PolarGrid(
        angle_samples=angles,
        distance_rings=np.append(rings, np.inf),
        dictionary=dictionary,
        atom_distances=atom_distances,
        params={
            "n_angle": n_angle,
            "n_rings": n_rings,
            "min_distance": min_distance,
            "max_distance": max_distance,
            "angle_scaled": angle_scaled,
        },
    )


def pomp_estimate(y, stacked_combiner, grid: PolarGrid, sparsity: int, tx_power: float = 1.0) -> EstimateResult:
    """OMP over the polar dictionary seen through the combiner (no DFT basis)."""
    if sparsity < 1:
        raise ValueError("sparsity must be positive")
    if sparsity > grid.n_atoms:
        raise ValueError(f"sparsity={sparsity} exceeds {grid.n_atoms} atoms")
    t0 = time.perf_counter()
    y = np.asarray(y) / np.sqrt(tx_power)
    eff = stacked_combiner @ grid.dictionary
    support, coef = _omp(eff, y, sparsity)
    coeffs = np.zeros(grid.n_atoms, dtype=complex)
    coeffs[support] = coef
    if support.size:
        h_hat = grid.dictionary[:, support] @ coef
    else:
        h_hat = np.zeros(grid.dictionary.shape[0], dtype=complex)
    return EstimateResult(
        h_hat=h_hat,
        z_hat=coeffs,
        support=support,
        wall_time_s=time.perf_counter() - t0,
        meta={"grid": dict(grid.params)},
    )


def domp_estimate(y, psi, dft, sparsity: int, tx_power: float = 1.0) -> EstimateResult:
    """OMP over the DFT dictionary; the angular estimate is mapped back by ``dft``."""
    n = psi.shape[1]
    if sparsity < 1:
        raise ValueError("sparsity must be positive")
    if sparsity > n:
        raise ValueError(f"sparsity={sparsity} exceeds {n} columns")
    t0 = time.perf_counter()
    y = np.asarray(y) / np.sqrt(tx_power)
    support, coef = _omp(psi, y, sparsity)
    z_hat = np.zeros(n, dtype=complex)
    z_hat[support] = coef
    return EstimateResult(
        h_hat=dft @ z_hat,
        z_hat=z_hat,
        support=np.sort(support),
        wall_time_s=time.perf_counter() - t0,
    )
