"""Fast invariant checks run by ``nfce selftest``."""

from __future__ import annotations

import time

import numpy as np

from . import harness
from .geometry import ArrayGeometry, far_field_steering_vector, steering_vector
from .measurement import dft_matrix
from .oracles import ista_lasso, tv_denoise_exact
from .solvers import AdmmParams, admm_lasso, admm_tv, lasso_objective, soft_threshold

FAULTS = ("dft-norm",)


def _check_dft(faults):
    for n in (2, 16, 450):
        f = dft_matrix(n)
        if "dft-norm" in faults:
            f = f * np.sqrt(n)
        err = np.abs(f @ f.conj().T - np.eye(n)).max()
        if err > 1e-10:
            return f"F F^H deviates from I by {err:.2e} at n={n}"


def _check_soft_threshold(faults):
    cases = [(0.5, 1.0, 0.0), (3 + 4j, 1.0, 2.4 + 3.2j), (-2.0, 0.5, -1.5), (0.0, 0.3, 0.0)]
    for a, t, want in cases:
        got = complex(soft_threshold(np.array([a]), t)[0])
        if abs(got - want) > 1e-12:
            return f"S({a}, {t}) = {got}, expected {want}"


def _check_steering(faults):
    g = ArrayGeometry(64)
    a = steering_vector(g, 0.4, 7.0)
    if np.abs(np.abs(a) - 1).max() > 1e-12:
        return "steering vector entries are not unit modulus"
    far = steering_vector(g, 0.4, 1e7)
    if np.abs(np.angle(far / far_field_steering_vector(g, 0.4))).max() > 1e-3:
        return "steering vector does not approach the far-field response"


def _check_lasso(faults):
    rng = np.random.default_rng(7)
    a = rng.standard_normal((8, 16)) + 1j * rng.standard_normal((8, 16))
    a /= np.linalg.norm(a, axis=0)
    y = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    z, _ = admm_lasso(a, y, AdmmParams(0.1, 1.0, 3000))
    ref = ista_lasso(a, y, 0.1, 20_000)
    f, f_ref = lasso_objective(a, y, z, 0.1), lasso_objective(a, y, ref, 0.1)
    if abs(f - f_ref) > 1e-4 * abs(f_ref):
        return f"ADMM objective {f:.8g} vs ISTA {f_ref:.8g}"


def _check_tv(faults):
    y = np.repeat([0.0, 2.0, -1.0, 1.0], 5) + 0.1 * np.random.default_rng(3).standard_normal(20)
    z, _ = admm_tv(np.eye(20), y, AdmmParams(0.3, 1.0, 3000))
    ref = tv_denoise_exact(y, 0.3)
    err = np.abs(z - ref).max()
    if err > 1e-3:
        return f"ADMM-TV deviates from exact TV denoising by {err:.2e}"


def _check_nmse(faults):
    h = np.exp(1j * np.arange(5.0))
    if harness.nmse(h, h) != 0.0 or harness.nmse(h, 0 * h) != 1.0 or harness.nmse(h, 2 * h) != 1.0:
        return "NMSE identities violated"


def _check_determinism(faults):
    cfg = harness.ExperimentConfig(n_elements=32, n_slots=8, n_rf=2, estimators=("tvr", "besvr", "domp"), besvr_peaks=4, domp_sparsity=4)
    a = harness.run_trials_at(cfg, 20.0, 3)
    b = harness.run_trials_at(cfg, 20.0, 3)
    if [r.nmse for r in a] != [r.nmse for r in b]:
        return "repeated trial produced different NMSE"


CHECKS = [
    ("dft unitarity", _check_dft),
    ("soft threshold", _check_soft_threshold),
    ("steering vector", _check_steering),
    ("admm lasso vs ista", _check_lasso),
    ("admm tv vs exact tv", _check_tv),
    ("nmse identities", _check_nmse),
    ("trial determinism", _check_determinism),
]


def run_selftest(faults=(), out=print) -> bool:
    """Run every check, print one line each, return True if all pass."""
    unknown = set(faults) - set(FAULTS)
    if unknown:
        raise ValueError(f"unknown fault(s): {sorted(unknown)}")
    ok = True
    t0 = time.perf_counter()
    for name, check in CHECKS:
        try:
            problem = check(set(faults))
        except Exception as exc:  # a crashing check is a failing check
            problem = f"{type(exc).__name__}: {exc}"
        ok &= problem is None
        out(f"{'PASS' if problem is None else 'FAIL'}  {name}" + ("" if problem is None else f": {problem}"))
    out(f"{'all checks passed' if ok else 'selftest FAILED'} in {time.perf_counter() - t0:.1f} s")
    return ok
