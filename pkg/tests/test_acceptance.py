"""End-to-end acceptance checks at full experiment scale (about 15 minutes)."""

import csv
import math

import numpy as np
import pytest

from nfce import harness
from nfce.cli import main
from nfce.geometry import ArrayGeometry, ScenarioConfig, sample_scenario, synthesize_channel
from nfce.measurement import angular_coefficients, dft_matrix, two_window_fraction
from nfce.oracles import ista_lasso, tv_denoise_exact
from nfce.solvers import AdmmParams, admm_lasso, admm_tv, lasso_objective

pytestmark = pytest.mark.slow

BASE = harness.ExperimentConfig(n_trials=200)


def fmt(x):
    return f"{x:.3e}"


@pytest.fixture(scope="module")
def single_path():
    cfg = BASE.replace(n_paths=1, estimators=("tvr", "pomp"), snr_db_list=(20.0, 25.0, 30.0))
    return harness.sweep_snr(cfg)


@pytest.fixture(scope="module")
def multi_path():
    cfg = BASE.replace(n_paths=2, estimators=("tvr",), n_rf_list=(4, 6), snr_db_list=(15.0, 20.0, 25.0, 30.0))
    tvr = harness.sweep_rf(cfg)
    # same seeds as the rf sweep at n_rf = 4, so P-OMP sees identical data
    pomp = harness.sweep_snr(cfg.replace(n_rf=4, estimators=("pomp",), snr_db_list=(25.0, 30.0)))
    return tvr, pomp


def test_criterion_1_block_sparsity(report):
    geometry = ArrayGeometry(450, 28e9)
    f = dft_matrix(450)
    fractions = []
    for trial in range(100):
        rng = np.random.default_rng(harness.derive_seed(BASE.base_seed, trial))
        h = synthesize_channel(geometry, sample_scenario(ScenarioConfig(n_paths=2), rng)).h
        fractions.append(two_window_fraction(angular_coefficients(h, f), 450 // 4))
    hits = sum(fr >= 0.95 for fr in fractions)
    ok = report(1, hits >= 90, f"{hits}/100 two-path spectra hold >=95% energy in 2 windows of total width 112 (worst {min(fractions):.3f})")
    assert ok


def test_criterion_2_pomp_floor(single_path, report):
    vals = {s: single_path.get("pomp", s).mean_nmse for s in (25.0, 30.0)}
    ok = all(3e-3 <= v <= 3e-2 for v in vals.values())
    report(2, ok, f"P-OMP mean NMSE 25 dB {fmt(vals[25.0])}, 30 dB {fmt(vals[30.0])} (band [3e-3, 3e-2])")
    assert ok


def test_criterion_3_tvr_ordering(single_path, report):
    tvr = {s: single_path.get("tvr", s).mean_nmse for s in (20.0, 25.0, 30.0)}
    pomp = {s: single_path.get("pomp", s).mean_nmse for s in (25.0, 30.0)}
    ok = tvr[25.0] < pomp[25.0] and tvr[30.0] < pomp[30.0] and tvr[30.0] < tvr[20.0]
    report(
        3,
        ok,
        f"TVR {fmt(tvr[25.0])}/{fmt(tvr[30.0])} vs P-OMP {fmt(pomp[25.0])}/{fmt(pomp[30.0])} at 25/30 dB; "
        f"TVR 20 dB {fmt(tvr[20.0])}",
    )
    assert ok


def test_criterion_4_rf_chains(multi_path, report):
    tvr, pomp = multi_path
    t = {(k, s): tvr.get("tvr", f"{k}:{s}").mean_nmse for k in (4, 6) for s in (15, 20, 25, 30)}
    p = {s: pomp.get("pomp", float(s)).mean_nmse for s in (25, 30)}
    more_rf = all(t[(6, s)] < t[(4, s)] for s in (15, 20, 25, 30))
    beats = all(t[(4, s)] < p[s] for s in (25, 30))
    detail = ", ".join(f"{s} dB {fmt(t[(4, s)])}->{fmt(t[(6, s)])}" for s in (15, 20, 25, 30))
    report(4, more_rf and beats, f"TVR N_RF 4->6: {detail}; P-OMP at N_RF=4 25/30 dB {fmt(p[25])}/{fmt(p[30])}")
    assert more_rf and beats


def test_criterion_5_cpu_time(report):
    s = harness.sweep_elements_time(BASE.replace(estimators=("tvr", "besvr", "pomp")))
    tvr, pomp = s.get("tvr", 450).mean_time_s, s.get("pomp", 450).mean_time_s
    besvr = [s.get("besvr", n).mean_time_s for n in (150, 300, 450)]
    ratio = max(besvr) / min(besvr)
    ok = tvr < pomp and ratio <= 2.0
    report(
        5,
        ok,
        f"N_R=450 TVR {tvr:.4f} s vs P-OMP {pomp:.4f} s; BESVR {besvr[0]:.4f}/{besvr[1]:.4f}/{besvr[2]:.4f} s "
        f"at N_R 150/300/450, max/min {ratio:.2f} (bound 2)",
    )
    assert tvr < pomp
    assert ratio <= 2.0


def test_criterion_6_solver_oracles(report):
    rng = np.random.default_rng(606)
    lasso_err = []
    for _ in range(20):
        a = rng.standard_normal((16, 32)) + 1j * rng.standard_normal((16, 32))
        a /= np.linalg.norm(a, axis=0)
        y = rng.standard_normal(16) + 1j * rng.standard_normal(16)
        reg = rng.uniform(0.05, 0.5)
        z, _ = admm_lasso(a, y, AdmmParams(reg, 1.0, 5000))
        ref = ista_lasso(a, y, reg, 50_000)
        f, f_ref = lasso_objective(a, y, z, reg), lasso_objective(a, y, ref, reg)
        lasso_err.append(abs(f - f_ref) / abs(f_ref))
    tv_err = []
    for _ in range(20):
        n_blocks = rng.integers(2, 7)
        y = np.repeat(rng.uniform(-3, 3, n_blocks), rng.integers(3, 10, n_blocks))
        y = y + 0.1 * rng.standard_normal(y.size)
        reg = rng.uniform(0.05, 1.0)
        z, _ = admm_tv(np.eye(y.size), y, AdmmParams(reg, 1.0, 5000))
        tv_err.append(np.abs(z - tv_denoise_exact(y, reg)).max())
    ok = max(lasso_err) <= 1e-4 and max(tv_err) <= 1e-3
    report(6, ok, f"LASSO worst relative objective gap {max(lasso_err):.1e} (<=1e-4); TV worst deviation {max(tv_err):.1e} (<=1e-3)")
    assert ok


def test_criterion_7_noiseless_toy(report):
    toy = harness.ExperimentConfig(
        n_elements=64,
        n_slots=16,
        n_rf=4,
        n_paths=1,
        estimators=("tvr", "besvr"),
        snr_db_list=(math.inf,),
        n_trials=20,
        reg_mode="fixed",
        tvr_reg=1e-6,
        tvr_penalty=1e-3,
        besvr_reg=1e-6,
        besvr_penalty=1e-3,
        # every angular bin of the toy carries leakage, so the peak bound is the array size
        besvr_peaks=64,
    )
    s = harness.sweep_snr(toy)
    tvr, besvr = s.get("tvr", math.inf).mean_nmse, s.get("besvr", math.inf).mean_nmse
    default_peaks = harness.sweep_snr(toy.replace(estimators=("besvr",), besvr_peaks=30)).get("besvr", math.inf).mean_nmse
    h = np.exp(1j * np.linspace(0, 3, 64))
    identities = harness.nmse(h, h) == 0.0 and harness.nmse(h, np.zeros_like(h)) == 1.0
    ok = tvr <= 1e-3 and besvr <= 1e-3 and identities
    report(
        7,
        ok,
        f"N_R=64 square operator, noiseless: TVR {fmt(tvr)}, BESVR {fmt(besvr)} (U=64; U=30 gives {fmt(default_peaks)}); "
        f"nmse identities {'exact' if identities else 'broken'}",
    )
    assert ok


def test_criterion_8_cli_determinism(tmp_path, report):
    args = ["snr-sweep", "--seed", "77", "--trials", "3", "--estimators", "tvr,besvr,pomp,domp"]
    for name in ("a", "b"):
        assert main([*args, "--out", str(tmp_path / name)]) == 0

    def untimed(path):
        with open(path, newline="", encoding="utf-8") as f:
            rows = list(csv.reader(f))
        col = rows[0].index("time_s")
        return "\n".join(",".join(r[:col] + r[col + 1:]) for r in rows).encode()

    a, b = untimed(tmp_path / "a" / "snr_trials.csv"), untimed(tmp_path / "b" / "snr_trials.csv")
    n_rows = a.count(b"\n")
    ok = a == b and n_rows == 7 * 3 * 4
    report(8, ok, f"two snr-sweep runs, {n_rows} trial rows each, identical outside the time_s column")
    assert ok
