import numpy as np
import pytest

from nfce.geometry import ArrayGeometry, ScenarioConfig, sample_scenario, synthesize_channel
from nfce.measurement import (
    TrainingConfig,
    angular_coefficients,
    build_sensing,
    dft_matrix,
    dump_complex_matrix,
    load_complex_matrix,
    min_energy_window,
    simulate_reception,
    two_window_fraction,
)

GEO = ArrayGeometry(450, 28e9)


def brute_window(z, fraction=0.95):
    e = np.abs(z) ** 2
    n = e.size
    for w in range(1, n + 1):
        for s in range(n):
            if e[(s + np.arange(w)) % n].sum() >= fraction * e.sum() * (1 - 1e-12):
                return s, w


def brute_two_windows(z, total_width):
    e = np.abs(z) ** 2
    n = e.size
    best = 0.0
    for w1 in range(0, total_width + 1):
        w2 = total_width - w1
        for s1 in range(n):
            a = set((s1 + np.arange(w1)) % n)
            for s2 in range(n):
                b = set((s2 + np.arange(w2)) % n)
                if a & b:
                    continue
                best = max(best, e[list(a | b)].sum())
    return best / e.sum()


def test_dft_two_point():
    np.testing.assert_allclose(dft_matrix(2), np.array([[1, 1], [1, -1]]) / np.sqrt(2), atol=1e-15)


@pytest.mark.parametrize("n", [1, 5, 16, 450])
def test_dft_unitary(n):
    f = dft_matrix(n)
    np.testing.assert_allclose(f @ f.conj().T, np.eye(n), atol=1e-10)
    np.testing.assert_allclose(f[:, 0], np.ones(n) / np.sqrt(n))


def test_dft_matches_numpy_fft():
    x = np.random.default_rng(0).standard_normal(12) + 0j
    np.testing.assert_allclose(dft_matrix(12) @ x, np.fft.fft(x) / np.sqrt(12), atol=1e-12)


def test_dft_rejects_zero():
    with pytest.raises(ValueError):
        dft_matrix(0)


def test_default_training_dimensions():
    op = build_sensing(TrainingConfig(n_slots=45, n_rf=5), GEO, np.random.default_rng(0))
    assert op.psi.shape == (225, 450)
    assert op.stacked_combiner.shape == (225, 450)


def test_full_activation_covers_every_column():
    op = build_sensing(TrainingConfig(n_slots=3, n_rf=2), ArrayGeometry(20), np.random.default_rng(1))
    assert np.all(np.abs(op.stacked_combiner).sum(axis=0) > 0)


def test_sensing_deterministic():
    cfg = TrainingConfig(n_slots=4, n_rf=3, n_active=10)
    a = build_sensing(cfg, ArrayGeometry(32), np.random.default_rng(5))
    b = build_sensing(cfg, ArrayGeometry(32), np.random.default_rng(5))
    np.testing.assert_array_equal(a.psi, b.psi)


def test_sensing_structure_with_selection():
    g = ArrayGeometry(32)
    cfg = TrainingConfig(n_slots=4, n_rf=3, n_active=10)
    op = build_sensing(cfg, g, np.random.default_rng(2))
    np.testing.assert_allclose(op.psi, op.stacked_combiner @ op.dft)
    for t, (sel, w_t) in enumerate(op.per_slot):
        assert len(sel) == 10 and len(set(sel)) == 10
        np.testing.assert_allclose(np.abs(w_t), 1.0)
        block = op.stacked_combiner[3 * t:3 * (t + 1)]
        expected = np.zeros((3, 32), dtype=complex)
        expected[:, sel] = w_t
        np.testing.assert_array_equal(block, expected)


@pytest.mark.parametrize(
    "cfg",
    [TrainingConfig(n_active=40), TrainingConfig(n_rf=8, n_active=None)],
)
def test_sensing_rejects_oversized(cfg):
    with pytest.raises(ValueError):
        build_sensing(cfg, ArrayGeometry(7 if cfg.n_active is None else 32), np.random.default_rng(0))


def test_training_config_validation():
    with pytest.raises(ValueError):
        TrainingConfig(n_rf=5, n_active=4)
    with pytest.raises(ValueError):
        TrainingConfig(noise_var=-1)
    with pytest.raises(ValueError):
        TrainingConfig(tx_power=0)


def _setup(noise_var=0.0, tx_power=1.0, n=40, slots=5, rf=3, seed=0):
    g = ArrayGeometry(n)
    cfg = TrainingConfig(n_slots=slots, n_rf=rf, tx_power=tx_power, noise_var=noise_var)
    rng = np.random.default_rng(seed)
    h = synthesize_channel(g, sample_scenario(ScenarioConfig(n_paths=2), rng)).h
    op = build_sensing(cfg, g, rng)
    return g, cfg, h, op


def test_noiseless_reception():
    _, cfg, h, op = _setup(tx_power=4.0)
    rx = simulate_reception(h, op, cfg, np.random.default_rng(1))
    np.testing.assert_array_equal(rx.y, 2.0 * (op.stacked_combiner @ h))
    assert not np.any(rx.noise)


def test_signal_free_reception_is_combined_noise():
    g, cfg, h, op = _setup(noise_var=0.5)
    rx = simulate_reception(np.zeros(g.n_elements), op, cfg, np.random.default_rng(3))
    np.testing.assert_array_equal(rx.y, rx.noise)


def test_noise_is_colored_through_the_combiner():
    g, cfg, h, op = _setup(noise_var=0.5)
    rng = np.random.default_rng(4)
    ys = np.array([simulate_reception(np.zeros(g.n_elements), op, cfg, rng).y for _ in range(4000)])
    cov = ys.T @ ys.conj() / len(ys)
    # per-slot covariance sigma^2 W_t W_t^H, zero across slots
    w = op.stacked_combiner
    expected = np.zeros((w.shape[0], w.shape[0]), dtype=complex)
    for t in range(cfg.n_slots):
        rows = slice(t * cfg.n_rf, (t + 1) * cfg.n_rf)
        expected[rows, rows] = 0.5 * w[rows] @ w[rows].conj().T
    scale = np.abs(expected).max()
    assert np.abs(cov - expected).max() < 0.1 * scale


def test_noise_energy_linear_in_slots_and_variance():
    def mean_energy(slots, var):
        g, cfg, h, op = _setup(noise_var=var, slots=slots)
        rng = np.random.default_rng(9)
        return np.mean([np.linalg.norm(simulate_reception(h, op, cfg, rng).noise) ** 2 for _ in range(800)])

    base = mean_energy(4, 0.2)
    # E||noise||^2 = T * n_rf * M * sigma^2 for unit-modulus combiners
    assert base == pytest.approx(4 * 3 * 40 * 0.2, rel=0.05)
    assert mean_energy(8, 0.2) == pytest.approx(2 * base, rel=0.07)
    assert mean_energy(4, 0.6) == pytest.approx(3 * base, rel=0.07)


def test_reception_linear_in_channel():
    _, cfg, h, op = _setup(noise_var=0.1)
    a = simulate_reception(h, op, cfg, np.random.default_rng(7))
    b = simulate_reception(3 * h, op, cfg, np.random.default_rng(7))
    np.testing.assert_allclose(b.y - b.noise, 3 * (a.y - a.noise))


def test_reception_dimension_mismatch():
    _, cfg, h, op = _setup()
    with pytest.raises(ValueError):
        simulate_reception(h[:-1], op, cfg, np.random.default_rng(0))


def test_angular_coefficients_basis_vector():
    f = dft_matrix(16)
    e = np.zeros(16)
    e[5] = 1
    np.testing.assert_allclose(angular_coefficients(f @ e, f), e, atol=1e-14)


def test_angular_parseval_and_round_trip():
    h = synthesize_channel(GEO, sample_scenario(ScenarioConfig(n_paths=2), np.random.default_rng(3))).h
    f = dft_matrix(450)
    z = angular_coefficients(h, f)
    assert np.linalg.norm(z) == pytest.approx(np.linalg.norm(h), rel=1e-12)
    assert np.linalg.norm(f @ z - h) / np.linalg.norm(h) < 1e-10
    with pytest.raises(ValueError):
        angular_coefficients(h[:10], f)


def test_window_scan_matches_brute_force():
    rng = np.random.default_rng(11)
    for _ in range(5):
        z = rng.standard_normal(30) * (rng.random(30) < 0.3)
        if not z.any():
            continue
        assert min_energy_window(z)[1] == brute_window(z)[1]


def test_two_window_fraction_matches_brute_force():
    rng = np.random.default_rng(12)
    for _ in range(3):
        z = rng.standard_normal(14) * (rng.random(14) < 0.5)
        z[0] += 1
        for w in (1, 3, 5):
            assert two_window_fraction(z, w) == pytest.approx(brute_two_windows(z, w), rel=1e-12)


def test_single_path_block_sparsity():
    # width threshold N/4; calibrated by brute-force scan: 100/100 pass, widest 46 bins
    f = dft_matrix(450)
    rng = np.random.default_rng(2024)
    widths = []
    for _ in range(100):
        h = synthesize_channel(GEO, sample_scenario(ScenarioConfig(n_paths=1), rng)).h
        widths.append(min_energy_window(angular_coefficients(h, f))[1])
    assert sum(w <= 450 // 4 for w in widths) >= 90


def test_two_path_spectrum_has_blocks():
    f = dft_matrix(450)
    h = synthesize_channel(GEO, sample_scenario(ScenarioConfig(n_paths=2), np.random.default_rng(6))).h
    z = angular_coefficients(h, f)
    assert two_window_fraction(z, 450 // 4) >= 0.95
    # energy concentrated, yet spread across more than one bin
    assert 1 < min_energy_window(z)[1] < 450 // 4 or two_window_fraction(z, 2) < 0.95


def test_binary_dump_round_trip(tmp_path):
    _, cfg, h, op = _setup()
    path = tmp_path / "psi.bin"
    dump_complex_matrix(path, op.psi)
    raw = path.read_bytes()
    assert raw[:8] == np.array([15, 40], dtype="<u4").tobytes()
    assert len(raw) == 8 + 15 * 40 * 8
    np.testing.assert_allclose(load_complex_matrix(path), op.psi, rtol=1e-6, atol=1e-6)
    dump_complex_matrix(tmp_path / "y.bin", op.psi[:, 0])
    assert load_complex_matrix(tmp_path / "y.bin").shape == (15, 1)
