"""Monte-Carlo trials, parameter sweeps, regularization search and CSV output."""

from __future__ import annotations

import csv
import dataclasses
import functools
import logging
import math
import struct
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import estimators as est
from .geometry import ArrayGeometry, GainModel, ScenarioConfig, sample_scenario, synthesize_channel
from .measurement import TrainingConfig, build_sensing, dft_matrix, simulate_reception
from .solvers import AdmmParams

log = logging.getLogger(__name__)

ESTIMATORS = ("tvr", "besvr", "pomp", "domp")
TRIAL_HEADER = ["trial", "estimator", "snr_db", "n_r", "n_rf", "nmse", "time_s", "seed"]
SUMMARY_HEADER = ["estimator", "axis_name", "axis_value", "mean_nmse", "mean_time_s", "n_trials"]

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class ExperimentConfig:
    """Every knob of an experiment, flat so it maps one-to-one onto config files.

    Regularization: with ``reg_mode = "scaled"`` the l1/TV weight handed to
    the solvers is ``reg * sqrt(noise_var * n_active) + reg_floor``, i.e.
    proportional to the per-measurement noise standard deviation; with
    ``"fixed"`` it is ``reg`` itself.
    """

    # array and scenario
    n_elements: int = 450
    carrier_hz: float = 28e9
    n_paths: int = 1
    distance_min: float = 10.0
    distance_max: float = 50.0
    gain_model: str = "unit_los"
    # training
    n_slots: int = 45
    n_rf: int = 5
    n_active: int | None = None
    tx_power: float = 1.0
    # experiment
    estimators: tuple[str, ...] = ("tvr", "besvr", "pomp", "domp")
    snr_db_list: tuple[float, ...] = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
    n_rf_list: tuple[int, ...] = (4, 6)
    n_elements_list: tuple[int, ...] = (150, 300, 450)
    n_trials: int = 200
    cpu_trials: int = 10
    cpu_snr_db: float = 20.0
    base_seed: int = 20240101
    threads: int = 1
    # estimator settings
    reg_mode: str = "scaled"
    reg_floor: float = 1e-3
    tvr_reg: float = 10.0
    tvr_penalty: float = 1.0
    tvr_max_iter: int | None = None
    besvr_reg: float = 10.0
    besvr_penalty: float = 1.0
    besvr_peaks: int = 30
    besvr_two_cluster: bool = False
    pomp_sparsity: int | None = None
    pomp_angles: int | None = None
    pomp_rings: int = 30
    pomp_min_distance: float = 10.0
    domp_sparsity: int = 30

    def __post_init__(self):
        for name in ("estimators", "snr_db_list", "n_rf_list", "n_elements_list"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        unknown = set(self.estimators) - set(ESTIMATORS)
        if unknown:
            raise ValueError(f"unknown estimator(s): {', '.join(sorted(unknown))}")
        if not self.estimators:
            raise ValueError("no estimators selected")
        if self.n_trials < 1 or self.cpu_trials < 1:
            raise ValueError("trial counts must be positive")
        if self.reg_mode not in ("scaled", "fixed"):
            raise ValueError("reg_mode must be 'scaled' or 'fixed'")
        if not 0 <= self.base_seed <= _MASK64:
            raise ValueError("base_seed must be an unsigned 64-bit integer")
        if self.threads < 1:
            raise ValueError("threads must be positive")
        # surface invalid values early
        self.geometry()
        self.scenario()
        self.training(0.0).active_count(self.n_elements)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def geometry(self) -> ArrayGeometry:
        return ArrayGeometry(self.n_elements, self.carrier_hz)

    def scenario(self) -> ScenarioConfig:
        return ScenarioConfig(
            n_paths=self.n_paths,
            distance_range_m=(self.distance_min, self.distance_max),
            gain_model=GainModel(self.gain_model),
        )

    def training(self, noise_var: float) -> TrainingConfig:
        return TrainingConfig(
            n_slots=self.n_slots,
            n_rf=self.n_rf,
            n_active=self.n_active,
            tx_power=self.tx_power,
            noise_var=noise_var,
        )

    def reg_weight(self, reg: float, noise_var: float) -> float:
        if self.reg_mode == "fixed":
            return reg
        m = self.n_elements if self.n_active is None else self.n_active
        return reg * math.sqrt(noise_var * m) + self.reg_floor


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    estimator: str
    snr_db: float
    n_r: int
    n_rf: int
    nmse: float
    time_s: float
    seed: int
    support_size: int = field(default=0, compare=False)


@dataclass(frozen=True)
class SummaryRow:
    estimator: str
    axis_name: str
    axis_value: str
    mean_nmse: float
    mean_time_s: float
    n_trials: int


@dataclass
class MetricsSummary:
    rows: list[SummaryRow] = field(default_factory=list)
    records: list[TrialRecord] = field(default_factory=list)

    def get(self, estimator: str, axis_value) -> SummaryRow:
        key = _fmt(axis_value) if not isinstance(axis_value, str) else axis_value
        for row in self.rows:
            if row.estimator == estimator and row.axis_value == key:
                return row
        raise KeyError((estimator, axis_value))

    def table(self) -> str:
        lines = [f"{'estimator':<10} {'axis':<14} {'value':>10} {'mean_nmse':>12} {'time_s':>10} {'n':>5}"]
        for r in self.rows:
            lines.append(
                f"{r.estimator:<10} {r.axis_name:<14} {r.axis_value:>10} "
                f"{r.mean_nmse:>12.4e} {r.mean_time_s:>10.4f} {r.n_trials:>5d}"
            )
        return "\n".join(lines)


def nmse(h_true, h_hat) -> float:
    """``||h_true - h_hat||^2 / ||h_true||^2``."""
    h_true = np.asarray(h_true)
    h_hat = np.asarray(h_hat)
    if h_true.shape != h_hat.shape:
        raise ValueError(f"shape mismatch {h_true.shape} vs {h_hat.shape}")
    denom = float(np.vdot(h_true, h_true).real)
    if denom == 0:
        raise ValueError("true channel is zero")
    diff = h_true - h_hat
    return float(np.vdot(diff, diff).real) / denom


def snr_to_noise_var(snr_db: float) -> float:
    """Noise variance for unit pilot power; ``inf`` dB maps to a noiseless link."""
    if math.isinf(snr_db) and snr_db > 0:
        return 0.0
    return 10.0 ** (-snr_db / 10.0)


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def derive_seed(base_seed: int, trial_index: int, *axis_values) -> int:
    """Fold the base seed, trial index and axis values through splitmix64.

    Axis values are folded by the bit pattern of their float64 value, so
    ``20`` and ``20.0`` give the same seed.
    """
    h = _splitmix64(base_seed & _MASK64)
    h = _splitmix64(h ^ (trial_index & _MASK64))
    for v in axis_values:
        bits = struct.unpack("<Q", struct.pack("<d", float(v)))[0]
        h = _splitmix64(h ^ bits)
    return h


@functools.lru_cache(maxsize=8)
def _dft(n: int) -> np.ndarray:
    f = dft_matrix(n)
    f.setflags(write=False)
    return f


@functools.lru_cache(maxsize=2)
def _polar_grid(n_elements, carrier_hz, n_angle, n_rings, min_distance) -> est.PolarGrid:
    return est.build_polar_grid(
        ArrayGeometry(n_elements, carrier_hz), n_angle=n_angle, n_rings=n_rings, min_distance=min_distance
    )


def polar_grid_for(config: ExperimentConfig) -> est.PolarGrid:
    return _polar_grid(
        config.n_elements, config.carrier_hz, config.pomp_angles, config.pomp_rings, config.pomp_min_distance
    )


def run_estimator(estimator_id: str, y, op, config: ExperimentConfig, noise_var: float) -> est.EstimateResult:
    """Dispatch one estimator on received pilots ``y`` and sensing operator ``op``."""
    p = config.tx_power
    if estimator_id == "tvr":
        params = AdmmParams(
            reg_weight=config.reg_weight(config.tvr_reg, noise_var),
            penalty=config.tvr_penalty,
            max_iter=config.tvr_max_iter or op.n_elements,
        )
        return est.tvr_estimate(y, op.psi, op.dft, params, tx_power=p)
    if estimator_id == "besvr":
        cfg = est.BesvrConfig(
            n_peaks=config.besvr_peaks,
            lasso=AdmmParams(reg_weight=config.reg_weight(config.besvr_reg, noise_var), penalty=config.besvr_penalty),
            two_cluster=config.besvr_two_cluster,
        )
        return est.besvr(y, op.psi, op.dft, cfg, tx_power=p)
    if estimator_id == "pomp":
        sparsity = config.pomp_sparsity or 2 * config.n_paths
        return est.pomp_estimate(y, op.stacked_combiner, polar_grid_for(config), sparsity, tx_power=p)
    if estimator_id == "domp":
        return est.domp_estimate(y, op.psi, op.dft, config.domp_sparsity, tx_power=p)
    raise ValueError(f"unknown estimator {estimator_id!r}")


def _simulate(config: ExperimentConfig, trial_index: int, seed: int, noise_var: float):
    # the scenario depends on the trial only, so every sweep point of a trial
    # sees the same user; combiner and noise depend on the full point seed
    scen_seed = derive_seed(config.base_seed, trial_index)
    sense_ss, noise_ss = np.random.SeedSequence(seed).spawn(2)
    geometry = config.geometry()
    paths = sample_scenario(config.scenario(), np.random.default_rng(scen_seed))
    channel = synthesize_channel(geometry, paths)
    training = config.training(noise_var)
    op = build_sensing(training, geometry, np.random.default_rng(sense_ss), dft=_dft(geometry.n_elements))
    rx = simulate_reception(channel, op, training, np.random.default_rng(noise_ss))
    return channel, op, rx


def run_trials_at(config: ExperimentConfig, snr_db: float, trial_index: int, estimator_ids=None) -> list[TrialRecord]:
    """Simulate one trial and run every requested estimator on the same data."""
    estimator_ids = config.estimators if estimator_ids is None else estimator_ids
    seed = derive_seed(config.base_seed, trial_index, snr_db, config.n_rf, config.n_elements)
    noise_var = snr_to_noise_var(snr_db)
    channel, op, rx = _simulate(config, trial_index, seed, noise_var)
    out = []
    for eid in estimator_ids:
        res = run_estimator(eid, rx.y, op, config, noise_var)
        out.append(
            TrialRecord(
                trial=trial_index,
                estimator=eid,
                snr_db=float(snr_db),
                n_r=config.n_elements,
                n_rf=config.n_rf,
                nmse=nmse(channel.h, res.h_hat),
                time_s=res.wall_time_s,
                seed=seed,
                support_size=int(len(res.support)),
            )
        )
    return out


def run_trial(config: ExperimentConfig, estimator_id: str, snr_db: float, trial_index: int) -> TrialRecord:
    return run_trials_at(config, snr_db, trial_index, (estimator_id,))[0]


def _run_many(config: ExperimentConfig, jobs, n_threads: int) -> list[TrialRecord]:
    """Run ``(config, snr_db, trial_index)`` jobs, possibly on a thread pool."""
    if n_threads <= 1:
        results = [run_trials_at(c, s, t) for c, s, t in jobs]
    else:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            results = list(pool.map(lambda job: run_trials_at(*job), jobs))
    return [r for batch in results for r in batch]


def _summarize(records, axis_name: str, axis_key) -> list[SummaryRow]:
    groups = defaultdict(list)
    for r in records:
        groups[(r.estimator, axis_key(r))].append(r)
    rows = []
    for (eid, axis_value), recs in groups.items():
        # fixed summation order keeps the means bit-stable under parallel runs
        recs = sorted(recs, key=lambda r: r.trial)
        rows.append(
            SummaryRow(
                estimator=eid,
                axis_name=axis_name,
                axis_value=axis_value,
                mean_nmse=math.fsum(r.nmse for r in recs) / len(recs),
                mean_time_s=math.fsum(r.time_s for r in recs) / len(recs),
                n_trials=len(recs),
            )
        )
    return rows


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)) or (isinstance(v, float) and v.is_integer()):
        return str(int(v))
    return repr(float(v))


def _sorted_records(records):
    order = {e: i for i, e in enumerate(ESTIMATORS)}
    return sorted(records, key=lambda r: (r.n_r, r.n_rf, r.snr_db, r.trial, order.get(r.estimator, 99)))


def sweep_snr(config: ExperimentConfig) -> MetricsSummary:
    if not config.snr_db_list:
        raise ValueError("snr_db_list is empty")
    jobs = [(config, s, t) for s in config.snr_db_list for t in range(config.n_trials)]
    records = _sorted_records(_run_many(config, jobs, config.threads))
    rows = _summarize(records, "snr_db", lambda r: _fmt(r.snr_db))
    return MetricsSummary(rows=_order_rows(rows, config), records=records)


def sweep_rf(config: ExperimentConfig) -> MetricsSummary:
    """Cross the RF-chain list with the SNR list; axis values read ``"n_rf:snr_db"``."""
    if not config.n_rf_list or not config.snr_db_list:
        raise ValueError("n_rf_list and snr_db_list must be non-empty")
    jobs = [
        (config.replace(n_rf=k), s, t)
        for k in config.n_rf_list
        for s in config.snr_db_list
        for t in range(config.n_trials)
    ]
    records = _sorted_records(_run_many(config, jobs, config.threads))
    rows = _summarize(records, "n_rf:snr_db", lambda r: f"{r.n_rf}:{_fmt(r.snr_db)}")
    return MetricsSummary(rows=_order_rows(rows, config), records=records)


def sweep_elements_time(config: ExperimentConfig) -> MetricsSummary:
    """CPU-time sweep over array sizes at ``cpu_snr_db`` with one path and ``cpu_trials`` trials."""
    if not config.n_elements_list:
        raise ValueError("n_elements_list is empty")
    jobs = [
        (config.replace(n_elements=n, n_paths=1), config.cpu_snr_db, t)
        for n in config.n_elements_list
        for t in range(config.cpu_trials)
    ]
    # timing runs stay sequential so trials do not compete for cores
    records = _sorted_records(_run_many(config, jobs, 1))
    rows = _summarize(records, "n_r", lambda r: _fmt(r.n_r))
    return MetricsSummary(rows=_order_rows(rows, config), records=records)


def _order_rows(rows, config):
    order = {e: i for i, e in enumerate(config.estimators)}

    def key(r):
        parts = [float(p) for p in r.axis_value.split(":")]
        return (order.get(r.estimator, 99), parts)

    return sorted(rows, key=key)


# held-out trials for regularization search live in their own seed domain
_HELDOUT_SALT = 0x5EED_C0DE_0BAD_F00D


def grid_search_reg(config: ExperimentConfig, estimator_id: str, grid, n_trials: int | None = None):
    """Pick the ``(reg, penalty)`` pair with the lowest mean NMSE on held-out trials.

    ``reg`` is interpreted per ``config.reg_mode``. Trials use a seed domain
    disjoint from the sweeps. Returns ``(best, table)`` with ``table`` a list
    of ``(reg, penalty, mean_nmse)`` in grid order; ties keep the earlier point.
    """
    if estimator_id not in ("tvr", "besvr"):
        raise ValueError("grid search applies to 'tvr' and 'besvr'")
    grid = [tuple(map(float, g)) for g in grid]
    if not grid:
        raise ValueError("empty grid")
    n_trials = n_trials or config.n_trials
    held = config.replace(base_seed=config.base_seed ^ _HELDOUT_SALT)
    data = []
    for s in config.snr_db_list:
        noise_var = snr_to_noise_var(s)
        for t in range(n_trials):
            seed = derive_seed(held.base_seed, t, s, held.n_rf, held.n_elements)
            data.append((noise_var, _simulate(held, t, seed, noise_var)))
    table = []
    for reg, pen in grid:
        cfg = held.replace(**{f"{estimator_id}_reg": reg, f"{estimator_id}_penalty": pen})
        errs = [nmse(ch.h, run_estimator(estimator_id, rx.y, op, cfg, nv).h_hat) for nv, (ch, op, rx) in data]
        table.append((reg, pen, math.fsum(errs) / len(errs)))
    best = min(range(len(table)), key=lambda i: (table[i][2], i))
    return (table[best][0], table[best][1]), table


def write_trials_csv(path, records) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(TRIAL_HEADER)
        for r in records:
            w.writerow([r.trial, r.estimator, _fmt(r.snr_db), r.n_r, r.n_rf, repr(r.nmse), repr(r.time_s), r.seed])


def read_trials_csv(path) -> list[TrialRecord]:
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    return [
        TrialRecord(
            trial=int(r["trial"]),
            estimator=r["estimator"],
            snr_db=float(r["snr_db"]),
            n_r=int(r["n_r"]),
            n_rf=int(r["n_rf"]),
            nmse=float(r["nmse"]),
            time_s=float(r["time_s"]),
            seed=int(r["seed"]),
        )
        for r in rows
    ]


def write_summary_csv(path, summary: MetricsSummary) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        for r in summary.rows:
            w.writerow([r.estimator, r.axis_name, r.axis_value, repr(r.mean_nmse), repr(r.mean_time_s), r.n_trials])


def read_summary_csv(path) -> list[SummaryRow]:
    with open(path, newline="", encoding="utf-8") as f:
        return [
            SummaryRow(
                estimator=r["estimator"],
                axis_name=r["axis_name"],
                axis_value=r["axis_value"],
                mean_nmse=float(r["mean_nmse"]),
                mean_time_s=float(r["mean_time_s"]),
                n_trials=int(r["n_trials"]),
            )
            for r in csv.DictReader(f)
        ]
