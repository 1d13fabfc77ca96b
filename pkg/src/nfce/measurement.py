"""Hybrid-RIS uplink training: random-phase combining, DFT basis, noisy pilots."""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .geometry import ArrayGeometry, ChannelRealization


@dataclass(frozen=True)
class TrainingConfig:
    n_slots: int = 45
    n_rf: int = 5
    # None means every element is active (M = N_R)
    n_active: int | None = None
    tx_power: float = 1.0
    noise_var: float = 0.0

    def __post_init__(self):
        if self.n_slots < 1 or self.n_rf < 1:
            raise ValueError("n_slots and n_rf must be positive")
        if self.n_active is not None and self.n_active < self.n_rf:
            raise ValueError("n_active must be at least n_rf")
        if not self.tx_power > 0:
            raise ValueError("tx_power must be positive")
        if not self.noise_var >= 0:
            raise ValueError("noise_var must be nonnegative")

    def active_count(self, n_elements: int) -> int:
        m = n_elements if self.n_active is None else self.n_active
        if m > n_elements:
            raise ValueError(f"n_active={m} exceeds n_elements={n_elements}")
        if self.n_rf > m:
            raise ValueError(f"n_rf={self.n_rf} exceeds active elements {m}")
        return m


@dataclass(frozen=True)
class SensingOperator:
    """Stacked combiner ``W_M``, unitary DFT ``F`` and ``psi = W_M @ F``.

    ``per_slot`` holds, for each slot, the sorted active-element indices and
    the ``n_rf x M`` unit-modulus combiner acting on them.
    """

    stacked_combiner: np.ndarray
    dft: np.ndarray
    psi: np.ndarray
    per_slot: tuple[tuple[np.ndarray, np.ndarray], ...]

    @property
    def n_elements(self) -> int:
        return self.dft.shape[0]

    @property
    def n_measurements(self) -> int:
        return self.psi.shape[0]


@dataclass(frozen=True)
class ReceivedSignal:
    y: np.ndarray
    noise: np.ndarray


def dft_matrix(n: int) -> np.ndarray:
    """Unitary DFT matrix with entries ``exp(-2j pi a b / n) / sqrt(n)``."""
    if n < 1:
        raise ValueError("DFT size must be at least 1")
    k = np.arange(n)
    # reduce a*b mod n before the exponential to keep phases accurate for large n
    return np.exp(-2j * np.pi * (np.outer(k, k) % n) / n) / np.sqrt(n)


def build_sensing(
    config: TrainingConfig, geometry: ArrayGeometry, rng: np.random.Generator, dft: np.ndarray | None = None
) -> SensingOperator:
    """Draw per-slot element selections and random-phase combiners.

    A precomputed ``dft`` of matching size may be passed to skip rebuilding it.
    """
    n = geometry.n_elements
    m = config.active_count(n)
    if dft is None:
        dft = dft_matrix(n)
    elif dft.shape != (n, n):
        raise ValueError("dft size does not match the array")
    rows = config.n_slots * config.n_rf
    w_m = np.zeros((rows, n), dtype=complex)
    per_slot = []
    for t in range(config.n_slots):
        if m == n:
            sel = np.arange(n)
        else:
            sel = np.sort(rng.choice(n, size=m, replace=False))
        w_t = np.exp(1j * rng.uniform(0, 2 * np.pi, size=(config.n_rf, m)))
        w_m[t * config.n_rf:(t + 1) * config.n_rf, sel] = w_t
        per_slot.append((sel, w_t))
    for a in (w_m, dft):
        a.setflags(write=False)
    psi = w_m @ dft
    psi.setflags(write=False)
    return SensingOperator(w_m, dft, psi, tuple(per_slot))


def simulate_reception(
    h, op: SensingOperator, config: TrainingConfig, rng: np.random.Generator
) -> ReceivedSignal:
    """Per slot ``y_t = W_t M_t (sqrt(P) h + n_t)`` with ``n_t ~ CN(0, noise_var I)``."""
    if isinstance(h, ChannelRealization):
        h = h.h
    h = np.asarray(h)
    n = op.n_elements
    if h.shape != (n,):
        raise ValueError(f"channel length {h.shape} does not match {n} elements")
    if len(op.per_slot) != config.n_slots:
        raise ValueError("operator slot count does not match config")
    sigma = np.sqrt(config.noise_var / 2)
    element_noise = sigma * (
        rng.standard_normal((config.n_slots, n)) + 1j * rng.standard_normal((config.n_slots, n))
    )
    noise = np.concatenate(
        [w_t @ element_noise[t, sel] for t, (sel, w_t) in enumerate(op.per_slot)]
    )
    y = np.sqrt(config.tx_power) * (op.stacked_combiner @ h) + noise
    return ReceivedSignal(y=y, noise=noise)


def angular_coefficients(h: np.ndarray, op_or_dft) -> np.ndarray:
    """Angular-domain vector ``z = F^H h`` so that ``h = F z``."""
    dft = op_or_dft.dft if isinstance(op_or_dft, SensingOperator) else op_or_dft
    h = np.asarray(h)
    if h.shape != (dft.shape[0],):
        raise ValueError("channel length does not match the DFT size")
    return dft.conj().T @ h


def min_energy_window(z: np.ndarray, fraction: float = 0.95) -> tuple[int, int]:
    """Smallest circular window of bins holding ``fraction`` of ``|z|^2``.

    Returns ``(start, width)``; the window covers ``start, start+1, ...`` mod n.
    """
    e = np.abs(np.asarray(z)) ** 2
    n = e.size
    total = e.sum()
    if total == 0:
        return 0, 0
    target = fraction * total
    csum = np.concatenate([[0.0], np.cumsum(np.concatenate([e, e]))])
    for width in range(1, n + 1):
        sums = csum[width:width + n] - csum[:n]
        hit = np.flatnonzero(sums >= target * (1 - 1e-12))
        if hit.size:
            return int(hit[0]), width
    return 0, n


def two_window_fraction(z: np.ndarray, total_width: int) -> float:
    """Largest share of ``|z|^2`` held by two disjoint circular windows of combined width ``total_width``."""
    e = np.abs(np.asarray(z)) ** 2
    n = e.size
    total = e.sum()
    if total == 0:
        return 1.0
    if total_width >= n:
        return 1.0
    csum = np.concatenate([[0.0], np.cumsum(np.concatenate([e, e]))])

    def sums(w):
        return csum[w:w + n] - csum[:n]

    # gap[s1, s2] = (s2 - s1) mod n
    gap = (np.arange(n)[None, :] - np.arange(n)[:, None]) % n
    best = sums(total_width).max()
    for w1 in range(1, total_width // 2 + 1):
        w2 = total_width - w1
        valid = (gap >= w1) & (n - gap >= w2)
        if valid.any():
            both = sums(w1)[:, None] + sums(w2)[None, :]
            best = max(best, both[valid].max())
    return float(best / total)


def dump_complex_matrix(path, a: np.ndarray) -> None:
    """Write ``a`` as little-endian complex64, row-major, after a ``(rows, cols)`` u32 header.

    Vectors are written as a single column.
    """
    a = np.asarray(a)
    if a.ndim == 1:
        a = a[:, None]
    rows, cols = a.shape
    with open(path, "wb") as f:
        f.write(struct.pack("<II", rows, cols))
        f.write(np.ascontiguousarray(a, dtype="<c8").tobytes())


def load_complex_matrix(path) -> np.ndarray:
    with open(path, "rb") as f:
        rows, cols = struct.unpack("<II", f.read(8))
        data = np.frombuffer(f.read(), dtype="<c8")
    if data.size != rows * cols:
        raise ValueError(f"payload has {data.size} values, header says {rows}x{cols}")
    return data.reshape(rows, cols).astype(complex)
