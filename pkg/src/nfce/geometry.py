"""Near-field ULA geometry, steering vectors and multi-path channel synthesis.

Element ``n`` of an ``N``-element ULA sits at ``(0, delta_n * d)`` with
``delta_n = (2n - N + 1) / 2``; a point source at polar ``(r, phi)`` sits at
``(r cos phi, r sin phi)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform linear array.

    Parameters
    ----------
    n_elements : int
        Number of RIS elements.
    carrier_hz : float
        Carrier frequency.
    spacing : float, optional
        Inter-element spacing in meters; half a wavelength when omitted.
    """

    n_elements: int
    carrier_hz: float = 28e9
    spacing: float | None = None

    def __post_init__(self):
        if self.n_elements < 1:
            raise ValueError("n_elements must be positive")
        if not self.carrier_hz > 0:
            raise ValueError("carrier_hz must be positive")
        if self.spacing is None:
            object.__setattr__(self, "spacing", self.wavelength / 2)
        elif not self.spacing > 0:
            raise ValueError("spacing must be positive")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_hz

    @property
    def wavenumber(self) -> float:
        return 2 * np.pi * self.carrier_hz / SPEED_OF_LIGHT

    @property
    def element_offsets(self) -> np.ndarray:
        n = np.arange(self.n_elements)
        return (2 * n - self.n_elements + 1) / 2 * self.spacing

    @property
    def aperture(self) -> float:
        return (self.n_elements - 1) * self.spacing


class PathKind(str, enum.Enum):
    LOS = "LOS"
    NLOS = "NLOS"


@dataclass(frozen=True)
class NearFieldPath:
    gain: complex
    angle_rad: float
    distance_m: float
    kind: PathKind = PathKind.LOS

    def __post_init__(self):
        if not (np.isfinite(self.distance_m) and self.distance_m > 0):
            raise ValueError(f"distance must be positive, got {self.distance_m}")
        if not (np.isfinite(self.angle_rad) and -np.pi <= self.angle_rad <= np.pi):
            raise ValueError(f"angle must lie in [-pi, pi], got {self.angle_rad}")


@dataclass(frozen=True)
class ChannelRealization:
    h: np.ndarray
    paths: tuple[NearFieldPath, ...]


class GainModel(str, enum.Enum):
    # LOS unit modulus with random phase, NLOS ~ CN(0, 0.1)
    UNIT_LOS = "unit_los"
    # every path ~ CN(0, 1)
    GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class ScenarioConfig:
    n_paths: int = 1
    distance_range_m: tuple[float, float] = (10.0, 50.0)
    angle_range_rad: tuple[float, float] = (-np.pi, np.pi)
    gain_model: GainModel = GainModel.UNIT_LOS
    nlos_variance: float = 0.1

    def __post_init__(self):
        if self.n_paths not in (1, 2):
            raise ValueError("n_paths must be 1 or 2")
        lo, hi = self.distance_range_m
        if not (0 < lo <= hi < np.inf):
            raise ValueError(f"bad distance range {self.distance_range_m}")
        lo, hi = self.angle_range_rad
        if not (-np.pi <= lo <= hi <= np.pi):
            raise ValueError(f"bad angle range {self.angle_range_rad}")
        object.__setattr__(self, "gain_model", GainModel(self.gain_model))


def element_distance(geometry: ArrayGeometry, path: NearFieldPath, n: int) -> float:
    """Distance from element ``n`` to the point ``(path.distance_m, path.angle_rad)``."""
    if not 0 <= n < geometry.n_elements:
        raise IndexError(f"element index {n} out of range [0, {geometry.n_elements})")
    return float(_element_distances(geometry, path.angle_rad, path.distance_m)[n])


def _element_distances(geometry, angle_rad, distance_m):
    offsets = geometry.element_offsets
    r = distance_m
    return np.sqrt(r**2 + offsets**2 - 2 * r * offsets * np.sin(angle_rad))


def steering_vector(geometry: ArrayGeometry, angle_rad: float, distance_m: float) -> np.ndarray:
    """Spherical-wavefront array response, entry ``n`` = ``exp(-j k (r_n - r))``."""
    if not (np.isfinite(angle_rad) and np.isfinite(distance_m)):
        raise ValueError("angle and distance must be finite")
    if distance_m <= 0:
        raise ValueError("distance must be positive")
    r_n = _element_distances(geometry, angle_rad, distance_m)
    return np.exp(-1j * geometry.wavenumber * (r_n - distance_m))


def far_field_steering_vector(geometry: ArrayGeometry, angle_rad: float) -> np.ndarray:
    """Planar-wavefront limit of :func:`steering_vector` as the distance grows."""
    return np.exp(1j * geometry.wavenumber * geometry.element_offsets * np.sin(angle_rad))


def synthesize_channel(geometry: ArrayGeometry, paths) -> ChannelRealization:
    paths = tuple(paths)
    if not paths:
        raise ValueError("at least one path is required")
    h = np.zeros(geometry.n_elements, dtype=complex)
    for p in paths:
        h += p.gain * steering_vector(geometry, p.angle_rad, p.distance_m)
    return ChannelRealization(h=h, paths=paths)


def sample_scenario(config: ScenarioConfig, rng: np.random.Generator) -> list[NearFieldPath]:
    """Draw random paths: uniform distances and angles, angles sorted ascending.

    The first path is the LOS path, the second (if any) the NLOS one.
    """
    n = config.n_paths
    distances = rng.uniform(*config.distance_range_m, size=n)
    angles = np.sort(rng.uniform(*config.angle_range_rad, size=n))
    if config.gain_model is GainModel.UNIT_LOS:
        gains = np.empty(n, dtype=complex)
        gains[0] = np.exp(1j * rng.uniform(0, 2 * np.pi))
        if n > 1:
            gains[1:] = np.sqrt(config.nlos_variance / 2) * (
                rng.standard_normal(n - 1) + 1j * rng.standard_normal(n - 1)
            )
    else:
        gains = np.sqrt(0.5) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    kinds = [PathKind.LOS] + [PathKind.NLOS] * (n - 1)
    return [
        NearFieldPath(complex(g), float(a), float(r), k)
        for g, a, r, k in zip(gains, angles, distances, kinds)
    ]


def rayleigh_distance(geometry: ArrayGeometry) -> float:
    """Near-field boundary ``2 D^2 / lambda`` for aperture ``D``."""
    return 2 * geometry.aperture**2 / geometry.wavelength
