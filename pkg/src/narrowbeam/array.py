"""UPA geometry, steering vectors, synthetic multipath channels and received signals.

Angles enter the steering vectors through their sines, and the array response
is ordered column-major over the UPA: index ``n_y * n_z_total + n_z``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class UpaGeometry:
    """Uniform planar array with vertical subarrays of ``m`` antennas per RF chain."""

    n_y: int
    n_z: int
    m: int

    def __post_init__(self):
        for name in ("n_y", "n_z", "m"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        if self.n_z % self.m:
            raise ValueError(f"m={self.m} must divide n_z={self.n_z}")

    @property
    def n_r(self) -> int:
        return self.n_y * self.n_z

    @property
    def n_rf(self) -> int:
        return self.n_r // self.m

    @property
    def t(self) -> int:
        """RF chains per antenna column."""
        return self.n_z // self.m


@dataclass(frozen=True)
class VerticalPrior:
    """Prior elevation interval, stored as bounds on sin(elevation)."""

    sin_lo: float = -0.5
    sin_hi: float = 0.0

    def __post_init__(self):
        if not -1.0 <= self.sin_lo < self.sin_hi <= 1.0:
            raise ValueError(f"invalid vertical prior [{self.sin_lo}, {self.sin_hi}]")

    @classmethod
    def from_angles(cls, phi_lo: float, phi_hi: float) -> "VerticalPrior":
        return cls(float(np.sin(phi_lo)), float(np.sin(phi_hi)))

    @property
    def width(self) -> float:
        return self.sin_hi - self.sin_lo

    @property
    def center(self) -> float:
        return 0.5 * (self.sin_lo + self.sin_hi)


@dataclass(frozen=True)
class PathParams:
    gain: complex
    azimuth: float
    elevation: float


@dataclass(frozen=True)
class ChannelRealization:
    paths: tuple[PathParams, ...]
    h: np.ndarray = field(repr=False)

    @property
    def k_paths(self) -> int:
        return len(self.paths)


def steering_y(sin_theta, cos_phi, n_y: int) -> np.ndarray:
    """Horizontal steering vector, element k = exp(j*pi*k*sin_theta*cos_phi)."""
    if n_y < 1:
        raise ValueError("n_y must be >= 1")
    return np.exp(1j * np.pi * np.arange(n_y) * (sin_theta * cos_phi))


def steering_z(sin_phi, n_z: int) -> np.ndarray:
    """Vertical steering vector, element k = exp(j*pi*k*sin_phi)."""
    if n_z < 1:
        raise ValueError("n_z must be >= 1")
    return np.exp(1j * np.pi * np.arange(n_z) * sin_phi)


def array_response(theta: float, phi: float, geom: UpaGeometry) -> np.ndarray:
    """UPA response a_y(sin theta, cos phi) kron a_z(sin phi)."""
    return np.kron(
        steering_y(np.sin(theta), np.cos(phi), geom.n_y),
        steering_z(np.sin(phi), geom.n_z),
    )


def array_response_sin(sin_theta, sin_phi, geom: UpaGeometry) -> np.ndarray:
    """Batched array responses parameterized in the sine domain.

    Returns an ``(n_r, L)`` matrix whose columns are the responses at
    ``(sin_theta[l], sin_phi[l])``.
    """
    u = np.atleast_1d(np.asarray(sin_theta, dtype=float))
    v = np.atleast_1d(np.asarray(sin_phi, dtype=float))
    cos_phi = np.sqrt(np.clip(1.0 - v**2, 0.0, None))
    ay = np.exp(1j * np.pi * np.arange(geom.n_y)[:, None] * (u * cos_phi)[None, :])
    az = np.exp(1j * np.pi * np.arange(geom.n_z)[:, None] * v[None, :])
    return (ay[:, None, :] * az[None, :, :]).reshape(geom.n_r, -1)


def channel_from_paths(paths, geom: UpaGeometry) -> ChannelRealization:
    paths = tuple(paths)
    if not paths:
        return ChannelRealization(paths, np.zeros(geom.n_r, dtype=complex))
    gains = np.array([p.gain for p in paths], dtype=complex)
    u = np.sin([p.azimuth for p in paths])
    v = np.sin([p.elevation for p in paths])
    h = array_response_sin(u, v, geom) @ gains
    return ChannelRealization(paths, h)


def sample_channel(
    k_paths: int,
    geom: UpaGeometry,
    prior: VerticalPrior = VerticalPrior(),
    azimuth_range: tuple[float, float] = (-1.0, 1.0),
    gain_profile: str = "los",
    rng_seed=None,
) -> ChannelRealization:
    """Draw a geometric multipath channel.

    Elevations are uniform in sin(phi) over the prior, azimuths uniform in
    sin(theta) over ``azimuth_range``.  With ``gain_profile="los"`` the first
    path has unit gain with random phase and the remaining ``k_paths - 1`` are
    i.i.d. complex Gaussian scaled so their total power equals the LOS power.
    ``gain_profile="unit"`` gives every path gain 1.
    """
    if k_paths < 1:
        raise ValueError("k_paths must be >= 1")
    lo, hi = azimuth_range
    if not -1.0 <= lo < hi <= 1.0:
        raise ValueError(f"empty or invalid azimuth range {azimuth_range}")
    rng = np.random.default_rng(rng_seed)
    u = rng.uniform(lo, hi, k_paths)
    v = rng.uniform(prior.sin_lo, prior.sin_hi, k_paths)
    if gain_profile == "unit":
        gains = np.ones(k_paths, dtype=complex)
    elif gain_profile == "los":
        gains = np.empty(k_paths, dtype=complex)
        gains[0] = np.exp(2j * np.pi * rng.uniform())
        if k_paths > 1:
            nlos = (rng.standard_normal(k_paths - 1) + 1j * rng.standard_normal(k_paths - 1)) / np.sqrt(2)
            gains[1:] = nlos / np.sqrt(k_paths - 1)
    else:
        raise ValueError(f"unknown gain profile {gain_profile!r}")
    paths = [PathParams(complex(g), float(np.arcsin(a)), float(np.arcsin(b))) for g, a, b in zip(gains, u, v)]
    return channel_from_paths(paths, geom)


def received_signal(f_a, h: np.ndarray, noise_var: float, rng_seed=None) -> np.ndarray:
    """y = F_a h + w with w ~ CN(0, noise_var I)."""
    dense = getattr(f_a, "dense", f_a)
    h = np.asarray(h)
    if dense.shape[1] != h.shape[0]:
        raise ValueError(f"beam matrix has {dense.shape[1]} columns, channel has length {h.shape[0]}")
    if noise_var < 0:
        raise ValueError("noise_var must be nonnegative")
    y = dense @ h
    if noise_var > 0:
        rng = np.random.default_rng(rng_seed)
        n = dense.shape[0]
        y = y + np.sqrt(noise_var / 2) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    return y


CHANNEL_CSV_FIELDS = ("path", "gain_re", "gain_im", "azimuth", "elevation")


def write_channel_csv(channel: ChannelRealization, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CHANNEL_CSV_FIELDS)
        for i, p in enumerate(channel.paths):
            writer.writerow([i, repr(p.gain.real), repr(p.gain.imag), repr(p.azimuth), repr(p.elevation)])


def read_channel_csv(path, geom: UpaGeometry) -> ChannelRealization:
    with open(Path(path), newline="") as fh:
        rows = list(csv.DictReader(fh))
    rows.sort(key=lambda r: int(r["path"]))
    paths = [
        PathParams(complex(float(r["gain_re"]), float(r["gain_im"])), float(r["azimuth"]), float(r["elevation"]))
        for r in rows
    ]
    return channel_from_paths(paths, geom)
