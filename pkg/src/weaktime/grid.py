"""Uniform time lattice and its conjugate frequency lattice.

Conventions used everywhere in the package:

* states are stored as *function values* ``psi(t_j)`` and the inner product
  is ``<a|b> = sum(conj(a) * b) * dt``;
* the plane-wave overlap is ``<w|t> = exp(+i w t) / sqrt(2 pi)``, so
  ``psi(w) = <w|psi> = sum_j <w|t_j> psi(t_j) dt``;
* the ideal time eigenstate ``|t_j>`` has function value ``1/dt`` in bin j
  (coordinate ``1/sqrt(dt)`` in the orthonormal bin basis), hence
  ``<t_j|t_k> = delta_jk / dt``.

On this lattice the frequency transform is exactly unitary, so all
completeness relations hold to rounding error.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DimensionError

SQRT_2PI = np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class TemporalGrid:
    n_points: int = 256
    dt: float = 0.1
    t_start: float | None = None

    def __post_init__(self):
        if int(self.n_points) != self.n_points or self.n_points < 8:
            raise ValueError(f"n_points must be an integer >= 8, got {self.n_points}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        object.__setattr__(self, "n_points", int(self.n_points))
        object.__setattr__(self, "dt", float(self.dt))
        if self.t_start is None:
            # centred window with t = 0 on the lattice
            object.__setattr__(self, "t_start", -(self.n_points // 2) * self.dt)
        else:
            object.__setattr__(self, "t_start", float(self.t_start))

    @property
    def domega(self) -> float:
        return 2.0 * np.pi / (self.n_points * self.dt)

    @cached_property
    def times(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.n_points)

    @cached_property
    def omegas(self) -> np.ndarray:
        return -np.pi / self.dt + self.domega * np.arange(self.n_points)

    @cached_property
    def kernel(self) -> np.ndarray:
        """Matrix ``K[k, j] = <w_k|t_j>``."""
        phase = np.outer(self.omegas, self.times)
        return np.exp(1j * phase) / SQRT_2PI

    def to_dict(self) -> dict:
        return {"n_points": self.n_points, "dt": self.dt, "t_start": self.t_start}

    @classmethod
    def from_dict(cls, d: dict) -> "TemporalGrid":
        return cls(n_points=d["n_points"], dt=d["dt"], t_start=d.get("t_start"))

    def time_index(self, t: float, tol: float = 1e-9) -> int:
        """Index of the lattice point at time ``t``; ``t`` must be on-grid."""
        x = (t - self.t_start) / self.dt
        j = int(round(x))
        if abs(x - j) > tol or not 0 <= j < self.n_points:
            raise IndexError(f"time {t!r} is not a lattice point of {self}")
        return j

    def omega_index(self, omega: float, tol: float = 1e-9) -> int:
        x = (omega - self.omegas[0]) / self.domega
        k = int(round(x))
        if abs(x - k) > tol or not 0 <= k < self.n_points:
            raise IndexError(f"frequency {omega!r} is not a lattice point of {self}")
        return k

    def center_omega_index(self) -> int:
        """Index of the w = 0 bin."""
        return self.n_points // 2

    def _check_len(self, v):
        v = np.asarray(v)
        if v.shape[0] != self.n_points:
            raise DimensionError(f"expected leading dimension {self.n_points}, got {v.shape}")
        return v


def plane_wave_overlap(grid: TemporalGrid, omega_index: int, time_index: int) -> complex:
    """``<w|t> = exp(+i w t) / sqrt(2 pi)`` at lattice indices."""
    for name, idx in (("omega_index", omega_index), ("time_index", time_index)):
        if not 0 <= idx < grid.n_points:
            raise IndexError(f"{name}={idx} out of range [0, {grid.n_points})")
    return complex(np.exp(1j * grid.omegas[omega_index] * grid.times[time_index]) / SQRT_2PI)


def to_frequency(grid: TemporalGrid, amplitudes_in_time) -> np.ndarray:
    """Time-domain function values to frequency-domain ``<w_k|psi>``.

    Works on vectors or on matrices whose first axis is time.
    """
    a = grid._check_len(amplitudes_in_time)
    return (grid.kernel @ a) * grid.dt


def to_time(grid: TemporalGrid, amplitudes_in_frequency) -> np.ndarray:
    """Inverse of :func:`to_frequency`."""
    a = grid._check_len(amplitudes_in_frequency)
    return (grid.kernel.conj().T @ a) * grid.domega


def inner(grid: TemporalGrid, a, b) -> complex:
    return complex(np.vdot(a, b) * grid.dt)


def default_grid(signal_rms_width: float = 1.0, n_points: int = 256) -> TemporalGrid:
    """Grid sized for a Gaussian signal of the given rms width.

    The time window spans 20 rms widths; the signal spectrum (rms
    ``1/(2 width)``) must then occupy less than a quarter of the frequency
    window, which holds for ``n_points >= 64``.
    """
    dt = 20.0 * signal_rms_width / n_points
    # +-4 spectral rms against a quarter of the 2 pi / dt window
    if 8.0 / (2.0 * signal_rms_width) > np.pi / (2.0 * dt):
        raise ValueError(f"n_points={n_points} too small for anti-aliasing headroom")
    return TemporalGrid(n_points=n_points, dt=dt)
