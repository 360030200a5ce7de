"""Inverse pipeline: weak values, Kirkwood distributions, wavefunctions.

All reconstructions here assume rates taken with ideal (delta) reference
pulses. They are linear in the count data; nothing is fitted.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (HermiticityError, InsufficientFringeError, InsufficientSignalError,
                     NoCountsError, UndefinedWeakValueError)
from .grid import TemporalGrid, to_frequency
from .records import RecordTable
from .states import DensityMatrix, PureState, TwoPhotonPureState, pure_to_density

log = logging.getLogger(__name__)

#: post-selection densities below this are treated as zero
POST_SELECTION_FLOOR = 1e-14


@dataclass(frozen=True, eq=False)
class KirkwoodDistribution:
    """``K[j, k] = <w_k|t_j><t_j|rho|w_k>`` on the full lattice."""

    grid: TemporalGrid
    values: np.ndarray

    def normalization(self) -> complex:
        return complex(np.sum(self.values) * self.grid.dt * self.grid.domega)

    def time_marginal(self) -> np.ndarray:
        """Integral over frequency: ``<t|rho|t>``."""
        return np.sum(self.values, axis=1) * self.grid.domega

    def frequency_marginal(self) -> np.ndarray:
        """Integral over time: ``<w|rho|w>``."""
        return np.sum(self.values, axis=0) * self.grid.dt

    def to_dict(self) -> dict:
        return {"schema": "weaktime/kirkwood", "version": 1, "grid": self.grid.to_dict(),
                "re": self.values.real.tolist(), "im": self.values.imag.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "KirkwoodDistribution":
        return cls(TemporalGrid.from_dict(d["grid"]), np.array(d["re"]) + 1j * np.array(d["im"]))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))


def kirkwood_function(rho) -> KirkwoodDistribution:
    """Kirkwood distribution computed directly from a state."""
    if isinstance(rho, PureState):
        rho = pure_to_density(rho)
    g = rho.grid
    u = g.kernel
    rho_w = rho.rho @ u.conj().T * g.dt                    # <t_j|rho|w_k>
    return KirkwoodDistribution(g, u.T * rho_w)


def weak_value_time_projector(rho, t: float, omega_index: int) -> complex:
    """``<w|t><t|rho|w> / <w|rho|w>``, the weak value of ``|t><t|``
    post-selected on frequency ``w``."""
    if isinstance(rho, PureState):
        rho = pure_to_density(rho)
    g = rho.grid
    j = g.time_index(t)
    u = g.kernel[omega_index]
    rho_w = rho.rho @ u.conj() * g.dt
    spec = np.dot(u, rho_w).real * g.dt
    if spec < POST_SELECTION_FLOOR:
        raise UndefinedWeakValueError(
            f"post-selection density <w|rho|w> = {spec:.3e} below floor {POST_SELECTION_FLOOR}")
    return complex(u[j] * rho_w[j] / spec)


# --------------------------------------------------------- estimators


def _unique(values, what):
    u = np.unique(values)
    if len(u) != 1:
        raise ValueError(f"records mix several {what} values: {u}")
    return float(u[0])


def _phase_sum(records: RecordTable, phi: float):
    d = np.angle(np.exp(1j * (records.phi - phi)))
    sel = np.abs(d) < 1e-9
    if not np.any(sel):
        return None
    return float(np.sum(records.value[sel]))


def estimate_weak_value_broadband(records: RecordTable, theta: float | None = None) -> complex:
    """Meter reading from records at probe phases 0 and pi.

    Real part: ``(C_pi - C_0)/(C_pi + C_0) / (2 sin cos)``. If records at
    pi/2 and 3pi/2 are present the imaginary part is obtained the same way,
    otherwise it is NaN. Records at several frequencies are pooled.
    """
    theta = _unique(records.theta, "theta") if theta is None else theta
    pref = 2 * np.sin(theta) * np.cos(theta)

    def part(p_plus, p_minus):
        a, b = _phase_sum(records, p_plus), _phase_sum(records, p_minus)
        if a is None or b is None:
            return None
        if a + b <= 0:
            raise NoCountsError("no counts in the fringe pair")
        return (a - b) / (a + b) / pref

    re = part(np.pi, 0.0)
    if re is None:
        raise InsufficientFringeError("need records at phi = 0 and phi = pi")
    im = part(np.pi / 2, 3 * np.pi / 2)
    return complex(re, np.nan if im is None else im)


def subtracted_prefactor(theta: float) -> float:
    """Scale between the background-subtracted count ratio and Re(weak value).

    Composing the three-term rate with the back-action floor gives
    ``(C_pi - C_0)/(C_pi + C_0 - 2 C_inf) = 2 tan(theta) Re W``.
    """
    return 2 * np.tan(theta)


def background_from_records(records: RecordTable, grid: TemporalGrid, fraction: float = 0.1,
                            theta: float | None = None, max_spread: float = 0.1) -> float:
    """Back-action floor from the most detuned frequency bins.

    Averages ``(C_0 + C_pi)/2`` over the ``fraction`` of frequency bins
    farthest from the count-weighted spectral centroid. If those bins are not
    flat to within ``max_spread`` (relative) the analytic ideal-reference
    value ``sin^2/(16 pi)`` is returned instead, which needs ``theta``.
    """
    ks = np.unique(records.omega_index)
    per_k = np.array([np.mean(records.value[records.omega_index == k]) for k in ks])
    w = grid.omegas[ks]
    excess = per_k - per_k.min()
    centre = np.sum(w * excess) / np.sum(excess) if np.sum(excess) > 0 else 0.0
    n_sel = int(np.floor(fraction * len(ks)))
    if n_sel >= 2:
        far = np.argsort(-np.abs(w - centre))[:n_sel]
        vals = per_k[far]
        if np.std(vals) <= max_spread * np.mean(vals):
            return float(np.mean(vals))
    if theta is None:
        theta = _unique(records.theta, "theta")
    log.warning("frequency window too narrow for a data background; using analytic value")
    return float(np.sin(theta) ** 2 / (16 * np.pi))


def estimate_weak_value_subtracted(records: RecordTable, theta: float | None = None,
                                   background: float | None = None,
                                   grid: TemporalGrid | None = None,
                                   omega_index: int | None = None) -> float:
    """Real part of the weak value with back-action counts removed.

    Uses the phase-0 and phase-pi records of one (t, w) cell. ``background``
    is the rate at a signal-free frequency in the units of the records; if
    omitted it is estimated by :func:`background_from_records` from all
    frequency bins in ``records`` (``grid`` required), and ``omega_index``
    selects the target cell.
    """
    theta = _unique(records.theta, "theta") if theta is None else theta
    if background is None:
        if grid is None:
            raise ValueError("grid needed to estimate the background from records")
        background = background_from_records(records, grid, theta=theta)
    if omega_index is None:
        ks = np.unique(records.omega_index)
        if len(ks) != 1:
            raise ValueError("records span several frequencies; pass omega_index")
        cell = records
    else:
        cell = records.select(records.omega_index == omega_index)
    _unique(cell.t_ref, "reference time")
    c_pi, c_0 = _phase_sum(cell, np.pi), _phase_sum(cell, 0.0)
    if c_pi is None or c_0 is None:
        raise InsufficientFringeError("need records at phi = 0 and phi = pi")
    denom = c_pi + c_0 - 2 * background
    if denom <= 1e-10 * (c_pi + c_0):
        raise InsufficientSignalError(f"background-subtracted denominator {denom:.3e} too small")
    return float((c_pi - c_0) / denom / subtracted_prefactor(theta))


# ---------------------------------------------------------- fringe work


def _fringe_phases(phis, min_count=3):
    u = np.unique(np.round(np.mod(phis, 2 * np.pi), 12))
    m = len(u)
    if m < min_count:
        raise InsufficientFringeError(f"need at least {min_count} probe phases, got {m}")
    step = 2 * np.pi / m
    if np.max(np.abs(np.angle(np.exp(1j * (u - u[0] - step * np.arange(m)))))) > 1e-9:
        raise InsufficientFringeError(f"probe phases {u} are not equally spaced")
    return u


def _phase_slot(phis, u):
    d = np.angle(np.exp(1j * (np.mod(phis, 2 * np.pi)[:, None] - u[None, :])))
    slot = np.argmin(np.abs(d), axis=1)
    return slot


def _time_slot(grid, t):
    x = (np.asarray(t) - grid.t_start) / grid.dt
    j = np.rint(x).astype(int)
    if np.any(np.abs(x - j) > 1e-9) or np.any((j < 0) | (j >= grid.n_points)):
        raise IndexError("reference times are not lattice points")
    return j


def fringe_coefficients(records: RecordTable, grid: TemporalGrid, sign: int = -1) -> np.ndarray:
    """``(1/M) sum_m exp(sign i phi_m) C(w, t; phi_m)`` as an array ``[t, w]``.

    Every (t, w) cell must be covered by all M phases; cells without any
    records are NaN.
    """
    u = _fringe_phases(records.phi)
    m = len(u)
    j = _time_slot(grid, records.t_ref)
    k = records.omega_index
    slot = _phase_slot(records.phi, u)
    acc = np.zeros((grid.n_points, grid.n_points), dtype=complex)
    hits = np.zeros((grid.n_points, grid.n_points, m), dtype=int)
    np.add.at(acc, (j, k), np.exp(sign * 1j * u[slot]) * records.value)
    np.add.at(hits, (j, k, slot), 1)
    covered = hits.sum(axis=2) > 0
    if np.any(hits[covered] != 1):
        raise InsufficientFringeError("each (t, w) cell needs exactly one record per probe phase")
    out = acc / m
    out[~covered] = np.nan
    return out


def kirkwood_from_fringes(records: RecordTable, grid: TemporalGrid,
                          theta: float | None = None) -> KirkwoodDistribution:
    """Kirkwood distribution from a full (t, w) scan at M >= 3 probe phases.

    The first fringe harmonic equals ``-1/8 sin cos <w|t><t|rho|w>``; it is
    scaled by that factor and then renormalized by the real part of its own
    integral, so an unknown count scale drops out.
    """
    theta = _unique(records.theta, "theta") if theta is None else theta
    f = fringe_coefficients(records, grid)
    if np.any(np.isnan(f)):
        raise InsufficientFringeError("records do not cover every (t, w) cell")
    pref = -0.125 * np.sin(theta) * np.cos(theta)
    k = f / pref if pref != 0 else f
    total = np.sum(k).real * grid.dt * grid.domega
    if total == 0:
        raise InsufficientSignalError("Kirkwood integral vanishes")
    return KirkwoodDistribution(grid, k / total)


def reconstruct_density(k: KirkwoodDistribution, hermitian_tol: float | None = 1e-8) -> DensityMatrix:
    """``rho = sum K(t, w) |t><w| / <w|t> dt dw``.

    The raw result is returned without symmetrization. If ``hermitian_tol``
    is set, a relative anti-Hermitian part above it raises
    :class:`HermiticityError` (corrupted or inconsistent data).
    """
    g = k.grid
    u = g.kernel                                           # [k, j] = <w_k|t_j>
    a = k.values / u.T                                     # K / <w|t>
    rho = a @ u * g.domega                                 # sum_k a[t', k] <w_k|t''>
    if hermitian_tol is not None:
        scale = np.max(np.abs(rho))
        err = np.max(np.abs(rho - rho.conj().T))
        if err > hermitian_tol * scale:
            raise HermiticityError(f"reconstructed operator not Hermitian: "
                                   f"relative deviation {err / scale:.3e} > {hermitian_tol:.1e}")
    return DensityMatrix(g, rho, validate=False)


def _signal_floor_check(coef, measure, theta, what):
    c, s = np.cos(theta), np.sin(theta)
    # sum |coef|^2 measure = (c s / 8)^2 p / (2 pi)  with p the post-selection density
    p = np.sum(np.abs(coef) ** 2) * measure * 128 * np.pi / (c * s) ** 2
    if not p >= POST_SELECTION_FLOOR:
        raise InsufficientSignalError(f"{what} post-selection density {p:.3e} below floor")


def wavefunction_time(records: RecordTable, grid: TemporalGrid) -> PureState:
    """Temporal wavefunction from a t-scan at one post-selected frequency.

    ``psi(t) ~ sum_m exp(-i(w t + phi_m)) C(w, t; phi_m)``, normalized over t.
    Meaningful for pure input states only.
    """
    w_idx = np.unique(records.omega_index)
    if len(w_idx) != 1:
        raise ValueError("wavefunction_time needs records at a single frequency")
    theta = _unique(records.theta, "theta")
    f = fringe_coefficients(records, grid)[:, w_idx[0]]
    if np.any(np.isnan(f)):
        raise InsufficientFringeError("t-scan does not cover the full time lattice")
    _signal_floor_check(f, grid.dt, theta, "frequency")
    psi = np.exp(-1j * grid.omegas[w_idx[0]] * grid.times) * f
    psi = psi / np.sqrt(np.sum(np.abs(psi) ** 2) * grid.dt)
    return PureState(grid, psi)


def wavefunction_freq(records: RecordTable, grid: TemporalGrid) -> np.ndarray:
    """Spectral wavefunction ``psi(w_k)`` from a w-scan at one reference time.

    ``psi(w) ~ sum_m exp(+i(w t + phi_m)) C(w, t; phi_m)``, normalized with
    measure dw.
    """
    ts = np.unique(records.t_ref)
    if len(ts) != 1:
        raise ValueError("wavefunction_freq needs records at a single reference time")
    theta = _unique(records.theta, "theta")
    j = grid.time_index(ts[0])
    f = fringe_coefficients(records, grid, sign=+1)[j, :]
    if np.any(np.isnan(f)):
        raise InsufficientFringeError("w-scan does not cover the full frequency lattice")
    _signal_floor_check(f, grid.domega, theta, "time")
    psi = np.exp(1j * grid.omegas * grid.times[j]) * f
    return psi / np.sqrt(np.sum(np.abs(psi) ** 2) * grid.domega)


def retrieval_consistency(records: RecordTable, grid: TemporalGrid) -> float:
    """Purity diagnostic for wavefunction retrieval.

    Retrieves ``psi(t)`` separately at every post-selected frequency present
    in ``records`` and returns the smallest pairwise ``|<psi_a|psi_b>|^2``.
    A pure input gives 1; a mixed input generally gives less, since the
    t-dependence then changes with the post-selected frequency.
    """
    ks = np.unique(records.omega_index)
    if len(ks) < 2:
        raise ValueError("need at least two post-selected frequencies")
    psis = [wavefunction_time(records.select(records.omega_index == k), grid) for k in ks]
    worst = 1.0
    for a in range(len(psis)):
        for b in range(a + 1, len(psis)):
            ov = abs(np.vdot(psis[a].amp, psis[b].amp) * grid.dt) ** 2
            worst = min(worst, ov)
    return float(worst)


def two_photon_wavefunction(records: RecordTable, grid_1: TemporalGrid,
                            grid_2: TemporalGrid) -> TwoPhotonPureState:
    """Pair amplitude ``psi2(t1, t2)`` from a double fringe scan at fixed
    post-selected frequencies ``(w1, w2)``."""
    if not records.is_pair:
        raise ValueError("pair records required")
    k1 = np.unique(records.omega_index)
    k2 = np.unique(records.omega2_index)
    if len(k1) != 1 or len(k2) != 1:
        raise ValueError("records must share one post-selected (w1, w2)")
    th1 = _unique(records.theta, "theta")
    th2 = _unique(records.theta2, "theta2")
    u1 = _fringe_phases(records.phi)
    u2 = _fringe_phases(records.phi2)
    j1 = _time_slot(grid_1, records.t_ref)
    j2 = _time_slot(grid_2, records.t2)
    s1 = _phase_slot(records.phi, u1)
    s2 = _phase_slot(records.phi2, u2)
    n1, n2 = grid_1.n_points, grid_2.n_points
    acc = np.zeros((n1, n2), dtype=complex)
    hits = np.zeros((n1, n2, len(u1), len(u2)), dtype=int)
    np.add.at(acc, (j1, j2), np.exp(-1j * (u1[s1] + u2[s2])) * records.value)
    np.add.at(hits, (j1, j2, s1, s2), 1)
    if np.any(hits != 1):
        raise InsufficientFringeError("double scan must cover every (t1, t2, phi1, phi2) once")
    acc /= len(u1) * len(u2)
    c = np.cos(th1) * np.sin(th1) * np.cos(th2) * np.sin(th2)
    p = np.sum(np.abs(acc) ** 2) * grid_1.dt * grid_2.dt * (64 * 2 * np.pi) ** 2 / c**2
    if not p >= POST_SELECTION_FLOOR:
        raise InsufficientSignalError(f"joint post-selection density {p:.3e} below floor")
    w1 = grid_1.omegas[k1[0]]
    w2 = grid_2.omegas[k2[0]]
    psi = np.exp(-1j * (w1 * grid_1.times[:, None] + w2 * grid_2.times[None, :])) * acc
    psi /= np.sqrt(np.sum(np.abs(psi) ** 2) * grid_1.dt * grid_2.dt)
    return TwoPhotonPureState(grid_1, grid_2, psi)


def max_phase_aligned_error(candidate, reference) -> float:
    """``max |candidate - exp(i a) reference|`` with the phase fixed at the
    largest component of ``reference``."""
    from .states import align_global_phase

    return float(np.max(np.abs(align_global_phase(np.asarray(candidate), np.asarray(reference))
                               - np.asarray(reference))))


def spectral_wavefunction(state: PureState) -> np.ndarray:
    return to_frequency(state.grid, state.amp)
