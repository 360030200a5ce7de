"""Forward model of the variable-strength arrival-time measurement.

The probe photon is rotated by ``theta`` from H (0 = no interaction,
pi/4 = full two-photon interference) and detected in the elliptical
polarization labelled by ``phi``. Detecting the probe conditions the
transmitted signal photon on the channel

    E(rho) = M rho M^+ + sin^2(theta)/8 (Tr rho - <Phi|rho|Phi>) |Phi><Phi|
    M      = cos(theta)/(2 sqrt 2) (I - exp(+i phi) tan(theta) |Phi><Phi|)

Phase convention: ``phi`` is the phase that appears as
``-1/4 sin cos Re(exp(+i phi) <w|t><t|rho|w>)`` in the frequency-resolved
coincidence rate. Working the polarization optics through (see
:func:`oracle_two_photon`) shows this corresponds to a probe filter
``(H + exp(-i phi) V)/sqrt 2``. With the filter written as
``(H + exp(+i phi) V)/sqrt 2`` every fringe comes out complex-conjugated and
the fringe-inversion formulas would return ``psi*``.

The closed-form count rates keep the three-term expansion
``<w|E(rho)|w>``; the squared-modulus form ``|<w|E(rho)|t>|^2`` is
dimensionally inconsistent with it and is not used.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError, MemoryCapError
from .grid import TemporalGrid
from .records import BROADBAND, RecordTable
from .states import (DensityMatrix, PureState, ReferencePulse, TwoPhotonPureState,
                     pure_to_density, reference_vector)

#: refuse pair computations whose (t1, t2) or (n1, n2) arrays exceed this
MAX_PAIR_ELEMENTS = 1 << 16


@dataclass(frozen=True)
class MeasurementSettings:
    theta: float
    phi: float
    reference: ReferencePulse

    def __post_init__(self):
        if not 0.0 <= self.theta <= np.pi / 4 + 1e-15:
            raise DomainError(f"theta={self.theta!r} outside [0, pi/4]")
        object.__setattr__(self, "phi", float(np.mod(self.phi, 2 * np.pi)))

    @property
    def cs(self):
        return np.cos(self.theta), np.sin(self.theta)


def _as_density(state) -> DensityMatrix:
    if isinstance(state, PureState):
        return pure_to_density(state)
    return state


def _ref_coords(grid, s: MeasurementSettings) -> np.ndarray:
    return reference_vector(s.reference, grid) * np.sqrt(grid.dt)


def _channel_coords(r, f, theta, phi):
    """E(r) in orthonormal coordinates for reference coords ``f``."""
    c, s = np.cos(theta), np.sin(theta)
    pr = np.outer(f, f.conj())
    m = (c / (2 * np.sqrt(2))) * (np.eye(len(f)) - np.exp(1j * phi) * np.tan(theta) * pr)
    out = m @ r @ m.conj().T
    back = np.trace(r) - np.vdot(f, r @ f)
    return out + (s**2 / 8) * back * pr


def measurement_operator_apply(rho, s: MeasurementSettings) -> DensityMatrix:
    """``M rho M^+`` (unnormalized)."""
    rho = _as_density(rho)
    g = rho.grid
    f = _ref_coords(g, s)
    c = np.cos(s.theta)
    m = (c / (2 * np.sqrt(2))) * (np.eye(g.n_points)
                                  - np.exp(1j * s.phi) * np.tan(s.theta) * np.outer(f, f.conj()))
    r = m @ rho.coords() @ m.conj().T
    return DensityMatrix(g, r / g.dt, validate=False)


def channel_apply(rho, s: MeasurementSettings) -> DensityMatrix:
    """Conditional (unnormalized) signal state after probe detection.

    Uses ``Tr rho`` in place of 1 in the back-action weight so the map is
    linear on arbitrary operators; the two agree for density matrices.
    """
    rho = _as_density(rho)
    g = rho.grid
    r = _channel_coords(rho.coords(), _ref_coords(g, s), s.theta, s.phi)
    return DensityMatrix(g, r / g.dt, validate=False)


def probe_detection_probability(rho, s: MeasurementSettings) -> float:
    """``1/8 - 1/4 sin cos cos(phi) <Phi|rho|Phi>`` for a normalized reference."""
    if s.reference.is_ideal:
        raise DomainError("probe detection probability needs a normalized (gaussian) reference; "
                          "the ideal delta reference has infinite norm")
    rho = _as_density(rho)
    phi_v = reference_vector(s.reference, rho.grid)
    proj = rho.expectation(phi_v).real
    c, sn = s.cs
    return float(0.125 - 0.25 * sn * c * np.cos(s.phi) * proj)


def coincidence_rate(rho, s: MeasurementSettings, omega_index: int) -> float:
    """Frequency-resolved coincidence rate (density in omega).

    ``1/8 cos^2 <w|rho|w> + 1/8 sin^2 |<w|Phi>|^2
    - 1/4 sin cos Re(exp(i phi) <w|Phi><Phi|rho|w>)``
    """
    rho = _as_density(rho)
    g = rho.grid
    if not 0 <= omega_index < g.n_points:
        raise IndexError(f"omega_index {omega_index} out of range")
    u = g.kernel[omega_index]
    phi_v = reference_vector(s.reference, g)
    w_phi = np.dot(u, phi_v) * g.dt                       # <w|Phi>
    rho_w = rho.rho @ u.conj() * g.dt                      # <t|rho|w>
    spec = np.dot(u, rho_w).real * g.dt                    # <w|rho|w>
    cross = w_phi * np.vdot(phi_v, rho_w) * g.dt           # <w|Phi><Phi|rho|w>
    c, sn = s.cs
    return float(0.125 * c**2 * spec + 0.125 * sn**2 * abs(w_phi) ** 2
                 - 0.25 * sn * c * np.real(np.exp(1j * s.phi) * cross))


def background_rate(s: MeasurementSettings, grid: TemporalGrid | None = None,
                    omega_index: int | None = None) -> float:
    """Back-action floor ``1/8 sin^2 |<w|Phi>|^2``.

    Frequency independent (``sin^2/(16 pi)``) for the ideal reference; the
    gaussian reference needs ``grid`` and ``omega_index``.
    """
    sn = np.sin(s.theta)
    if s.reference.is_ideal:
        return float(sn**2 / (16 * np.pi))
    if grid is None or omega_index is None:
        raise ValueError("gaussian-reference background depends on omega; pass grid and omega_index")
    phi_v = reference_vector(s.reference, grid)
    w_phi = np.dot(grid.kernel[omega_index], phi_v) * grid.dt
    return float(0.125 * sn**2 * abs(w_phi) ** 2)


# ----------------------------------------------------------- vectorized


def reference_matrix(grid: TemporalGrid, times, width: float = 0.0) -> np.ndarray:
    """Function values of reference pulses, one column per peak time."""
    times = np.asarray(times, dtype=float)
    if width == 0.0:
        idx = [grid.time_index(t) for t in times]
        f = np.zeros((grid.n_points, len(times)), dtype=complex)
        f[idx, np.arange(len(times))] = 1.0 / grid.dt
        return f
    if width < 2 * grid.dt:
        raise ValueError(f"reference width {width} below 2*dt = {2 * grid.dt}")
    tau = grid.times[:, None] - times[None, :]
    f = np.exp(-tau**2 / (4 * width**2)).astype(complex)
    return f / np.sqrt(np.sum(np.abs(f) ** 2, axis=0) * grid.dt)


def rate_components(rho, reference_times=None, reference_width: float = 0.0):
    """Phase-independent pieces of the coincidence rate on a (t, w) grid.

    Returns ``(spectrum[k], ref_spectrum[a, k], cross[a, k])`` with
    ``ref_spectrum = |<w|Phi_a>|^2`` and ``cross = <w|Phi_a><Phi_a|rho|w>``.
    """
    rho = _as_density(rho)
    g = rho.grid
    times = g.times if reference_times is None else np.asarray(reference_times, dtype=float)
    f = reference_matrix(g, times, reference_width)
    u = g.kernel
    rho_w = rho.rho @ u.conj().T * g.dt                    # [t, k] = <t|rho|w_k>
    spec = np.einsum("kj,jk->k", u, rho_w).real * g.dt
    w_phi = (u @ f).T * g.dt                               # [a, k] = <w_k|Phi_a>
    phi_rho_w = f.conj().T @ rho_w * g.dt                  # [a, k]
    return spec, np.abs(w_phi) ** 2, w_phi * phi_rho_w


def forward_rates(rho, thetas, phis, reference_times=None, omega_indices=None,
                  reference_width: float = 0.0) -> RecordTable:
    """Coincidence rates for every (theta, phi, t_ref, w) combination.

    Rows are ordered theta-major, then phi, t_ref, omega.
    """
    rho = _as_density(rho)
    g = rho.grid
    times = g.times if reference_times is None else np.asarray(reference_times, dtype=float)
    kk = np.arange(g.n_points) if omega_indices is None else np.asarray(omega_indices, dtype=int)
    spec, ref_spec, cross = rate_components(rho, times, reference_width)
    spec, ref_spec, cross = spec[kk], ref_spec[:, kk], cross[:, kk]
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    phis = np.mod(np.atleast_1d(np.asarray(phis, dtype=float)), 2 * np.pi)
    for th in thetas:
        MeasurementSettings(th, 0.0, ReferencePulse(0.0))  # domain check
    c = np.cos(thetas)[:, None, None, None]
    s = np.sin(thetas)[:, None, None, None]
    ph = np.exp(1j * phis)[None, :, None, None]
    rates = (0.125 * c**2 * spec[None, None, None, :]
             + 0.125 * s**2 * ref_spec[None, None]
             - 0.25 * s * c * np.real(ph * cross[None, None]))
    shape = rates.shape
    th_i, ph_i, t_i, k_i = np.meshgrid(np.arange(shape[0]), np.arange(shape[1]),
                                       np.arange(shape[2]), np.arange(shape[3]), indexing="ij")
    return RecordTable(omega_index=kk[k_i.ravel()], t_ref=times[t_i.ravel()],
                       phi=phis[ph_i.ravel()], theta=thetas[th_i.ravel()],
                       value=rates.ravel(), is_sampled=False)


def broadband_rates(rho, s_list) -> RecordTable:
    """Probe-only detection probabilities (no frequency resolution)."""
    rho = _as_density(rho)
    vals = [probe_detection_probability(rho, s) for s in s_list]
    return RecordTable(omega_index=np.full(len(s_list), BROADBAND),
                       t_ref=[s.reference.peak_time for s in s_list],
                       phi=[s.phi for s in s_list], theta=[s.theta for s in s_list],
                       value=vals, is_sampled=False)


# ---------------------------------------------------------------- oracle


@dataclass(frozen=True)
class OracleResult:
    joint: TwoPhotonPureState | None
    probability: float
    conditional: DensityMatrix


# PBS routing: (input side, polarization) -> (output port, amplitude).
# H is transmitted, V reflected with the symmetric-splitter phase i.
_PBS = {
    ("signal", 0): (1, 1.0), ("signal", 1): (2, 1j),
    ("reference", 0): (2, 1.0), ("reference", 1): (1, 1j),
}


def _oracle_pure(v, f, theta, filter_phase):
    n = len(v)
    signal_pol = np.array([1.0, 1.0]) / np.sqrt(2)
    ref_pol = np.array([np.cos(theta), np.sin(theta)])
    # amplitude tensor [t_port1, pol_port1, t_port2, pol_port2]
    out = np.zeros((n, 2, n, 2), dtype=complex)
    for ps in (0, 1):
        for pr in (0, 1):
            port_s, a_s = _PBS[("signal", ps)]
            port_r, a_r = _PBS[("reference", pr)]
            if port_s == port_r:
                continue
            amp = signal_pol[ps] * ref_pol[pr] * a_s * a_r
            if port_s == 1:
                out[:, ps, :, pr] += amp * np.outer(v, f)
            else:
                out[:, pr, :, ps] += amp * np.outer(f, v)
    filt1 = np.array([1.0, 1.0]) / np.sqrt(2)
    filt2 = np.array([1.0, np.exp(1j * filter_phase)]) / np.sqrt(2)
    return np.einsum("p,q,ipjq->ij", filt1.conj(), filt2.conj(), out)


def oracle_two_photon(state, s: MeasurementSettings, reference: PureState | None = None,
                      filter_phase: float | None = None) -> OracleResult:
    """Brute-force polarization-resolved model of the interferometer.

    Builds the two-photon amplitude after the PBS and both polarization
    filters by explicit routing of every polarization component, keeps the
    one-photon-per-port events, and traces out the probe's temporal state.
    Mixed inputs are handled as convex combinations of their eigenvectors.

    ``reference`` must be normalized; by default it is built from
    ``s.reference`` (gaussian mode only). ``filter_phase`` is the phase of
    the detected probe polarization ``(H + e^{i chi} V)/sqrt 2`` and
    defaults to ``-s.phi`` (see module docstring).
    """
    grid = state.grid
    if reference is None:
        if s.reference.is_ideal:
            raise DomainError("oracle needs a normalized reference pulse")
        reference = PureState(grid, reference_vector(s.reference, grid))
    if reference.grid != grid:
        raise DimensionError("reference and signal grids differ")
    chi = -s.phi if filter_phase is None else filter_phase
    f = reference.coords()
    if isinstance(state, PureState):
        out = _oracle_pure(state.coords(), f, s.theta, chi)
        r1 = out @ out.conj().T
        joint = TwoPhotonPureState(grid, grid, out / grid.dt, validate=False)
    else:
        w, vecs = np.linalg.eigh(0.5 * (state.coords() + state.coords().conj().T))
        r1 = np.zeros((grid.n_points, grid.n_points), dtype=complex)
        for p, vec in zip(w, vecs.T):
            if p <= 0:
                continue
            out = _oracle_pure(vec, f, s.theta, chi)
            r1 += p * (out @ out.conj().T)
        joint = None
    prob = float(np.trace(r1).real)
    return OracleResult(joint, prob, DensityMatrix(grid, r1 / grid.dt, validate=False))


# ------------------------------------------------------------ two photons


def _photon_terms(theta, phis, w, f):
    """Per-photon coefficients of the four channel terms.

    Term order: identity, P.X, X.P, Tr(X) P. Returns ``coef[term, a, m]``
    and the overlaps ``<w|Phi_a>``.
    """
    c, s = np.cos(theta), np.sin(theta)
    a = w.conj() @ f                                       # <w|Phi_a>
    e = np.exp(1j * np.asarray(phis))
    coef = np.empty((4, len(a), len(e)), dtype=complex)
    coef[0] = c**2
    coef[1] = -c * s * a[:, None] * e[None, :]
    coef[2] = -c * s * a.conj()[:, None] * e.conj()[None, :]
    coef[3] = (s**2 * np.abs(a) ** 2)[:, None]
    return coef, a


def _pair_overlaps(psi, w1, f1, w2, f2):
    """``G[term1, term2, a, b]`` contractions of |psi><psi| for each term pair."""
    t1, t2 = f1.shape[1], f2.shape[1]
    # <l1 l2|psi> for l1, l2 in {w, f}, broadcast to [a, b]
    amp = {
        ("w", "w"): np.full((t1, t2), w1.conj() @ psi @ w2.conj()),
        ("f", "w"): np.broadcast_to((f1.conj().T @ psi @ w2.conj())[:, None], (t1, t2)),
        ("w", "f"): np.broadcast_to((w1.conj() @ psi @ f2.conj())[None, :], (t1, t2)),
        ("f", "f"): f1.conj().T @ psi @ f2.conj(),
    }

    # left/right vector kinds per term: identity (w, w), P.X (f, w), X.P (w, f)
    kinds = [("w", "w"), ("f", "w"), ("w", "f")]
    g = np.empty((4, 4, t1, t2), dtype=complex)
    for i, (l1, r1) in enumerate(kinds):
        for j, (l2, r2) in enumerate(kinds):
            g[i, j] = amp[l1, l2] * amp[r1, r2].conj()
    # photon-1 trace: sum_e <e l2|psi><psi|e r2>
    v_w = psi @ w2.conj()                                   # [n1]
    v_f = psi @ f2.conj()                                   # [n1, b]
    vecs2 = {"w": np.broadcast_to(v_w[:, None], v_f.shape), "f": v_f}
    for j, (l2, r2) in enumerate(kinds):
        g[3, j] = np.broadcast_to(np.sum(vecs2[l2] * vecs2[r2].conj(), axis=0)[None, :], (t1, t2))
    u_w = w1.conj() @ psi                                   # [n2]
    u_f = f1.conj().T @ psi                                 # [a, n2]
    vecs1 = {"w": np.broadcast_to(u_w[None, :], u_f.shape), "f": u_f}
    for i, (l1, r1) in enumerate(kinds):
        g[i, 3] = np.broadcast_to(np.sum(vecs1[l1] * vecs1[r1].conj(), axis=1)[:, None], (t1, t2))
    g[3, 3] = np.sum(np.abs(psi) ** 2)
    return g


def two_photon_rate_array(psi2: TwoPhotonPureState, theta1: float, theta2: float,
                          phis1, phis2, omega1: int, omega2: int,
                          t1_times=None, t2_times=None, reference_widths=(0.0, 0.0),
                          max_elements: int = MAX_PAIR_ELEMENTS) -> np.ndarray:
    """Pair coincidence rates ``C[a, b, m1, m2]`` for reference times
    ``t1_times[a]``, ``t2_times[b]`` and probe phases ``phis1[m1]``,
    ``phis2[m2]`` at post-selected frequencies ``(omega1, omega2)``.

    Each photon passes its own single-photon channel; the rate is
    ``<w1 w2|(E1 x E2)(|psi2><psi2|)|w1 w2>``.
    """
    g1, g2 = psi2.grid_1, psi2.grid_2
    t1_times = g1.times if t1_times is None else np.asarray(t1_times, dtype=float)
    t2_times = g2.times if t2_times is None else np.asarray(t2_times, dtype=float)
    for size in (g1.n_points * g2.n_points, len(t1_times) * len(t2_times)):
        if size > max_elements:
            raise MemoryCapError(f"pair array of {size} elements exceeds cap {max_elements}")
    for th in (theta1, theta2):
        MeasurementSettings(th, 0.0, ReferencePulse(0.0))
    w1 = g1.kernel[omega1].conj() * np.sqrt(g1.dt)          # coords of |w1>
    w2 = g2.kernel[omega2].conj() * np.sqrt(g2.dt)
    f1 = reference_matrix(g1, t1_times, reference_widths[0]) * np.sqrt(g1.dt)
    f2 = reference_matrix(g2, t2_times, reference_widths[1]) * np.sqrt(g2.dt)
    c1, _ = _photon_terms(theta1, phis1, w1, f1)
    c2, _ = _photon_terms(theta2, phis2, w2, f2)
    g = _pair_overlaps(psi2.coords(), w1, f1, w2, f2)
    rates = np.einsum("xam,ybn,xyab->abmn", c1, c2, g) / 64.0
    return rates.real


def two_photon_coincidence_rate(psi2: TwoPhotonPureState, s1: MeasurementSettings,
                                s2: MeasurementSettings, omega1: int, omega2: int,
                                max_elements: int = MAX_PAIR_ELEMENTS) -> float:
    r = two_photon_rate_array(psi2, s1.theta, s2.theta, [s1.phi], [s2.phi], omega1, omega2,
                              [s1.reference.peak_time], [s2.reference.peak_time],
                              (s1.reference.width, s2.reference.width), max_elements)
    return float(r[0, 0, 0, 0])


def two_photon_rates(psi2: TwoPhotonPureState, theta1: float, theta2: float, phis1, phis2,
                     omega1: int, omega2: int, t1_times=None, t2_times=None,
                     reference_widths=(0.0, 0.0),
                     max_elements: int = MAX_PAIR_ELEMENTS) -> RecordTable:
    """Pair rates as a RecordTable (ordered t1, t2, phi1, phi2)."""
    g1, g2 = psi2.grid_1, psi2.grid_2
    t1_times = g1.times if t1_times is None else np.asarray(t1_times, dtype=float)
    t2_times = g2.times if t2_times is None else np.asarray(t2_times, dtype=float)
    phis1 = np.mod(np.asarray(phis1, dtype=float), 2 * np.pi)
    phis2 = np.mod(np.asarray(phis2, dtype=float), 2 * np.pi)
    r = two_photon_rate_array(psi2, theta1, theta2, phis1, phis2, omega1, omega2,
                              t1_times, t2_times, reference_widths, max_elements)
    a, b, m, n = np.meshgrid(*(np.arange(k) for k in r.shape), indexing="ij")
    size = r.size
    return RecordTable(omega_index=np.full(size, omega1), t_ref=t1_times[a.ravel()],
                       phi=phis1[m.ravel()], theta=np.full(size, theta1), value=r.ravel(),
                       is_sampled=False, omega2_index=np.full(size, omega2),
                       t2=t2_times[b.ravel()], phi2=phis2[n.ravel()],
                       theta2=np.full(size, theta2))
