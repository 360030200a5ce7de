"""Single-photon temporal states, density matrices and photon pairs."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import AliasingError, DegenerateStateError, DimensionError, DomainError
from .grid import TemporalGrid

STATE_SCHEMA = "weaktime/state"
STATE_SCHEMA_VERSION = 1

_EDGE_FLOOR = 1e-8


@dataclass(frozen=True, eq=False)
class PureState:
    grid: TemporalGrid
    amp: np.ndarray
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        amp = np.asarray(self.amp, dtype=complex)
        if amp.shape != (self.grid.n_points,):
            raise DimensionError(f"amplitude shape {amp.shape} != ({self.grid.n_points},)")
        object.__setattr__(self, "amp", amp)
        if self.validate:
            norm = self.norm2()
            if abs(norm - 1.0) > 1e-10:
                raise ValueError(f"state not normalized: sum|amp|^2 dt = {norm!r}")

    def norm2(self) -> float:
        return float(np.sum(np.abs(self.amp) ** 2) * self.grid.dt)

    def coords(self) -> np.ndarray:
        """Components in the orthonormal bin basis."""
        return self.amp * np.sqrt(self.grid.dt)

    def spectrum(self) -> np.ndarray:
        from .grid import to_frequency

        return to_frequency(self.grid, self.amp)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Density operator as the kernel ``rho(t_j, t_k)``.

    Trace and products carry the measure: ``Tr rho = sum_j rho_jj dt``.
    Set ``validate=False`` for unnormalized channel outputs and raw
    reconstructions.
    """

    grid: TemporalGrid
    rho: np.ndarray
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=complex)
        n = self.grid.n_points
        if rho.shape != (n, n):
            raise DimensionError(f"density shape {rho.shape} != ({n}, {n})")
        object.__setattr__(self, "rho", rho)
        if self.validate:
            r = self.coords()
            if np.max(np.abs(r - r.conj().T)) > 1e-12:
                raise ValueError("density matrix is not Hermitian")
            tr = np.trace(r).real
            if abs(tr - 1.0) > 1e-10:
                raise ValueError(f"density matrix trace {tr!r} != 1")
            lmin = np.linalg.eigvalsh(0.5 * (r + r.conj().T))[0]
            if lmin < -1e-10:
                raise ValueError(f"density matrix not positive semidefinite (min eig {lmin:.3e})")

    def coords(self) -> np.ndarray:
        """Matrix in the orthonormal bin basis (``rho * dt``)."""
        return self.rho * self.grid.dt

    def trace(self) -> complex:
        return complex(np.trace(self.rho) * self.grid.dt)

    def purity(self) -> float:
        r = self.coords()
        return float(np.real(np.sum(r * r.T)))

    def expectation(self, vec) -> complex:
        """``<v|rho|v>`` for a function-valued vector ``v``."""
        dt = self.grid.dt
        return complex(np.vdot(vec, self.rho @ vec) * dt * dt)


@dataclass(frozen=True)
class ReferencePulse:
    peak_time: float
    width: float = 0.0
    shape: str = "ideal"

    def __post_init__(self):
        if self.shape not in ("ideal", "gaussian"):
            raise ValueError(f"unknown reference shape {self.shape!r}")
        if self.shape == "ideal" and self.width != 0:
            raise ValueError("ideal reference must have width 0")
        if self.shape == "gaussian" and not self.width > 0:
            raise ValueError("gaussian reference needs a positive width")

    @property
    def is_ideal(self) -> bool:
        return self.shape == "ideal"


@dataclass(frozen=True, eq=False)
class TwoPhotonPureState:
    grid_1: TemporalGrid
    grid_2: TemporalGrid
    amp: np.ndarray
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        amp = np.asarray(self.amp, dtype=complex)
        shape = (self.grid_1.n_points, self.grid_2.n_points)
        if amp.shape != shape:
            raise DimensionError(f"pair amplitude shape {amp.shape} != {shape}")
        object.__setattr__(self, "amp", amp)
        if self.validate:
            norm = float(np.sum(np.abs(amp) ** 2) * self.grid_1.dt * self.grid_2.dt)
            if abs(norm - 1.0) > 1e-10:
                raise ValueError(f"pair state not normalized: {norm!r}")

    def coords(self) -> np.ndarray:
        return self.amp * np.sqrt(self.grid_1.dt * self.grid_2.dt)


# ---------------------------------------------------------------- builders


def _normalize(grid, amp):
    norm = np.sqrt(np.sum(np.abs(amp) ** 2) * grid.dt)
    return amp / norm


def _check_edges(amp, what="pulse"):
    peak = np.max(np.abs(amp))
    edge = max(abs(amp[0]), abs(amp[-1]))
    if edge > _EDGE_FLOOR * peak:
        raise AliasingError(f"{what} envelope at window edge is {edge / peak:.2e} of peak (> 1e-8)")


def gaussian_pulse(grid: TemporalGrid, peak_time: float, width: float,
                   chirp: float = 0.0, carrier: float = 0.0) -> PureState:
    """Gaussian pulse; ``width`` is the rms width of ``|psi(t)|^2``.

    ``chirp`` multiplies ``(t - peak)^2`` in the phase, ``carrier`` is the
    centre frequency.
    """
    if width < 2 * grid.dt:
        raise ValueError(f"width {width} below resolvable limit 2*dt = {2 * grid.dt}")
    tau = grid.times - peak_time
    amp = np.exp(-tau**2 / (4 * width**2) + 1j * chirp * tau**2 + 1j * carrier * grid.times)
    _check_edges(amp)
    return PureState(grid, _normalize(grid, amp))


def superpose(states) -> PureState:
    """Normalized weighted sum of ``(PureState, weight)`` pairs."""
    states = list(states)
    if not states:
        raise DegenerateStateError("empty superposition")
    grid = states[0][0].grid
    total = np.zeros(grid.n_points, dtype=complex)
    for s, w in states:
        if s.grid != grid:
            raise DimensionError("superposed states live on different grids")
        total = total + w * s.amp
    norm2 = np.sum(np.abs(total) ** 2) * grid.dt
    scale = sum(abs(w) ** 2 * s.norm2() for s, w in states)
    if norm2 <= 1e-24 * scale:
        raise DegenerateStateError("superposition cancels to zero")
    return PureState(grid, total / np.sqrt(norm2))


def pure_to_density(s: PureState) -> DensityMatrix:
    return DensityMatrix(s.grid, np.outer(s.amp, s.amp.conj()))


def mix(states) -> DensityMatrix:
    """Convex combination of ``(DensityMatrix, probability)`` pairs."""
    states = list(states)
    probs = np.array([p for _, p in states], dtype=float)
    if np.any(probs < 0):
        raise DomainError("negative mixing probability")
    if abs(probs.sum() - 1.0) > 1e-12:
        raise DomainError(f"mixing probabilities sum to {probs.sum()!r}")
    grid = states[0][0].grid
    rho = np.zeros((grid.n_points, grid.n_points), dtype=complex)
    for (d, p) in states:
        if d.grid != grid:
            raise DimensionError("mixed states live on different grids")
        rho = rho + p * d.rho
    return DensityMatrix(grid, rho)


def gaussian_entangled_pair(grid_1: TemporalGrid, grid_2: TemporalGrid,
                            sigma_minus: float, sigma_plus: float) -> TwoPhotonPureState:
    """Double-Gaussian pair amplitude.

    ``psi2 ~ exp(-(t1-t2)^2/(4 s-^2)) exp(-(t1+t2)^2/(4 s+^2))``; separable
    when ``sigma_minus == sigma_plus``.
    """
    for g in (grid_1, grid_2):
        if min(sigma_minus, sigma_plus) < 2 * g.dt:
            raise ValueError("pair widths not resolvable on grid")
    t1 = grid_1.times[:, None]
    t2 = grid_2.times[None, :]
    amp = np.exp(-(t1 - t2) ** 2 / (4 * sigma_minus**2) - (t1 + t2) ** 2 / (4 * sigma_plus**2))
    peak = np.max(np.abs(amp))
    edge = max(np.abs(amp[[0, -1], :]).max(), np.abs(amp[:, [0, -1]]).max())
    if edge > _EDGE_FLOOR * peak:
        raise AliasingError(f"pair envelope at window edge is {edge / peak:.2e} of peak")
    norm = np.sqrt(np.sum(np.abs(amp) ** 2) * grid_1.dt * grid_2.dt)
    return TwoPhotonPureState(grid_1, grid_2, amp / norm)


def product_pair(a: PureState, b: PureState) -> TwoPhotonPureState:
    return TwoPhotonPureState(a.grid, b.grid, np.outer(a.amp, b.amp))


def reference_vector(ref: ReferencePulse, grid: TemporalGrid) -> np.ndarray:
    """Function values of the reference pulse on ``grid``.

    Ideal mode gives the lattice delta (value ``1/dt`` at the peak bin);
    gaussian mode gives a normalized transform-limited pulse, renormalized
    on the grid if it is clipped by the window.
    """
    if ref.is_ideal:
        v = np.zeros(grid.n_points, dtype=complex)
        v[grid.time_index(ref.peak_time)] = 1.0 / grid.dt
        return v
    if ref.width < 2 * grid.dt:
        raise ValueError(f"reference width {ref.width} below 2*dt = {2 * grid.dt}")
    tau = grid.times - ref.peak_time
    return _normalize(grid, np.exp(-tau**2 / (4 * ref.width**2)).astype(complex))


def reference_as_state(ref: ReferencePulse, grid: TemporalGrid) -> PureState:
    """Reference pulse as a PureState (delta-normalized in ideal mode)."""
    return PureState(grid, reference_vector(ref, grid), validate=not ref.is_ideal)


def overlap(a: PureState, b: PureState) -> complex:
    return complex(np.vdot(a.amp, b.amp) * a.grid.dt)


# ------------------------------------------------------------ diagnostics


_SPECTRAL_CUT = 1e-10


def fidelity(a, b) -> float:
    """Uhlmann fidelity ``(Tr sqrt(sqrt(a) b sqrt(a)))^2``.

    Accepts PureState or DensityMatrix for either argument. Non-Hermitian
    inputs (raw reconstructions) enter through their Hermitian part.
    """
    if isinstance(a, PureState) and isinstance(b, PureState):
        return abs(overlap(a, b)) ** 2
    if isinstance(b, PureState):
        a, b = b, a
    if isinstance(a, PureState):
        v = a.coords()
        rb = b.coords()
        return float(np.real(np.vdot(v, rb @ v)))
    ra = a.coords()
    rb = b.coords()
    ra = 0.5 * (ra + ra.conj().T)
    rb = 0.5 * (rb + rb.conj().T)
    # eigenvalues below _SPECTRAL_CUT of the largest are round-off: their
    # square roots would otherwise inflate the result by ~sqrt(eps)
    w, u = np.linalg.eigh(ra)
    w = np.where(w > _SPECTRAL_CUT * w.max(), w, 0.0)
    sq = (u * np.sqrt(w)) @ u.conj().T
    inner_ = sq @ rb @ sq
    ev = np.linalg.eigvalsh(0.5 * (inner_ + inner_.conj().T))
    ev = np.where(ev > _SPECTRAL_CUT * ev.max(), ev, 0.0)
    return float(np.sum(np.sqrt(ev)) ** 2)


def trace_distance(a: DensityMatrix, b: DensityMatrix) -> float:
    d = a.coords() - b.coords()
    d = 0.5 * (d + d.conj().T)
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(d))))


def align_global_phase(candidate: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """Rotate ``candidate`` so it agrees in phase with ``reference`` at the
    reference's largest-modulus component."""
    j = np.unravel_index(np.argmax(np.abs(reference)), np.shape(reference))
    if candidate[j] == 0:
        return np.asarray(candidate)
    return candidate * np.exp(1j * (np.angle(reference[j]) - np.angle(candidate[j])))


def schmidt_decomposition(psi2: TwoPhotonPureState):
    """Singular values (unit-norm) and Schmidt modes of a pair amplitude.

    Returns ``(s, u, vh)`` from the SVD of the orthonormal-basis amplitude;
    ``s**2`` are the Schmidt coefficients.
    """
    u, s, vh = np.linalg.svd(psi2.coords())
    return s, u, vh


def schmidt_coefficients(psi2: TwoPhotonPureState) -> np.ndarray:
    s = np.linalg.svd(psi2.coords(), compute_uv=False)
    return s**2


def schmidt_number(psi2: TwoPhotonPureState) -> float:
    lam = schmidt_coefficients(psi2)
    return float(1.0 / np.sum(lam**2))


def schmidt_entropy(psi2: TwoPhotonPureState) -> float:
    lam = schmidt_coefficients(psi2)
    lam = lam[lam > 1e-300]
    return float(-np.sum(lam * np.log(lam)))


def analytic_pair_schmidt(sigma_minus: float, sigma_plus: float, n_terms: int) -> np.ndarray:
    """Schmidt coefficients of the continuum double-Gaussian amplitude."""
    mu = (sigma_plus - sigma_minus) / (sigma_plus + sigma_minus)
    return (1 - mu**2) * mu ** (2 * np.arange(n_terms))


# ------------------------------------------------------------------- JSON


def _interleave(a: np.ndarray) -> list:
    flat = np.asarray(a, dtype=complex).ravel()
    out = np.empty(2 * flat.size)
    out[0::2] = flat.real
    out[1::2] = flat.imag
    return out.tolist()


def _deinterleave(values, shape) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    return (v[0::2] + 1j * v[1::2]).reshape(shape)


def state_to_dict(state) -> dict:
    d = {"schema": STATE_SCHEMA, "version": STATE_SCHEMA_VERSION}
    if isinstance(state, PureState):
        d.update(kind="pure", grid=state.grid.to_dict(), amplitudes=_interleave(state.amp))
    elif isinstance(state, DensityMatrix):
        d.update(kind="density", grid=state.grid.to_dict(), amplitudes=_interleave(state.rho))
    elif isinstance(state, TwoPhotonPureState):
        d.update(kind="pair", grid=state.grid_1.to_dict(), grid_2=state.grid_2.to_dict(),
                 amplitudes=_interleave(state.amp))
    else:
        raise TypeError(f"cannot serialize {type(state).__name__}")
    return d


def state_from_dict(d: dict):
    if d.get("schema") != STATE_SCHEMA:
        raise ValueError(f"not a state document (schema={d.get('schema')!r})")
    if d.get("version") != STATE_SCHEMA_VERSION:
        raise ValueError(f"unsupported state schema version {d.get('version')!r}")
    grid = TemporalGrid.from_dict(d["grid"])
    n = grid.n_points
    kind = d["kind"]
    if kind == "pure":
        return PureState(grid, _deinterleave(d["amplitudes"], (n,)))
    if kind == "density":
        return DensityMatrix(grid, _deinterleave(d["amplitudes"], (n, n)))
    if kind == "pair":
        g2 = TemporalGrid.from_dict(d["grid_2"])
        return TwoPhotonPureState(grid, g2, _deinterleave(d["amplitudes"], (n, g2.n_points)))
    raise ValueError(f"unknown state kind {kind!r}")


def save_state(state, path) -> None:
    Path(path).write_text(json.dumps(state_to_dict(state)))


def load_state(path):
    return state_from_dict(json.loads(Path(path).read_text()))
