import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_density, random_pure
from weaktime.errors import DomainError, MemoryCapError
from weaktime.grid import TemporalGrid
from weaktime.interferometer import (MeasurementSettings, _channel_coords, background_rate,
                                     broadband_rates, channel_apply, coincidence_rate,
                                     forward_rates, measurement_operator_apply,
                                     oracle_two_photon, probe_detection_probability,
                                     two_photon_coincidence_rate, two_photon_rate_array)
from weaktime.states import (DensityMatrix, ReferencePulse, TwoPhotonPureState,
                             gaussian_entangled_pair, gaussian_pulse, product_pair,
                             pure_to_density)

GAUSS_REF = ReferencePulse(0.5, 0.6, "gaussian")


def _freq_expectation(dm: DensityMatrix, k: int) -> float:
    u = dm.grid.kernel[k]
    return float(np.real(u @ dm.rho @ u.conj()) * dm.grid.dt**2)


def test_settings_domain():
    with pytest.raises(DomainError):
        MeasurementSettings(0.8, 0.0, GAUSS_REF)
    with pytest.raises(DomainError):
        MeasurementSettings(-0.1, 0.0, GAUSS_REF)
    assert MeasurementSettings(0.1, 7.0, GAUSS_REF).phi == pytest.approx(7.0 - 2 * np.pi)


def test_probe_probability_needs_normalized_reference(grid64):
    rho = pure_to_density(gaussian_pulse(grid64, 0.0, 0.8))
    with pytest.raises(DomainError):
        probe_detection_probability(rho, MeasurementSettings(0.3, 0.0, ReferencePulse(0.0)))


@pytest.mark.parametrize("ref", [ReferencePulse(0.4), GAUSS_REF])
def test_closed_form_rate_is_frequency_diagonal_of_channel(grid128, mixed, ref):
    for theta, phi in [(0.0, 1.0), (0.2, 0.3), (np.pi / 4, 4.0)]:
        s = MeasurementSettings(theta, phi, ref)
        out = channel_apply(mixed, s)
        for k in (40, 64, 70):
            assert coincidence_rate(mixed, s, k) == pytest.approx(
                _freq_expectation(out, k), abs=1e-14)


def test_measurement_operator_part_of_channel(grid64):
    rho = pure_to_density(gaussian_pulse(grid64, 0.0, 0.8))
    s = MeasurementSettings(0.0, 0.0, GAUSS_REF)
    # no interaction: both equal rho / 8
    assert np.allclose(measurement_operator_apply(rho, s).rho, rho.rho / 8, atol=1e-14)
    assert np.allclose(channel_apply(rho, s).rho, rho.rho / 8, atol=1e-14)


def test_oracle_matches_closed_forms(grid64):
    rng = np.random.default_rng(2)
    for _ in range(8):
        rho = random_density(grid64, rng, rank=2)
        s = MeasurementSettings(rng.uniform(0, np.pi / 4), rng.uniform(0, 2 * np.pi), GAUSS_REF)
        orc = oracle_two_photon(rho, s)
        assert orc.probability == pytest.approx(probe_detection_probability(rho, s), abs=1e-14)
        for k in (10, 32, 50):
            assert _freq_expectation(orc.conditional, k) == pytest.approx(
                coincidence_rate(rho, s, k), abs=1e-14)


def test_oracle_pure_joint_amplitude_marginal(grid64):
    psi = random_pure(grid64, np.random.default_rng(4))
    s = MeasurementSettings(0.4, 1.1, GAUSS_REF)
    orc = oracle_two_photon(psi, s)
    j = orc.joint.amp
    assert np.sum(np.abs(j) ** 2) * grid64.dt**2 == pytest.approx(orc.probability, abs=1e-14)


def test_literal_filter_phase_conjugates_fringes(grid64):
    """Sign-convention flag: a probe filter (H + e^{+i phi} V) reproduces the
    rate formula at -phi, i.e. complex-conjugated fringes."""
    rho = pure_to_density(gaussian_pulse(grid64, 0.3, 0.8, chirp=0.4))
    phi = 1.0
    s_plus = MeasurementSettings(np.pi / 4, phi, GAUSS_REF)
    s_minus = MeasurementSettings(np.pi / 4, -phi, GAUSS_REF)
    literal = oracle_two_photon(rho, s_plus, filter_phase=+phi).conditional
    k = 36
    assert _freq_expectation(literal, k) == pytest.approx(coincidence_rate(rho, s_minus, k),
                                                          abs=1e-14)
    assert abs(_freq_expectation(literal, k) - coincidence_rate(rho, s_plus, k)) > 1e-4


def test_bunching_dip_versus_delay(grid64):
    ref_state = gaussian_pulse(grid64, 0.0, 0.7)
    ps = []
    for delay in (0.0, 0.5, 1.0, 2.0, 4.0):
        s = MeasurementSettings(np.pi / 4, 0.0, ReferencePulse(delay, 0.7, "gaussian"))
        ps.append(probe_detection_probability(pure_to_density(ref_state), s))
    # |<a|b>|^2 for equal Gaussians offset by d: exp(-d^2 / (4 w^2))
    expected = [0.125 - 0.125 * np.exp(-d**2 / (4 * 0.7**2)) for d in (0.0, 0.5, 1.0, 2.0, 4.0)]
    assert np.allclose(ps, expected, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(0, np.pi / 4), st.floats(0, 2 * np.pi), st.integers(0, 2**31))
def test_channel_is_positive_and_trace_matches_probability(theta, phi, seed):
    g = TemporalGrid(32, 0.3)
    rho = random_density(g, np.random.default_rng(seed), rank=2)
    s = MeasurementSettings(theta, phi, ReferencePulse(0.0, 0.6, "gaussian"))
    out = channel_apply(rho, s)
    ev = np.linalg.eigvalsh(out.coords())
    assert ev.min() > -1e-13
    assert out.trace().real == pytest.approx(probe_detection_probability(rho, s), abs=1e-14)


def test_channel_is_linear(grid64):
    rng = np.random.default_rng(8)
    a, b = random_density(grid64, rng), random_density(grid64, rng)
    s = MeasurementSettings(0.5, 2.0, GAUSS_REF)
    combo = DensityMatrix(grid64, 0.3 * a.rho - 1.7j * b.rho, validate=False)
    lhs = channel_apply(combo, s).rho
    rhs = 0.3 * channel_apply(a, s).rho - 1.7j * channel_apply(b, s).rho
    assert np.allclose(lhs, rhs, atol=1e-13)


@pytest.mark.parametrize("width", [0.0, 0.6])
def test_forward_rates_match_pointwise_rate(grid128, chirped, width):
    thetas, phis = [0.1, np.pi / 4], [0.0, 2.0]
    times = grid128.times[[50, 64, 70]]
    ks = [55, 64, 73]
    rec = forward_rates(chirped, thetas, phis, times, ks, reference_width=width)
    assert len(rec) == 2 * 2 * 3 * 3
    shape = "ideal" if width == 0 else "gaussian"
    for r in rec.rows():
        s = MeasurementSettings(r.theta, r.phi, ReferencePulse(r.reference_peak_time, width, shape))
        assert r.rate_or_count == pytest.approx(coincidence_rate(chirped, s, r.omega_index),
                                                abs=1e-15)


def test_rates_nonnegative_for_broad_states(grid128, chirped):
    rec = forward_rates(chirped, [0.05, 0.4, np.pi / 4], np.linspace(0, 2 * np.pi, 8,
                                                                       endpoint=False))
    assert rec.value.min() > -1e-15


def test_zero_strength_rate_is_spectrum(grid128, chirped):
    rec = forward_rates(chirped, [0.0], [0.0, 1.3], reference_times=[0.0])
    spec = np.abs(chirped.spectrum()) ** 2 / 8
    assert np.allclose(rec.value.reshape(2, -1), spec[None, :], atol=1e-15)


def test_background(grid128, chirped):
    s = MeasurementSettings(0.3, 0.0, ReferencePulse(0.0))
    assert background_rate(s) == pytest.approx(np.sin(0.3) ** 2 / (16 * np.pi))
    # far from the signal band the rate is the back-action floor
    assert coincidence_rate(chirped, s, 2) == pytest.approx(background_rate(s), rel=1e-9)
    sg = MeasurementSettings(0.3, 0.0, ReferencePulse(0.0, 0.6, "gaussian"))
    with pytest.raises(ValueError):
        background_rate(sg)
    assert background_rate(sg, grid128, 64) == pytest.approx(
        coincidence_rate(chirped, MeasurementSettings(0.3, 0.0, sg.reference), 64)
        - 0.125 * np.cos(0.3) ** 2 * abs(chirped.spectrum()[64]) ** 2
        + 0.25 * np.sin(0.3) * np.cos(0.3)
        * np.real(_cross(chirped, sg.reference, 64)), abs=1e-14)


def _cross(psi, ref, k):
    from weaktime.states import reference_vector

    g = psi.grid
    f = reference_vector(ref, g)
    u = g.kernel[k]
    return np.dot(u, f) * g.dt * np.vdot(f, psi.amp) * g.dt * np.conj(np.dot(u, psi.amp) * g.dt)


def test_broadband_rates(grid64):
    rho = pure_to_density(gaussian_pulse(grid64, 0.0, 0.8))
    ss = [MeasurementSettings(0.3, p, GAUSS_REF) for p in (0.0, np.pi)]
    rec = broadband_rates(rho, ss)
    assert np.all(rec.omega_index == -1)
    assert rec.value[0] == probe_detection_probability(rho, ss[0])


# ------------------------------------------------------------ two photons


def _superop(theta, phi, f):
    n = len(f)
    s = np.empty((n * n, n * n), dtype=complex)
    for idx in range(n * n):
        e = np.zeros(n * n, dtype=complex)
        e[idx] = 1
        s[:, idx] = _channel_coords(e.reshape(n, n), f, theta, phi).ravel()
    return s


def test_pair_rates_match_brute_force_superoperator():
    g = TemporalGrid(8, 0.5)
    rng = np.random.default_rng(12)
    v = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    psi2 = TwoPhotonPureState(g, g, v / np.sqrt(np.sum(np.abs(v) ** 2) * g.dt**2))
    c = psi2.coords()
    rho2 = np.einsum("ab,cd->acbd", c, c.conj())             # [i1, j1, i2, j2]
    th1, th2, ph1, ph2, ta, tb, k1, k2 = 0.3, 0.7, 1.2, 4.0, 3, 5, 2, 6
    f1 = np.zeros(8, complex)
    f1[ta] = 1 / np.sqrt(g.dt)
    f2 = np.zeros(8, complex)
    f2[tb] = 1 / np.sqrt(g.dt)
    s1, s2 = _superop(th1, ph1, f1), _superop(th2, ph2, f2)
    out = (s1 @ rho2.reshape(64, 64) @ s2.T).reshape(8, 8, 8, 8)
    w1 = g.kernel[k1].conj() * np.sqrt(g.dt)
    w2 = g.kernel[k2].conj() * np.sqrt(g.dt)
    brute = np.einsum("a,b,abcd,c,d->", w1.conj(), w1, out, w2.conj(), w2).real
    rate = two_photon_coincidence_rate(
        psi2, MeasurementSettings(th1, ph1, ReferencePulse(g.times[ta])),
        MeasurementSettings(th2, ph2, ReferencePulse(g.times[tb])), k1, k2)
    assert rate == pytest.approx(brute, abs=1e-15)


def test_product_pair_rate_factorizes(grid64):
    a = gaussian_pulse(grid64, 0.5, 0.8, chirp=0.3)
    b = gaussian_pulse(grid64, -0.5, 0.75)
    s1 = MeasurementSettings(0.4, 1.0, ReferencePulse(0.25))
    s2 = MeasurementSettings(0.7, 5.0, ReferencePulse(0.0, 0.6, "gaussian"))
    for k1, k2 in [(32, 32), (30, 35)]:
        pair = two_photon_coincidence_rate(product_pair(a, b), s1, s2, k1, k2)
        assert pair == pytest.approx(coincidence_rate(a, s1, k1) * coincidence_rate(b, s2, k2),
                                     abs=1e-15)


def test_pair_array_respects_memory_cap():
    g = TemporalGrid(32, 0.5)
    psi2 = gaussian_entangled_pair(g, g, 1.0, 1.4)
    with pytest.raises(MemoryCapError):
        two_photon_rate_array(psi2, 0.3, 0.3, [0.0], [0.0], 16, 16, max_elements=500)
