import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from zsnft.oracles import ode_scattering, sy_a, sy_continuous
from zsnft.signal import make_grid
from zsnft.steppers import (ALL_METHODS, Method, TransferState, bidirectional_b, coefficients_from_state,
                            cubic_midpoints, propagate, propagate_many, step, step_aug, transfer_matrix)

from conftest import sampled

cplx = st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False)


@pytest.mark.parametrize("method", ALL_METHODS)
@settings(max_examples=30, deadline=None)
@given(q0=cplx, q1=cplx, qm=cplx, re=st.floats(-4, 4), im=st.floats(-1, 2), eps=st.floats(0.01, 0.3))
def test_step_derivative_matches_finite_differences(method, q0, q1, qm, re, im, eps):
    lam = complex(re, im)
    h = 1e-6
    A, dA = transfer_matrix(method, q0, q1, lam, eps, q_mid=qm, derivative=True)
    Ap, _ = transfer_matrix(method, q0, q1, lam + h, eps, q_mid=qm)
    Am, _ = transfer_matrix(method, q0, q1, lam - h, eps, q_mid=qm)
    fd = (Ap - Am) / (2 * h)
    assert np.max(np.abs(dA - fd)) < 1e-7 * max(1.0, np.max(np.abs(A)))


def test_layer_peeling_step_is_exact_exponential():
    for q, lam, eps in [(1.3 - 0.4j, 0.7 + 0.1j, 0.05), (2.0, -3.0, 0.2), (0.0, 1.5j, 0.1), (1e-3j, 1e-4, 1e-3)]:
        A, _ = transfer_matrix("layer_peeling", q, None, lam, eps)
        P = np.array([[-1j * lam, q], [-np.conj(q), 1j * lam]])
        assert np.allclose(A, expm(P * eps), atol=1e-14)


def test_method_parse_aliases():
    assert Method.parse("layer-peeling") is Method.LAYER_PEELING
    assert Method.parse("CN") is Method.CRANK_NICOLSON
    assert Method.parse(Method.RK4) is Method.RK4
    with pytest.raises(ValueError):
        Method.parse("leapfrog2")


def test_cubic_midpoints_fourth_order():
    errs = []
    for n in (32, 64, 128):
        t = np.linspace(-2, 2, n + 1)
        mid = 0.5 * (t[1:] + t[:-1])
        errs.append(np.max(np.abs(cubic_midpoints(np.exp(-t ** 2)) - np.exp(-mid ** 2))))
    slope = np.polyfit(np.log([32, 64, 128]), np.log(errs), 1)[0]
    assert slope < -3.7


@pytest.mark.parametrize("method,tol", [("euler", 0.15), ("central", 5e-4), ("rk4", 1e-7),
                                        ("crank_nicolson", 3e-4), ("layer_peeling", 5e-5),
                                        ("al1", 5e-2), ("al2", 5e-4)])
def test_sech_coefficient_a(method, tol):
    s = sampled("sech", 1.0, (-25, 25), 2048)
    c = propagate(method, s, 0.3)
    assert abs(c.a - sy_a(1.0, 0.3)) < tol


LEFT_SAMPLED = (Method.EULER, Method.LAYER_PEELING, Method.AL1, Method.AL2)


def shift_corrected_b(method, c, eps):
    # holding q[k] over [t_k, t_k+1] delays the signal by eps/2, which
    # multiplies b by exp(-j lam eps) and leaves a unchanged
    m = Method.parse(method)
    return c.b * np.exp(1j * c.lam * eps) if m in LEFT_SAMPLED else c.b


@pytest.mark.parametrize("method", ALL_METHODS)
def test_methods_agree_with_ode_on_complex_pulse(method):
    s = sampled("gaussian", 1.5 + 0.5j, (-6, 6), 4096, chirp1=1.0)
    a_ref, b_ref = ode_scattering(s, 0.4)
    c = propagate(method, s, 0.4)
    tol = 1e-2 if method in ("euler", "al1") else 1e-4
    assert abs(c.a - a_ref) < tol
    assert abs(shift_corrected_b(method, c, s.grid.eps) - b_ref) < tol


def test_left_sampling_shift_is_first_order_in_b():
    errs, fixed = [], []
    for n in (512, 1024, 2048):
        s = sampled("gaussian", 1.5, (-6, 6), n)
        a_ref, b_ref = ode_scattering(s, 0.8)
        c = propagate("layer_peeling", s, 0.8)
        errs.append(abs(c.b - b_ref))
        fixed.append(abs(shift_corrected_b("layer_peeling", c, s.grid.eps) - b_ref))
    assert np.polyfit(np.log([512, 1024, 2048]), np.log(errs), 1)[0] == pytest.approx(-1, abs=0.15)
    assert np.polyfit(np.log([512, 1024, 2048]), np.log(fixed), 1)[0] == pytest.approx(-2, abs=0.2)


@pytest.mark.parametrize("method", ALL_METHODS)
def test_u_and_v_forms_agree(method):
    s = sampled("sech", 2.7, (-10, 10), 512)
    lams = np.array([0.4, -1.0 + 0.5j, 1.9j])
    cu = propagate_many(method, s, lams, with_derivative=True, form="u")
    cv = propagate_many(method, s, lams, with_derivative=True, form="v")
    for x, y in [(cu.a, cv.a), (cu.b, cv.b), (cu.a_prime, cv.a_prime)]:
        assert np.allclose(x, y, rtol=1e-9, atol=1e-11)


def test_layer_peeling_telescoped_equals_phase_retaining():
    s = sampled("sinc", 4.0, (-16, 16), 1024)
    lams = np.linspace(-5, 5, 7) + 0.2j
    c1 = propagate_many("layer_peeling", s, lams, True)
    c2 = propagate_many("layer_peeling", s, lams, True, telescoped=True)
    assert np.allclose(c1.a, c2.a, atol=1e-11) and np.allclose(c1.a_prime, c2.a_prime, atol=1e-9)


@pytest.mark.parametrize("method", ALL_METHODS)
def test_propagation_derivative_matches_finite_differences(method):
    s = sampled("gaussian", 1.8, (-6, 6), 256)
    lam, h = 0.3 + 0.4j, 1e-6
    c = propagate(method, s, lam, with_derivative=True)
    fd = (propagate(method, s, lam + h).a - propagate(method, s, lam - h).a) / (2 * h)
    assert abs(c.a_prime - fd) < 1e-7 * max(1, abs(fd))


@pytest.mark.parametrize("method", ALL_METHODS)
def test_single_steps_reproduce_batch_driver(method):
    s = sampled("sech", 1.4, (-8, 8), 64, chirp1=0.5)
    g = s.grid
    lam = 0.2 + 0.3j
    mids = cubic_midpoints(s.q)
    st_ = TransferState.initial(method, lam, g, derivative=True)
    for k in range(g.n):
        st_ = step_aug(method, st_, s.q[k], s.q[k + 1], lam, g, k, q_mid=mids[k])
    c1 = coefficients_from_state(method, st_, g, lam)
    c2 = propagate(method, s, lam, with_derivative=True, form="v")
    assert abs(c1.a - c2.a) < 1e-12 and abs(c1.a_prime - c2.a_prime) < 1e-10


def test_step_index_checks():
    g = make_grid(0, 1, 4)
    st0 = TransferState.initial("euler", 0.1, g)
    with pytest.raises(ValueError):
        step("euler", st0, 0, 0, 0.1, g, 1)
    with pytest.raises(ValueError):
        step_aug("euler", st0, 0, 0, 0.1, g, 0)
    with pytest.raises(ValueError):
        coefficients_from_state("euler", st0, g, 0.1)


def test_layer_peeling_unimodular_on_real_axis():
    s = sampled("sinc", 4.0 + 1j, (-16, 16), 2048)
    c = propagate_many("layer_peeling", s, np.linspace(-20, 20, 401))
    assert np.max(np.abs(np.abs(c.a) ** 2 + np.abs(c.b) ** 2 - 1)) < 1e-12


def test_zero_potential_is_transparent():
    s = sampled("sech", 0.0, (-5, 5), 32)
    for m in ALL_METHODS:
        c = propagate_many(m, s, [0.3, 1 + 1j])
        assert np.all(c.b == 0)
        if m in (Method.LAYER_PEELING, Method.AL1, Method.AL2):
            assert np.allclose(c.a, 1, atol=1e-12)
        elif m is Method.CRANK_NICOLSON:
            # a Cayley transform: unitary for real lambda, phase only to second order
            assert abs(abs(c.a[0]) - 1) < 1e-14 and abs(c.a[0] - 1) < 1e-2
        elif m is Method.RK4:
            assert abs(c.a[0] - 1) < 1e-5


def test_continuous_spectrum_for_every_method():
    s = sampled("sech", 0.6, (-25, 25), 4096)
    ref = sy_continuous(0.6, 0.5)
    for m in ALL_METHODS:
        c = propagate(m, s, 0.5)
        qh = shift_corrected_b(m, c, s.grid.eps) / c.a
        assert abs(qh - ref) < (3e-2 if m in (Method.EULER, Method.AL1) else 1e-3)


@pytest.mark.parametrize("method", ALL_METHODS)
def test_bidirectional_b_agrees_with_forward_where_well_conditioned(method):
    s = sampled("sech", 1.0, (-8, 8), 1024)
    c = propagate(method, s, 0.5j, form="v")
    assert bidirectional_b(method, s, 0.5j) == pytest.approx(c.b, rel=1e-3)


def test_bidirectional_b_unit_modulus_for_symmetric_pulse():
    # |b(lam_k)| = 1 for a real symmetric potential; forward sweeps lose this
    s = sampled("sech", 2.0, (-25, 25), 4096)
    for lam in (1.5j, 0.5j):
        b = bidirectional_b("layer_peeling", s, lam) * np.exp(1j * lam * s.grid.eps)
        assert abs(abs(b) - 1) < 1e-4


def test_non_finite_raises():
    s = sampled("sech", 1.0, (-400, 400), 256)
    with pytest.raises(FloatingPointError):
        propagate_many("euler", s, [3j], form="v")


def test_normalized_euler():
    h = 1e-6
    A, dA = transfer_matrix("euler", 0.7 - 0.2j, None, 0.4 + 0.3j, 0.1, derivative=True, normalize=True)
    fd = (transfer_matrix("euler", 0.7 - 0.2j, None, 0.4 + 0.3j + h, 0.1, normalize=True)[0]
          - transfer_matrix("euler", 0.7 - 0.2j, None, 0.4 + 0.3j - h, 0.1, normalize=True)[0]) / (2 * h)
    assert np.max(np.abs(dA - fd)) < 1e-8
    assert abs(np.linalg.det(A) - 1) < 1e-14
    s = sampled("sech", 1.0, (-25, 25), 2048)
    plain = abs(propagate("euler", s, 0.3).a - sy_a(1.0, 0.3))
    normed = abs(propagate("euler", s, 0.3, normalize=True).a - sy_a(1.0, 0.3))
    assert normed < plain
    with pytest.raises(ValueError):
        propagate("rk4", s, 0.3, normalize=True)
