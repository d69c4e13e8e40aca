import cmath

import numpy as np
import pytest

from zsnft.signal import make_grid
from zsnft.zs import (DegenerateEigenvalueError, DiscreteEigenvalue, JostState, PoleError,
                      ScatteringCoefficients, coefficients_from_terminal, continuous_amplitude,
                      discrete_amplitude, qhat_array)


def test_free_solution_gives_trivial_scattering():
    g = make_grid(-3, 5, 16)
    lam = 0.7 + 0.2j
    j0 = JostState.initial(lam, g.t1, derivative=True)
    # without a potential v stays exp(-j lam t) e1
    v = JostState(cmath.exp(-1j * lam * g.t_end), 0j, -1j * g.t_end * cmath.exp(-1j * lam * g.t_end), 0j)
    c = coefficients_from_terminal(v, g, lam)
    assert c.a == pytest.approx(1) and c.b == 0
    assert c.a_prime == pytest.approx(0, abs=1e-15)
    assert j0.has_derivative
    assert j0.dv1 == pytest.approx(-1j * g.t1 * j0.v1)


def test_amplitudes_and_errors():
    c = ScatteringCoefficients(0.3, 0.6, 0.8j, 2.0, 0.0)
    assert continuous_amplitude(c) == pytest.approx(0.8j / 0.6)
    assert discrete_amplitude(c) == pytest.approx(0.4j)
    assert c.unimodularity_defect < 1e-15
    with pytest.raises(PoleError):
        continuous_amplitude(ScatteringCoefficients(0.3, 0.0, 1.0))
    with pytest.raises(DegenerateEigenvalueError):
        discrete_amplitude(ScatteringCoefficients(1j, 0.0, 1.0, 0.0))
    with pytest.raises(ValueError):
        discrete_amplitude(ScatteringCoefficients(1j, 0.0, 1.0))


def test_discrete_eigenvalue_upper_half_plane():
    DiscreteEigenvalue(0.5j, None, 0.0)
    for bad in (0.5, -0.5j, 0j):
        with pytest.raises(ValueError):
            DiscreteEigenvalue(complex(bad), None, 0.0)


def test_qhat_array_flags_poles():
    qh, pole = qhat_array(np.array([1.0, 0.0, 2j]), np.array([0.5, 1.0, 1.0]))
    assert pole.tolist() == [False, True, False]
    assert qh[0] == 0.5 and np.isnan(qh[1]) and qh[2] == pytest.approx(-0.5j)
