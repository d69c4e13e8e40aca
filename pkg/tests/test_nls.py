import warnings

import numpy as np
import pytest

from zsnft.continuous import LambdaMesh, continuous_spectrum
from zsnft.nls import (LeakageWarning, PropagationPlan, expected_continuous_evolution,
                       fiber_units, ssf_propagate)
from zsnft.signal import conserved

from conftest import sampled


def test_plan_validation():
    for kw in ({"z": float("nan")}, {"z": 1, "steps": 0}, {"z": 1, "steps": 2.5}, {"z": 1, "padding": 0.5}):
        with pytest.raises(ValueError):
            PropagationPlan(**kw)


def test_zero_distance_is_identity():
    s = sampled("gaussian", 1.0, (-8, 8), 256)
    r = ssf_propagate(s, PropagationPlan(0.0))
    assert np.array_equal(r.signal.q, s.q) and r.leaked == 0


def test_fundamental_soliton_is_stationary():
    s = sampled("sech", 1.0, (-20, 20), 1024)
    z = 1.0
    r = ssf_propagate(s, PropagationPlan(z, steps=2000))
    assert np.max(np.abs(r.signal.q - s.q * np.exp(-1j * z))) < 1e-5


def test_energy_is_conserved():
    s = sampled("sech", 2.7, (-25, 25), 2048)
    r = ssf_propagate(s, PropagationPlan(0.25, steps=2048))
    assert conserved(r.signal, 1) == pytest.approx(conserved(s, 1), rel=1e-6)


def test_continuous_spectrum_evolves_by_phase():
    s = sampled("sech", 0.4, (-30, 30), 4096)
    z = 0.2
    r = ssf_propagate(s, PropagationPlan(z, steps=2000, padding=3))
    mesh = LambdaMesh(-2, 2, 41)
    before = continuous_spectrum(s, "layer_peeling", mesh)
    after = continuous_spectrum(r.signal, "layer_peeling", mesh)
    want = expected_continuous_evolution(before.qhat, before.lam, z)
    assert np.max(np.abs(after.qhat - want)) < 2e-3


def test_leakage_warning():
    s = sampled("gaussian", 0.3, (-3, 3), 256)
    with pytest.warns(LeakageWarning):
        r = ssf_propagate(s, PropagationPlan(5.0, steps=500, padding=1.5))
    assert r.leaked > 1e-6


def test_fiber_units():
    u = fiber_units(10.0)
    assert u["beta2_ps2_per_km"] == pytest.approx(-21.7, abs=0.1)
    assert u["length_km"] == pytest.approx(2 * 100 / 21.68, rel=1e-2)
    with pytest.raises(ValueError):
        fiber_units(0)
