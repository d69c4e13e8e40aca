import warnings

import numpy as np
import pytest

from zsnft.continuous import (LambdaMesh, SpectrumWarning, continuous_spectrum, read_spectrum_csv,
                              spectral_energy, write_spectrum_csv)
from zsnft.oracles import rect_continuous, sy_continuous
from zsnft.signal import conserved

from conftest import sampled


def test_mesh_validation_and_points():
    m = LambdaMesh(-1, 1, 5)
    assert np.allclose(m.points, [-1, -0.5, 0, 0.5, 1])
    for args in [(1, -1, 5), (0, 1, 1), (0, np.inf, 3)]:
        with pytest.raises(ValueError):
            LambdaMesh(*args)


def test_rect_spectrum_matches_closed_form():
    s = sampled("rect", 2.0, (-1, 1), 2048)
    spec = continuous_spectrum(s, "layer_peeling", LambdaMesh(-10, 10, 401))
    assert np.max(np.abs(spec.qhat - rect_continuous(2.0, -1, 1, spec.lam))) < 1e-10


def test_sy_spectrum_magnitude():
    s = sampled("sech", 0.6, (-25, 25), 2048)
    spec = continuous_spectrum(s, "layer_peeling", LambdaMesh(-5, 5, 201))
    # |qhat| is insensitive to the half-sample shift of left sampling
    assert np.max(np.abs(np.abs(spec.qhat) - np.abs(sy_continuous(0.6, spec.lam)))) < 1e-4
    assert spec.unimodularity_defect < 1e-12
    p = spec.point(100)
    assert p.lam == pytest.approx(0.0) and not p.pole


def test_nonlinear_parseval_without_solitons():
    # gaussian with A = 0.5 has no eigenvalues, so all energy is continuous
    s = sampled("gaussian", 0.5, (-8, 8), 1024)
    spec = continuous_spectrum(s, "layer_peeling", LambdaMesh(-20, 20, 2001))
    assert spectral_energy(spec, 1) == pytest.approx(conserved(s, 1), rel=1e-4)
    with pytest.raises(ValueError):
        spectral_energy(spec, 4)


def test_tail_warning():
    s = sampled("rect", 2.0, (-1, 1), 512)
    spec = continuous_spectrum(s, "layer_peeling", LambdaMesh(-2, 2, 101))
    with pytest.warns(SpectrumWarning):
        spectral_energy(spec, 1)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        spectral_energy(spec, 1, warn=False)


def test_worker_count_does_not_change_results():
    s = sampled("sinc", 3.0 + 1j, (-16, 16), 512)
    mesh = LambdaMesh(-10, 10, 301)
    one = continuous_spectrum(s, "rk4", mesh, workers=1)
    many = continuous_spectrum(s, "rk4", mesh, workers=4)
    assert np.array_equal(one.qhat, many.qhat)


def test_csv_roundtrip(tmp_path):
    s = sampled("gaussian", 1.0, (-6, 6), 128)
    spec = continuous_spectrum(s, "crank_nicolson", LambdaMesh(-3, 3, 13))
    p = tmp_path / "spec.csv"
    write_spectrum_csv(spec, p)
    back = read_spectrum_csv(p)
    assert np.array_equal(back.qhat, spec.qhat) and np.array_equal(back.a, spec.a)
    (tmp_path / "bad.csv").write_text("x,y\n")
    with pytest.raises(ValueError):
        read_spectrum_csv(tmp_path / "bad.csv")
