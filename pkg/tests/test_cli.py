import json

import numpy as np
import pytest

from zsnft import __version__
from zsnft.cli import run
from zsnft.search import read_discrete_csv

REPORT_KEYS = {"command", "config", "residuals", "eigenvalues", "timing_ms", "seed"}


@pytest.fixture(scope="module")
def sy_csv(tmp_path_factory):
    p = tmp_path_factory.mktemp("sig") / "sy.csv"
    assert run(["gen", "--pulse", "sech", "--amp", "2.7", "--window", "-25", "25",
                "--n", "1024", "--out", str(p)]) == 0
    return p


@pytest.fixture(scope="module")
def sinc_csv(tmp_path_factory):
    p = tmp_path_factory.mktemp("sig") / "sinc.csv"
    assert run(["gen", "--pulse", "sinc", "--amp", "4", "--window", "-16", "16",
                "--n", "1024", "--out", str(p)]) == 0
    return p


def _report(path):
    rep = json.loads(path.read_text())
    assert set(rep) == REPORT_KEYS
    return rep


def test_version(capsys):
    assert run(["--version"]) == 0
    assert __version__ in capsys.readouterr().out


def test_gen_writes_csv_and_report(sy_csv):
    lines = sy_csv.read_text().splitlines()
    assert len(lines) == 1026
    rep = _report(sy_csv.with_suffix(".json"))
    assert rep["command"] == "gen"


def test_nft_is_deterministic(sy_csv, tmp_path):
    outs = []
    for k in range(2):
        d = tmp_path / f"run{k}"
        assert run(["nft", "--in", str(sy_csv), "--discrete", "--mesh", "401", "--out", str(d)]) == 0
        outs.append(d)
    for name in ("spectrum.csv", "discrete.csv"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
    rep = _report(outs[0] / "report.json")
    assert rep["residuals"]["complete"] is True
    lams = np.array([complex(*e) for e in rep["eigenvalues"]])
    assert np.allclose(np.sort(lams.imag), [0.2, 1.2, 2.2], atol=1e-3)


def test_nft_incomplete_search_exits_1(sy_csv, tmp_path):
    code = run(["nft", "--in", str(sy_csv), "--discrete", "--draws", "2", "--mesh", "101",
                "--region", "5", "6", "0.05", "0.1", "--out", str(tmp_path / "x")])
    assert code == 1


def test_eig_refine_agrees_with_search(sinc_csv, tmp_path):
    assert run(["nft", "--in", str(sinc_csv), "--discrete", "--out", str(tmp_path / "n")]) == 0
    assert run(["eig", "--in", str(sinc_csv), "--matrix", "spectral", "--refine",
                "--out", str(tmp_path / "e")]) == 0
    found = [e.lam for e in read_discrete_csv(tmp_path / "n" / "discrete.csv") if e.lam.imag > 0.04]
    matrix = [e.lam for e in read_discrete_csv(tmp_path / "e" / "discrete.csv")]
    assert len(found) == len(matrix) == 1
    assert abs(found[0] - matrix[0]) < 1e-2
    _report(tmp_path / "e" / "report.json")


def test_eig_cd_and_dump(tmp_path):
    sig = tmp_path / "s.csv"
    assert run(["gen", "--pulse", "sech", "--amp", "1.9", "--window", "-15", "15", "--n", "300",
                "--out", str(sig)]) == 0
    dump = tmp_path / "m.npy"
    assert run(["eig", "--in", str(sig), "--matrix", "cd", "--dump-matrix", str(dump),
                "--out", str(tmp_path / "e")]) == 0
    assert dump.exists()
    lams = [e.lam for e in read_discrete_csv(tmp_path / "e" / "discrete.csv")]
    assert any(abs(l - 1.4j) < 2e-2 for l in lams)


def test_sweep_and_trace(tmp_path, sy_csv):
    out = tmp_path / "locus.csv"
    assert run(["sweep", "--pulse", "sech", "--param", "amp", "--range", "0.8", "1.2", "3",
                "--window", "-25", "25", "--n", "512", "--out", str(out)]) == 0
    a = out.read_bytes()
    assert run(["sweep", "--pulse", "sech", "--param", "amp", "--range", "0.8", "1.2", "3",
                "--window", "-25", "25", "--n", "512", "--out", str(out)]) == 0
    assert out.read_bytes() == a
    assert len(a.decode().splitlines()) == 4
    _report(out.with_suffix(".json"))
    rep = tmp_path / "trace.json"
    assert run(["trace", "--in", str(sy_csv), "--out", str(rep)]) == 0
    assert _report(rep)["command"] == "trace"


def test_propagate(tmp_path):
    sig = tmp_path / "s.csv"
    assert run(["gen", "--pulse", "sech", "--window", "-20", "20", "--n", "512", "--out", str(sig)]) == 0
    out = tmp_path / "p.csv"
    assert run(["propagate", "--in", str(sig), "--z", "0.5", "--steps", "200", "--t0-ps", "10",
                "--out", str(out)]) == 0
    rep = _report(out.with_suffix(".json"))
    assert "units" in rep["residuals"]
    assert len(out.read_text().splitlines()) == len(sig.read_text().splitlines())


def test_bench(tmp_path):
    out = tmp_path / "b.csv"
    assert run(["bench", "--pulse", "sech", "--amp", "1", "--window", "-25", "25",
                "--n", "128,256", "--methods", "layer_peeling,central", "--out", str(out)]) == 0
    assert out.read_text().splitlines()[0] == "method,n,error"
    assert run(["bench", "--pulse", "sech", "--window", "-25", "25", "--n", "64",
                "--methods", "nonsense", "--out", str(out)]) == 2


def test_usage_errors(tmp_path, capsys):
    assert run(["frobnicate"]) == 2
    assert run(["nft", "--in", str(tmp_path / "missing.csv"), "--out", str(tmp_path / "o")]) == 2
    assert run(["gen", "--pulse", "sech", "--out", str(tmp_path / "g.csv")]) == 2
    assert run(["sweep", "--param", "amp", "--range", "1", "2", "1", "--out", str(tmp_path / "s.csv")]) == 2
    bad = tmp_path / "bad.csv"
    bad.write_text("t,re,im\n0,1,0\n")
    assert run(["nft", "--in", str(bad), "--out", str(tmp_path / "o")]) == 2
