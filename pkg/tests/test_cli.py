import json
import subprocess
import sys

import numpy as np
import pytest

from excursus import cli, harness


def _run(*args):
    return subprocess.run([sys.executable, "-m", "excursus.cli", *args], capture_output=True, text=True)


def test_simulate_is_deterministic(tmp_path):
    outs = []
    for k in range(2):
        path = tmp_path / f"p{k}.csv"
        assert cli.main(["simulate", "--spec", "bm-drift:mu=0.5", "--n", "5", "--horizon", "0.2", "--seed", "9",
                         "--out", str(path)]) == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]
    assert outs[0].startswith(b"path_id,t,x\n")


def test_williams_same_across_threads(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli.main(["--threads", "1", "williams", "--spec", "bm-drift:mu=0.5", "--n", "300", "--seed", "2",
                     "--out", str(a)]) == 0
    assert cli.main(["--threads", "3", "williams", "--spec", "bm-drift:mu=0.5", "--n", "300", "--seed", "2",
                     "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_unknown_spec_exits_2():
    r = _run("eigen", "--spec", "nosuch")
    assert r.returncode == 2
    assert "bm-drift" in r.stderr


def test_unknown_check_exits_2():
    assert cli.main(["verify", "nosuch"]) == 2


def test_eigen_table(tmp_path):
    out = tmp_path / "e.csv"
    assert cli.main(["eigen", "--spec", "brownian", "--alpha", "0.5", "--out", str(out)]) == 0
    data = np.genfromtxt(out, delimiter=",", names=True)
    i = np.argmin(np.abs(data["x"] - 1.0))
    assert data["x"][i] == pytest.approx(1.0)
    ratio = data["g1"][i] / np.interp(0.0, data["x"], data["g1"])
    assert ratio == pytest.approx(np.e, rel=1e-5)


def test_fpt_lebesgue(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    base = ["fpt", "--spec", "brownian", "--x", "1", "--y", "0", "--kind", "entrance", "--n-t", "20"]
    assert cli.main(base + ["--out", str(a)]) == 0
    assert cli.main(base + ["--lebesgue", "--out", str(b)]) == 0
    fa = np.genfromtxt(a, delimiter=",", names=True)["f"]
    fb = np.genfromtxt(b, delimiter=",", names=True)["f"]
    np.testing.assert_allclose(fb, 2 * fa)


def test_vervaat_single_path(tmp_path):
    src, out = tmp_path / "b.csv", tmp_path / "e.csv"
    src.write_text("t,x\n0,0\n0.5,-1\n1,0\n")
    assert cli.main(["vervaat", "--direction", "fwd", "--seed", "0", "--input", str(src), "--out", str(out)]) == 0
    assert out.read_text().splitlines()[1:] == ["0.0,0.0", "0.5,1.0", "1.0,0.0"]


def test_verify_brownian_menu(tmp_path):
    rep = tmp_path / "r.json"
    code = cli.main(["verify", "all", "--spec", "brownian", "--n-scale", "0.02", "--report", str(rep)])
    man = json.loads(rep.read_text())
    assert len(man["checks"]) >= 6
    assert code == 0 and man["passed"]


def test_failing_check_exits_nonzero(monkeypatch, tmp_path):
    monkeypatch.setitem(harness.CHECKS, "bridge_covariance",
                        lambda cfg: harness.CheckResult("bridge_covariance", False, {}))
    code = cli.main(["verify", "bridge_covariance", "--report", str(tmp_path / "r.json")])
    assert code == 1


def test_raising_check_is_reported(monkeypatch, tmp_path):
    def boom(cfg):
        raise RuntimeError("stage exploded")

    monkeypatch.setitem(harness.CHECKS, "excursion_marginal", boom)
    rep = tmp_path / "r.json"
    assert cli.main(["verify", "excursion_marginal", "--report", str(rep)]) == 1
    chk = json.loads(rep.read_text())["checks"][0]
    assert "stage exploded" in chk["metrics"]["error"] and chk["stage"] == "excursion_marginal"
