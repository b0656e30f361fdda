import subprocess
import sys

import pytest

from carleman_newton.cli import main, shipped_configs
from carleman_newton.experiment import load_config, read_metrics

SMOKE = "small_smoke.cfg"


def test_shipped_configs():
    assert shipped_configs() == ["paper_test1.cfg", "paper_test2.cfg", "small_smoke.cfg"]
    from carleman_newton.cli import resolve_config

    t1 = load_config(resolve_config("paper_test1.cfg"))
    assert (t1.phantom.name, t1.nonlinearity.name, t1.noise.delta, t1.basis.N, t1.grid.n1) == ("disk8", "fisher", 0.2, 35, 240)
    t2 = load_config(resolve_config("paper_test2.cfg"))
    assert (t2.phantom.name, t2.nonlinearity.name, t2.noise.delta) == ("fourdisks", "sqrt_gradient", 0.2)
    s = load_config(resolve_config(SMOKE))
    assert (s.grid.n1, s.basis.N, s.phantom.name, s.noise.delta) == (120, 10, "gaussian", 0.05)


@pytest.fixture(scope="module")
def smoke_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("full")
    assert main(["full", "--config", SMOKE, "--out", str(out), "--quiet"]) == 0
    return out


def test_full_writes_artifacts(smoke_run):
    for name in ("traces.meta", "traces.bin", "reconstruction.csv", "history.csv", "metrics.txt", "config.cfg", "reconstruction.pgm"):
        assert (smoke_run / name).exists(), name
    m = read_metrics(smoke_run / "metrics.txt")
    assert {"peak_comp", "peak_rel_err", "l2_rel_err"} <= set(m)


def test_full_is_deterministic(smoke_run, tmp_path):
    assert main(["full", "--config", SMOKE, "--out", str(tmp_path), "--quiet", "--threads", "1"]) == 0
    assert (tmp_path / "metrics.txt").read_bytes() == (smoke_run / "metrics.txt").read_bytes()
    assert (tmp_path / "reconstruction.csv").read_bytes() == (smoke_run / "reconstruction.csv").read_bytes()


def test_forward_then_invert_matches_full(smoke_run, tmp_path):
    assert main(["forward", "--config", SMOKE, "--out", str(tmp_path / "f"), "--quiet"]) == 0
    assert (tmp_path / "f" / "traces.bin").read_bytes() == (smoke_run / "traces.bin").read_bytes()
    rc = main(["invert", "--config", SMOKE, "--traces", str(tmp_path / "f" / "traces.meta"), "--out", str(tmp_path / "i"), "--quiet"])
    assert rc == 0
    assert (tmp_path / "i" / "metrics.txt").read_bytes() == (smoke_run / "metrics.txt").read_bytes()


def test_progress_goes_to_stderr(tmp_path, capsys):
    main(["full", "--config", SMOKE, "--out", str(tmp_path)])
    cap = capsys.readouterr()
    assert "iteration 1: inc_inf=" in cap.err
    assert cap.out == ""


def test_basis_diag(smoke_run, tmp_path):
    rc = main(["basis-diag", "--traces", str(smoke_run / "traces"), "--N-list", "5,10", "--out", str(tmp_path), "--quiet"])
    assert rc == 0
    summary = (tmp_path / "summary.csv").read_text().splitlines()
    assert summary[0] == "N,max_e,l2_e" and len(summary) == 3
    l2 = [float(line.split(",")[2]) for line in summary[1:]]
    assert l2[1] < l2[0]
    assert (tmp_path / "e_N5.csv").read_text().startswith("x,t,e\n")


def test_missing_traces_exit_3_without_output(tmp_path):
    out = tmp_path / "never"
    rc = main(["invert", "--config", SMOKE, "--traces", str(tmp_path / "nope.bin"), "--out", str(out), "--quiet"])
    assert rc == 3
    assert not out.exists()


def test_missing_config_exit_3(tmp_path):
    assert main(["full", "--config", str(tmp_path / "none.cfg"), "--out", str(tmp_path), "--quiet"]) == 3


def test_bad_config_exit_1(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("grid.n1=120\ncarleman.b=0.1\n")
    assert main(["full", "--config", str(cfg), "--out", str(tmp_path / "o"), "--quiet"]) == 1
    assert "line 2" in capsys.readouterr().err


def test_missing_required_flag_exit_1(tmp_path):
    assert main(["full", "--out", str(tmp_path), "--quiet"]) == 1
    assert main(["basis-diag", "--traces", "x", "--N-list", "a,b", "--out", str(tmp_path), "--quiet"]) == 1
    assert main(["verify", "--threads", "0", "--quiet"]) == 1


def test_cfl_violation_exit_2(tmp_path):
    cfg = tmp_path / "cfl.cfg"
    cfg.write_text("time.nt=1000\nbasis.N=10\n")
    assert main(["forward", "--config", str(cfg), "--out", str(tmp_path / "o"), "--quiet"]) == 2


def test_verify_command(capsys):
    assert main(["verify", "--skip-forward"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out and all(line.startswith("PASS") for line in out)


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "carleman_newton", "--help"], capture_output=True, text=True)
    assert r.returncode == 0
    for cmd in ("forward", "invert", "basis-diag", "full", "verify"):
        assert cmd in r.stdout
