import csv
import re
from pathlib import Path

import pytest

from sttr import cli
from sttr.estimators import NumericalError

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
SHORT = "[scenario]\nduration = 2.0\nseed = 4\n"


@pytest.fixture
def short_cfg(tmp_path):
    p = tmp_path / "short.cfg"
    p.write_text(SHORT)
    return p


def read(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_run_outputs(tmp_path, short_cfg):
    out = tmp_path / "run"
    assert cli.main(["run", "--config", str(short_cfg), "--out", str(out)]) == 0
    for f in ("trace.csv", "metrics.csv", "summary.txt", "topology.csv", "observability.csv",
              "errors.png", "trajectories.png"):
        assert (out / f).stat().st_size > 0
    rows = read(out / "trace.csv")
    header = rows[0]
    assert header[:8] == ["step", "time", "truth_px", "truth_py", "truth_pz", "truth_vx",
                          "truth_vy", "truth_vz"]
    assert "sttr_o5_vz" in header and "g_o0_x" in header and header[-1] == "rank_o5"
    assert len(rows) == 1 + 40 and all(len(r) == len(header) for r in rows)
    assert [int(r[0]) for r in rows[1:]] == list(range(40))
    # 9 significant digits at most
    for cell in rows[5][1:]:
        mant = re.sub(r"e.*$", "", cell.lstrip("-")).replace(".", "").lstrip("0")
        assert len(mant) <= 9
    metrics = read(out / "metrics.csv")
    assert metrics[0] == ["estimator", "pos_rmse", "vel_rmse", "pos_rmse_ss", "vel_rmse_ss",
                          "lag"]
    assert [r[0] for r in metrics[1:]] == ["ckf", "cikf", "cmkf", "stt", "sttr"]
    assert read(out / "topology.csv")[0] == ["step", "observer", "neighbor1", "neighbor2",
                                             "neighbor3"]
    assert "[sttr]" in (out / "summary.txt").read_text()


def test_trace_is_bit_identical(tmp_path, short_cfg):
    for d in ("a", "b"):
        assert cli.main(["run", "--config", str(short_cfg), "--out", str(tmp_path / d),
                         "--no-plots"]) == 0
    assert (tmp_path / "a/trace.csv").read_bytes() == (tmp_path / "b/trace.csv").read_bytes()


def test_mc_sweep_obsv(tmp_path, short_cfg):
    assert cli.main(["mc", "--config", str(short_cfg), "--out", str(tmp_path / "mc"),
                     "--trials", "3"]) == 0
    rows = read(tmp_path / "mc/metrics.csv")
    assert len(rows) == 1 + 3 * 5 and rows[1][:3] == ["0", "4", "ckf"]
    assert (tmp_path / "mc/summary.csv").exists() and (tmp_path / "mc/rmse.png").exists()

    assert cli.main(["sweep", "--config", str(short_cfg), "--out", str(tmp_path / "sw"),
                     "--grid", "sttr.c2=0,0.032", "--trials", "2"]) == 0
    rows = read(tmp_path / "sw/sweep.csv")
    assert rows[0] == ["rank", "sttr.c2", "estimator", "pos_rmse_ss", "vel_rmse_ss", "score"]
    assert len(rows) == 3 and (tmp_path / "sw/sweep.png").exists()

    assert cli.main(["obsv", "--config", str(short_cfg), "--out", str(tmp_path / "ob")]) == 0
    rows = read(tmp_path / "ob/observability.csv")
    assert rows[0] == ["step", "observer", "rank", "s1", "s2", "s3", "s4", "s5", "s6", "margin"]
    assert len(rows) == 1 + 40 * 6 and (tmp_path / "ob/observability.png").exists()


def test_shipped_config_runs(tmp_path):
    assert cli.main(["obsv", "--config", str(CONFIGS / "square.cfg"), "--out", str(tmp_path),
                     "--no-plots", "--empirical"]) == 0


@pytest.mark.parametrize("args", [
    ["run", "--config", "{bad}", "--out", "{out}"],
    ["run", "--config", "{missing}", "--out", "{out}"],
    ["sweep", "--out", "{out}", "--grid", "nonsense"],
    ["sweep", "--out", "{out}"],
    ["sweep", "--out", "{out}", "--grid", "sttr.nope=1"],
    ["sweep", "--out", "{out}", "--grid", "sttr.gamma1=-1"],
    ["mc", "--out", "{out}", "--trials", "0"],
])
def test_config_errors_exit_2(tmp_path, args, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("[scenario]\ndt = -1\n")
    subs = {"bad": bad, "missing": tmp_path / "none.cfg", "out": tmp_path / "o"}
    assert cli.main([a.format(**subs) for a in args]) == cli.EXIT_CONFIG == 2
    assert "config error" in capsys.readouterr().err


def test_numerical_failure_exit_3(tmp_path, monkeypatch, capsys):
    def boom(*a, **k):
        raise NumericalError("matrix is not positive definite")

    monkeypatch.setattr(cli, "run_scenario", boom)
    assert cli.main(["run", "--out", str(tmp_path)]) == cli.EXIT_NUMERICAL == 3
    assert "numerical failure" in capsys.readouterr().err
