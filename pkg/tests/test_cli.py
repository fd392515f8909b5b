import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from mtw import __version__, cli, fit, model, sim, specfun
from mtw.model import MtwParams

SPLIT = ["--K", "1", "--delta", "0.8", "--mu", "2", "--gbar", "1"]


def invoke(capsys, *argv):
    code = cli.run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def parse_csv(text):
    lines = text.splitlines()
    assert lines[0].startswith("# ")
    meta = json.loads(lines[0][2:])
    rows = list(csv.reader(io.StringIO("\n".join(lines[1:]))))
    return meta, rows[0], np.array(rows[1:], dtype=float)


def test_pdf_grid_curve(capsys):
    code, out, _ = invoke(capsys, "pdf", *SPLIT, "--xmax", "5", "--points", "200")
    assert code == 0
    meta, header, data = parse_csv(out)
    assert header == ["x", "pdf"] and data.shape == (200, 2)
    assert meta["mtw_version"] == __version__
    assert meta["config"]["delta"] == [0.8] and meta["config"]["points"] == 200
    p = MtwParams(1.0, (0.8,), 2.0, 1.0)
    assert np.array_equal(data[:, 0], np.linspace(0, 5, 200))
    assert np.allclose(data[:, 1], model.pdf(p, data[:, 0]), rtol=1e-15, atol=0)


def test_rows_round_trip_at_full_precision(capsys):
    _, out, _ = invoke(capsys, "cdf", *SPLIT, "--points", "7")
    for line in out.splitlines()[2:]:
        for field in line.split(","):
            v = float(field)
            assert float(format(v, ".17g")) == v


def test_delta_sum_error(capsys):
    code, _, err = invoke(capsys, "pdf", "--K", "1", "--delta", "0.7", "--delta", "0.7", "--mu", "2")
    assert code == 1
    assert "sum of delta exceeds 1" in err


@pytest.mark.parametrize("argv", [["pdf", "--bogus", "1"], ["nosuch"], [], ["pdf", "--K", "abc"]])
def test_usage_errors_exit_one(capsys, argv):
    code, _, err = invoke(capsys, *argv)
    assert code == 1
    assert "usage:" in err


def test_numeric_failure_exits_two(capsys):
    # s beyond the MGF pole at mu (1 + K) / gbar = 4
    code, _, err = invoke(capsys, "mgf", *SPLIT, "--smin", "4.5", "--smax", "5", "--points", "2")
    assert code == 2
    assert err.startswith("numeric failure:") and "pole" in err


def test_selftest(capsys):
    code, out, _ = invoke(capsys, "selftest")
    assert code == 0
    lines = out.strip().splitlines()
    assert len(lines) >= 8
    assert all(line.endswith(": ok") for line in lines)


def test_identical_argv_gives_identical_bytes(capsys):
    argv = ["roc", "--K", "10", "--delta", "0.3", "--mu", "5", "--u", "2", "--points", "9"]
    assert invoke(capsys, *argv)[1] == invoke(capsys, *argv)[1]


def test_entry_point_is_byte_stable(tmp_path):
    argv = [sys.executable, "-m", "mtw", "outage", *SPLIT, "--points", "5"]
    a = subprocess.run(argv, capture_output=True, check=True).stdout
    b = subprocess.run(argv, capture_output=True, check=True).stdout
    assert a == b and a.startswith(b"# {")


def test_config_file_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"K": 3.0, "delta": [0.5], "mu": 4.0, "points": 4}))
    _, out, _ = invoke(capsys, "pdf", "--config", str(cfg), "--mu", "2")
    meta, _, data = parse_csv(out)
    assert meta["config"]["K"] == 3.0 and meta["config"]["mu"] == 2.0
    assert meta["config"]["config"] == str(cfg)
    assert data.shape == (4, 2)
    p = MtwParams(3.0, (0.5,), 2.0, 1.0)
    assert np.allclose(data[:, 1], model.pdf(p, data[:, 0]), rtol=1e-15, atol=0)


def test_bad_config_file(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text("{not json")
    assert invoke(capsys, "pdf", "--config", str(cfg))[0] == 1
    cfg.write_text(json.dumps({"frobnicate": 1}))
    assert invoke(capsys, "pdf", "--config", str(cfg))[0] == 1


def test_json_output_and_file_target(tmp_path, capsys):
    out = tmp_path / "m.json"
    code, stdout, _ = invoke(capsys, "moments", *SPLIT, "--nmax", "3", "--format", "json", "--out", str(out))
    assert code == 0 and stdout == ""
    doc = json.loads(out.read_text())
    assert doc["meta"]["columns"] == ["n", "moment"]
    p = MtwParams(1.0, (0.8,), 2.0, 1.0)
    got = {int(n): v for n, v in doc["rows"]}
    assert got[0] == 1.0
    assert got[3] == pytest.approx(model.moment(p, 3), rel=1e-15)


@pytest.mark.parametrize(
    "argv",
    [
        ["aof", *SPLIT],
        ["mgf", *SPLIT, "--order", "2", "--points", "4"],
        ["outage", *SPLIT, "--rate", "1", "--points", "4"],
        ["sir-outage", "--K", "10", "--delta", "0.8", "--mu", "2", "--branches", "3", "--interferers", "2",
         "--beta", "10", "--points", "4"],
        ["roc", "--K", "10", "--delta", "0.3", "--mu", "5", "--u", "1", "--points", "4"],
        ["auc", "--K", "10", "--delta", "0.3", "--mu", "5", "--u", "2"],
        ["composite", *SPLIT, "--lam", "3", "--kind", "outage", "--points", "4"],
        ["composite", *SPLIT, "--lam", "3", "--kind", "pdf", "--points", "4"],
        ["cdf", *SPLIT, "--method", "integral", "--points", "4"],
    ],
)
def test_subcommands_run(capsys, argv):
    code, out, _ = invoke(capsys, *argv)
    assert code == 0
    meta, header, data = parse_csv(out)
    assert meta["config"]["command"] == argv[0]
    assert len(header) == data.shape[1] and np.all(np.isfinite(data))


def test_auc_value(capsys):
    from mtw import metrics

    _, out, _ = invoke(capsys, "auc", "--K", "10", "--delta", "0.3", "--mu", "5", "--u", "2")
    _, _, data = parse_csv(out)
    assert data.ravel()[-1] == metrics.auc(MtwParams(10.0, (0.3,), 5.0, 1.0), 2)


def test_simulate_then_fit(tmp_path, capsys):
    samples = tmp_path / "env.txt"
    code, _, _ = invoke(capsys, "simulate", "--K", "5", "--delta", "0.5", "--mu", "3", "--n", "100000",
                        "--seed", "7", "--kind", "envelope", "--out", str(samples))
    assert code == 0
    side = json.loads((tmp_path / "env.txt.json").read_text())
    assert side["seed"] == 7 and side["n"] == 100000 and side["kind"] == "envelope"
    expect = sim.sample_params(MtwParams(5.0, (0.5,), 3.0, 1.0), 100000, seed=7).as_envelope().values
    assert np.array_equal(np.loadtxt(samples), expect)

    report = tmp_path / "report.json"
    code, _, _ = invoke(capsys, "fit", "--input", str(samples), "--restarts", "2", "--out", str(report))
    assert code == 0
    doc = json.loads(report.read_text())
    assert set(doc) >= {"params", "mse", "iterations", "converged", "normalization_scale"}
    assert set(doc["params"]) == {"K", "delta", "mu"}
    loaded = fit.load_samples(samples)
    ref = fit.fit(fit.empirical_pdf(loaded), restarts=2)
    assert doc["normalization_scale"] == loaded.meta["normalization_scale"]
    assert doc["params"]["K"] == ref.params.K and doc["mse"] == ref.mse


def test_fit_reports_bad_input(tmp_path, capsys):
    f = tmp_path / "bad.txt"
    f.write_text("1.0\n-2.0\n")
    code, _, err = invoke(capsys, "fit", "--input", str(f))
    assert code == 1 and "line 2" in err


@pytest.mark.parametrize(
    "argv, expected",
    [
        (["--func", "marcumq", "--order", "1.5", "--a", "2", "--b", "1"], lambda: specfun.marcum_q(1.5, 2.0, 1.0)),
        (["--func", "besseli-scaled", "--order", "2", "--x", "3"], lambda: specfun.ive(2, 3.0)),
        (["--func", "gammaincc", "--a", "2", "--x", "3"], lambda: specfun.reg_upper_gamma(2.0, 3.0)),
        (["--func", "lngamma", "--a", "7"], lambda: specfun.ln_gamma(7.0)),
    ],
)
def test_specfun_probe(capsys, argv, expected):
    code, out, _ = invoke(capsys, "specfun-probe", *argv)
    assert code == 0
    assert float(out) == expected()


def test_probe_is_not_advertised(capsys):
    with pytest.raises(SystemExit):
        cli.run(["-h"])
    out = capsys.readouterr().out
    assert "probe" not in out and "SUPPRESS" not in out
