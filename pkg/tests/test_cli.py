import csv
import json
import math

import numpy as np
import pytest

from windfield.cli import autocorrelation, main
from windfield.config import RunConfig, config_from_dict, load_config
from windfield.data_model import RAW_HEADER
from windfield.errors import ConfigError


def write_cfg(path, text):
    p = path / "run.toml"
    p.write_text(text)
    return str(p)


BASE = """
seed = 3
[domain]
tau = [1.0, 1.0]
[loss]
gamma_s = 0.01
[rff]
K = 20
B = 20
[evaluation]
samples = 4
hyper_samples = 3
"""


@pytest.fixture
def synth(tmp_path):
    cfg = write_cfg(tmp_path, BASE)
    out = tmp_path / "out"
    assert main(["--config", cfg, "--out-dir", str(out), "synth", "--stations", "40", "--times", "6"]) == 0
    return cfg, out


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


# ---------------------------------------------------------------- config


def test_config_defaults():
    c = RunConfig()
    assert (c.evaluation.folds, c.evaluation.samples) == (5, 500)
    assert (c.rff.K, c.rff.B, c.rff.sigma, c.rff.gamma_exp) == (400, 500, 2.25, 1.4)
    assert (c.loss.lam, c.loss.eta) == (0.01, 0.001)
    assert c.validate() is c


def test_config_file_and_overrides(tmp_path):
    path = write_cfg(tmp_path, BASE + '\n[hypersearch]\nlam = [0.5]\n')
    c = load_config(path, {"seed": 11, "jobs": None})
    assert c.seed == 11 and c.rff.K == 20 and c.hypersearch.lam == (0.5,) and c.domain.tau == (1.0, 1.0)


@pytest.mark.parametrize(
    "bad",
    [{"nope": 1}, {"evaluation": {"folds": 1}}, {"evaluation": {"samples": 0}}, {"rff": {"K": "x"}},
     {"wind_convention": "sideways"}, {"evaluation": {"exclude_months": ["Sept"]}}, {"rff": 3}],
)
def test_config_errors(bad):
    with pytest.raises(ConfigError):
        config_from_dict(bad)


def test_config_unreadable(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "missing.toml"))
    bad = tmp_path / "bad.toml"
    bad.write_text("seed = [")
    with pytest.raises(ConfigError):
        load_config(str(bad))


# ---------------------------------------------------------------- subcommands


def test_synth_outputs(synth):
    _, out = synth
    rows = read_csv(out / "synthetic.csv")
    assert rows[0] == ["station_id", "time", "x_m", "y_m", "alt_m", "u_ms", "v_ms"]
    assert len(rows) == 1 + 40 * 6
    side = json.loads((out / "synthetic.json").read_text())
    assert side["field"]["kind"] == "stream_function" and "config" in side


def test_evaluate_zero_and_truth(tmp_path):
    cfg = write_cfg(tmp_path, BASE.replace("samples = 4", "samples = 20"))
    out = tmp_path / "o"
    assert main(["--config", cfg, "--out-dir", str(out), "synth", "--stations", "171", "--times", "20", "--noise", "0.1"]) == 0
    args = ["--config", cfg, "--out-dir", str(out), "--jobs", "1", "evaluate", str(out / "synthetic.csv"),
            "--models", "zero,truth", "--truth", str(out / "synthetic.json")]
    assert main(args) == 0
    zero = json.loads((out / "report_zero.json").read_text())
    assert zero["E_tilde"] == 1.0
    for key in ("model", "samples", "Q_tilde", "var_Q", "E_tilde", "ci_half_width", "per_slice", "config"):
        assert key in zero
    truth = json.loads((out / "report_truth.json").read_text())
    # noise floor: E|eps|^2 = 2 sigma^2
    assert truth["Q_tilde"] == pytest.approx(2 * 0.1**2, rel=0.05)
    rows = read_csv(out / "per_slice_truth.csv")
    assert rows[0] == ["time", "N", "Q", "Q_zero"] and len(rows) == 21
    assert read_csv(out / "differences.csv")[0][0] == "model"


def test_evaluate_deterministic_across_jobs(synth, tmp_path):
    cfg, out = synth
    data = str(out / "synthetic.csv")
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["--config", cfg, "--out-dir", str(a), "--jobs", "1", "evaluate", data, "--models", "rff,idw"]) == 0
    assert main(["--config", cfg, "--out-dir", str(b), "--jobs", "3", "evaluate", data, "--models", "rff,idw"]) == 0
    for name in ("per_slice_rff.csv", "per_slice_idw.csv", "differences.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    ra, rb = (json.loads((d / "report_rff.json").read_text()) for d in (a, b))
    # the echoed config records the worker count; everything else must match exactly
    assert ra.pop("config")["jobs"] == 1 and rb.pop("config")["jobs"] == 3
    assert ra == rb


def test_evaluate_insufficient_slices(synth):
    cfg, out = synth
    rc = main(["--config", cfg, "--out-dir", str(out), "evaluate", str(out / "synthetic.csv"), "--models", "zero"])
    assert rc == 0
    cfg2 = cfg.replace("run.toml", "run2.toml")
    with open(cfg2, "w") as fh:
        fh.write(BASE.replace("samples = 4", "samples = 7"))
    assert main(["--config", cfg2, "--out-dir", str(out), "evaluate", str(out / "synthetic.csv")]) == 3


def test_hypersearch(synth, tmp_path):
    cfg, out = synth
    data = str(out / "synthetic.csv")
    path = write_cfg(tmp_path, BASE + "\n[hypersearch]\nlam = [0.01, 1e6]\neta = [0.001]\n")
    assert main(["--config", path, "--out-dir", str(out), "--jobs", "1", "hypersearch", data]) == 0
    rows = read_csv(out / "hypersearch.csv")
    assert rows[0] == ["lambda", "eta", "E_tilde", "var"] and len(rows) == 3
    best = json.loads((out / "hypersearch_best.json").read_text())
    assert best["lambda"] != 1e6
    one = write_cfg(tmp_path, BASE + "\n[hypersearch]\nlam = [0.01]\neta = [0.0]\n")
    assert main(["--config", one, "--out-dir", str(out), "--jobs", "1", "hypersearch", data]) == 0
    assert len(read_csv(out / "hypersearch.csv")) == 2
    empty = write_cfg(tmp_path, BASE + "\n[hypersearch]\nlam = []\n")
    assert main(["--config", empty, "--out-dir", str(out), "hypersearch", data]) == 2
    # hyperopt and validation samples must differ
    assert main(["--config", one, "--seed", "1", "--out-dir", str(out), "hypersearch", data]) == 2


def test_reconstruct(synth):
    cfg, out = synth
    data = str(out / "synthetic.csv")
    common = ["--config", cfg, "--out-dir", str(out)]
    assert main(common + ["reconstruct", data, "--model", "zero", "--nx", "2", "--ny", "2"]) == 0
    rows = read_csv(out / "reconstruct.csv")
    assert rows[0] == ["x", "y", "u", "v"] and len(rows) == 5
    assert len({tuple(r[2:]) for r in rows[1:]}) == 1
    args = common + ["reconstruct", data, "--model", "truth", "--truth", str(out / "synthetic.json"), "--div",
                     "--nx", "6", "--ny", "6", "--bbox", "0.05", "0.05", "0.95", "0.95"]
    assert main(args) == 0
    g = np.array(read_csv(out / "reconstruct.csv")[1:], dtype=float)
    speed = np.abs(g[:, 2:4]).max()
    assert np.abs(g[:, 4]).max() <= 1e-4 * speed
    assert main(common + ["reconstruct", data, "--time", "2030-01-01T00:00:00Z"]) == 3


def test_fit_commands(synth):
    cfg, out = synth
    data = str(out / "synthetic.csv")
    common = ["--config", cfg, "--out-dir", str(out)]
    assert main(common + ["fit-rff", data, "--time", "2018-01-01T01:00:00Z"]) == 0
    hist = read_csv(out / "rff_history.csv")
    assert hist[0] == ["step", "k", "m1", "m2", "accepted"] and len(hist) == 1 + 20 * 20
    model = json.loads((out / "rff_model.json").read_text())
    assert set(model["model"]) == {"tau", "origin", "lattice", "beta"}
    assert main(common + ["fit-fourier", data]) == 0
    for m in ("nn", "idw", "kriging", "forest"):
        assert main(common + ["fit-baseline", data, "--model", m]) == 0
    assert "variogram" in json.loads((out / "kriging_model.json").read_text())


def test_ingest_raw_and_conventions(tmp_path):
    data = tmp_path / "raw.csv"
    data.write_text(
        ",".join(RAW_HEADER)
        + "\nA,2018-08-31T23:00:00Z,60,15,10,2,0\nA,2018-09-01T00:00:00Z,60,15,10,2,0\n"
    )
    for conv, v in (("heading-ccw", 2.0), ("meteo", -2.0)):
        out = tmp_path / conv
        assert main(["--out-dir", str(out), "--wind-convention", conv, "ingest", str(data)]) == 0
        rows = read_csv(out / "observations.csv")
        assert float(rows[1][6]) == pytest.approx(v) and float(rows[1][2]) == 500000.0
    cfg = write_cfg(tmp_path, '[evaluation]\nexclude_months = ["2018-09"]\n')
    out = tmp_path / "ex"
    assert main(["--config", cfg, "--out-dir", str(out), "ingest", str(data)]) == 0
    assert json.loads((out / "ingest.json").read_text())["slices"] == 1


def test_exit_codes(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text(",".join(RAW_HEADER) + "\nA,notatime,60,15,10,1,0\n")
    assert main(["--out-dir", str(tmp_path), "ingest", str(bad)]) == 3
    assert main(["--out-dir", str(tmp_path), "ingest", str(tmp_path / "missing.csv")]) == 3
    assert main(["--out-dir", str(tmp_path), "ingest"]) == 2
    cfg = write_cfg(tmp_path, "[evaluation]\nfolds = 1\n")
    assert main(["--config", cfg, "ingest", str(bad)]) == 2


def test_autocorr_examples():
    assert autocorrelation(np.full(10, 3.0), 3) is None
    acf = autocorrelation(np.random.default_rng(0).normal(size=50), 5)
    assert acf[0] == 1.0
    rng = np.random.default_rng(1)
    x = np.zeros(10_000)
    e = rng.normal(size=10_000)
    for t in range(1, len(x)):
        x[t] = 0.9 * x[t - 1] + e[t]
    assert abs(autocorrelation(x, 1)[1] - 0.9) <= 0.02


def test_autocorr_cli(tmp_path, caplog):
    lines = [",".join(["station_id", "time", "x_m", "y_m", "alt_m", "u_ms", "v_ms"])]
    rng = np.random.default_rng(0)
    for h in range(30):
        t = f"2018-01-02T{h % 24:02d}:00:00Z" if h < 24 else f"2018-01-03T{h - 24:02d}:00:00Z"
        lines.append(f"A,{t},0,0,0,{rng.normal()},{rng.normal()}")
        lines.append(f"B,{t},1,0,0,1.0,{rng.normal()}")
    lines.append("C,2018-01-02T00:00:00Z,2,0,0,1,1")
    data = tmp_path / "series.csv"
    data.write_text("\n".join(lines) + "\n")
    with caplog.at_level("WARNING"):
        assert main(["--out-dir", str(tmp_path), "autocorr", str(data), "--max-lag", "4"]) == 0
    rows = read_csv(tmp_path / "autocorr.csv")
    assert rows[0] == ["station_id", "component", "lag", "acf"]
    by = {(r[0], r[1], int(r[2])): r[3] for r in rows[1:]}
    assert float(by[("A", "u", 0)]) == 1.0
    assert by[("B", "u", 0)] == ""  # constant series
    assert not any(k[0] == "C" for k in by)
    assert "constant" in caplog.text and "fewer than 2" in caplog.text


def test_oracle(tmp_path, capsys):
    prof = tmp_path / "p.json"
    prof.write_text(json.dumps({"support": [[1, 0], [0, 1]], "norms": [3.0, 1.0]}))
    assert main(["--out-dir", str(tmp_path), "oracle", str(prof), "--out-json"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["optimal_density"] == [0.75, 0.25]
    assert out["brute_force_linf"] <= 0.005
    assert out["bound_optimal"] <= out["bound_uniform"]
    assert "config" in json.loads((tmp_path / "oracle.json").read_text())
    assert main(["oracle", str(tmp_path / "missing.json")]) == 2
