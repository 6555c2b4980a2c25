import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from subpop_uda.cli import PRED_HEADER, main
from subpop_uda.core import Dataset, load_csv, load_truth, write_csv
from subpop_uda.synthgen import CELLS


@pytest.fixture(scope="module")
def simulated(tmp_path_factory):
    d = tmp_path_factory.mktemp("sim")
    data = d / "data.csv"
    assert main(["simulate", "--n1", "1500", "--n0", "1500", "--seed", "7", "--out", str(data)]) == 0
    return d, data


def test_simulate_writes_data_and_truth(simulated):
    d, data = simulated
    ds = load_csv(data)
    truth = load_truth(d / "data.truth.csv")
    assert ds.n == 3000 and ds.q == 4
    assert set(truth) == set(np.flatnonzero(ds.r == 0).tolist())


def test_fit_predict_evaluate(simulated, capsys):
    d, data = simulated
    model, pred, scores = d / "model.json", d / "pred.csv", d / "scores.json"
    assert main(["fit", "--data", str(data), "--beta-method", "kl", "--out", str(model)]) == 0
    spec = json.loads(model.read_text())
    assert set(spec) == {"models", "proportions", "threshold"}
    assert set(spec["models"]) == {"xi0", "xi", "tau0", "tau1", "kappa"}

    assert main(["predict", "--model", str(model), "--data", str(data), "--out", str(pred)]) == 0
    with open(pred) as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == PRED_HEADER and len(rows) == 1 + 1500
    assert all(0.0 <= float(v) <= 1.0 for r in rows[1:] for v in r[1:8])

    assert main(["evaluate", "--pred", str(pred), "--truth", str(d / "data.truth.csv"),
                 "--data", str(data), "--out", str(scores)]) == 0
    out = json.loads(scores.read_text())
    assert out["eta"]["n_eval"] == out["eta1"]["n_eval"] + out["eta0"]["n_eval"] == 1500
    assert 0.5 < out["eta"]["accuracy"] <= 1.0


def test_fit_with_moment_and_user_values(simulated):
    d, data = simulated
    out = d / "m.json"
    assert main(["fit", "--data", str(data), "--beta-method", "moment", "--moment-coord", "1",
                 "--out", str(out)]) == 0
    assert main(["fit", "--data", str(data), "--beta-method", "user", "--beta10", "0.25", "--beta00", "0.25",
                 "--beta01-method", "user", "--beta01", "0.25", "--out", str(out)]) == 0
    tgt = json.loads(out.read_text())["proportions"]
    assert tgt["beta10"] == 0.25 and tgt["beta11"] == pytest.approx(0.25)


def test_split_pool(tmp_path):
    rng = np.random.default_rng(0)
    cells = np.repeat(np.arange(4), 200)
    y = np.array([CELLS[k][0] for k in cells])
    a = np.array([CELLS[k][1] for k in cells])
    pool = tmp_path / "pool.csv"
    write_csv(Dataset(rng.normal(size=(800, 3)), np.ones(800), y, a), pool)
    out = tmp_path / "split.csv"
    assert main(["split", "--pool", str(pool), "--a", "0.4", "--b", "0.6", "--c", "0.5", "--seed", "1",
                 "--out", str(out)]) == 0
    ds = load_csv(out)
    assert not np.any((ds.r == 1) & (ds.y == 1) & (ds.a == 1))
    assert len(load_truth(tmp_path / "split.truth.csv")) == int(np.sum(ds.r == 0))


def test_experiment_from_toml(tmp_path):
    cfg = tmp_path / "exp.toml"
    cfg.write_text('n1 = 400\nn0 = 400\nreplications = 2\nseed = 3\n')
    out = tmp_path / "out"
    assert main(["experiment", "--config", str(cfg), "--out-dir", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["replications"] == 2
    assert (out / "metrics.csv").read_text().startswith("rep,tag,n_eval,accuracy,f1,clamp_rate,")


class TestExitCodes:
    def test_zero_replications_is_usage_error(self, tmp_path):
        assert main(["experiment", "--replications", "0", "--out-dir", str(tmp_path)]) == 1

    def test_unknown_command(self):
        with pytest.raises(SystemExit) as err:
            main(["frobnicate"])
        assert err.value.code == 1

    def test_malformed_data(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("1,0,1,abc\n")
        assert main(["fit", "--data", str(bad), "--out", str(tmp_path / "m.json")]) == 2

    def test_missing_file(self, tmp_path):
        assert main(["fit", "--data", str(tmp_path / "nope.csv"), "--out", str(tmp_path / "m.json")]) == 2

    def test_estimation_error(self, tmp_path):
        # source without any y=1 row: the xi fit is degenerate
        rows = [(1, 0, 0), (1, 0, 1), (0, -1, 0), (0, -1, 1)] * 10
        r, y, a = map(np.array, zip(*rows))
        data = tmp_path / "d.csv"
        write_csv(Dataset(np.random.default_rng(0).normal(size=(40, 2)), r, y, a), data)
        assert main(["fit", "--data", str(data), "--out", str(tmp_path / "m.json")]) == 3


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "subpop_uda", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "simulate" in out.stdout
