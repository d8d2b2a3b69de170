import json

import numpy as np
import pytest

from perstrees.cli import main
from perstrees.data import load_csv
from perstrees.model_io import load_model
from perstrees.risk import oracle_metrics
from perstrees.submatch import load_matched_csv


def run(*argv):
    """Invoke the CLI in-process; argparse exits become return codes."""
    try:
        return main(list(argv))
    except SystemExit as exc:
        return exc.code


@pytest.fixture
def quad_spec(tmp_path):
    path = tmp_path / "spec.json"
    path.write_text(json.dumps({"preset": "quadratic", "n": 120, "seed": 3}))
    return path


@pytest.fixture
def quad_csv(tmp_path, quad_spec):
    out = tmp_path / "data.csv"
    assert run("gen-data", "--spec", str(quad_spec), "--out", str(out)) == 0
    return out


class TestGenData:
    def test_writes_loadable_csv(self, tmp_path, quad_spec, capsys):
        out = tmp_path / "data.csv"
        assert run("gen-data", "--spec", str(quad_spec), "--out", str(out)) == 0
        assert "120 rows" in capsys.readouterr().out
        ds = load_csv(out, cf_cols=["y1", "y2"], q_col="q")
        assert (ds.n, ds.d, ds.m) == (120, 2, 2)
        assert ds.CF is not None and ds.Q is not None

    def test_rerun_is_byte_identical(self, tmp_path, quad_spec):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert run("gen-data", "--spec", str(quad_spec), "--out", str(a)) == 0
        assert run("gen-data", "--spec", str(quad_spec), "--out", str(b)) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_explicit_spec_without_preset(self, tmp_path):
        spec = tmp_path / "spec.json"
        spec.write_text(
            json.dumps(
                {
                    "n": 50,
                    "d": 3,
                    "m": 2,
                    "seed": 1,
                    "outcome_model": {"name": "linear", "coef": [[1, 0, 0], [0, 1, 0]]},
                    "propensity_model": {"name": "uniform"},
                }
            )
        )
        out = tmp_path / "data.csv"
        assert run("gen-data", "--spec", str(spec), "--out", str(out)) == 0
        assert load_csv(out, cf_cols=["y1", "y2"], q_col="q").d == 3


class TestTrainPredictEvaluate:
    def test_full_pipeline(self, tmp_path, quad_csv, capsys):
        cols = ("--cf-cols", "y1,y2", "--q-col", "q")
        model = tmp_path / "model.json"
        code = run(
            "train", "--algo", "pt", "--data", str(quad_csv), *cols,
            "--params", '{"n_min_leaf": 5, "delta_max": 2}', "--out", str(model),
        )
        assert code == 0
        assert json.loads(model.read_text())["kind"] == "pt"

        pres = tmp_path / "pres.csv"
        code = run(
            "predict", "--model", str(model), "--data", str(quad_csv), *cols,
            "--out", str(pres),
        )
        assert code == 0
        lines = pres.read_text().splitlines()
        assert lines[0] == "prescription"
        assert len(lines) == 121
        assert set(lines[1:]) <= {"1", "2"}

        capsys.readouterr()
        code = run(
            "evaluate", "--model", str(model), "--data", str(quad_csv), *cols,
            "--oracle",
        )
        assert code == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["protocol"] == "oracle" and doc["n_test"] == 120

        # the CLI must agree with the library on the same inputs
        ds = load_csv(quad_csv, cf_cols=["y1", "y2"], q_col="q")
        score = oracle_metrics(ds, load_model(model))
        assert doc["risk"] == score.risk
        assert doc["p1"] == pytest.approx(score.p1)

    def test_train_is_deterministic(self, tmp_path, quad_csv):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        args = ("train", "--algo", "pf", "--data", str(quad_csv),
                "--params", '{"trees_count": 4, "n_min_leaf": 8}', "--seed", "5")
        assert run(*args, "--out", str(a)) == 0
        assert run(*args, "--out", str(b)) == 0
        assert a.read_bytes() == b.read_bytes()

    @pytest.mark.parametrize(
        "algo,params",
        [
            ("rc-ols", "{}"),
            ("rc-knn", '{"k": 5}'),
            ("1va-ols", "{}"),
            ("1v1b-knn", '{"k": 5}'),
        ],
    )
    def test_baseline_algorithms_train(self, tmp_path, quad_csv, algo, params):
        model = tmp_path / "model.json"
        code = run(
            "train", "--algo", algo, "--data", str(quad_csv),
            "--params", params, "--out", str(model),
        )
        assert code == 0
        assert load_model(model).m == 2

    def test_optimal_tree_trains_to_tree_model(self, tmp_path, quad_csv):
        model = tmp_path / "model.json"
        code = run(
            "train", "--algo", "opt", "--data", str(quad_csv),
            "--params", '{"delta": 1, "n_min_leaf": 5, "n_cuts": 3}',
            "--out", str(model),
        )
        assert code == 0
        doc = json.loads(model.read_text())
        assert doc["kind"] == "pt"
        assert "split" in doc["root"]

    def test_greedy_evaluation(self, tmp_path, quad_csv, capsys):
        model = tmp_path / "model.json"
        run("train", "--algo", "pt", "--data", str(quad_csv),
            "--params", '{"n_min_leaf": 10}', "--out", str(model))
        metrics = tmp_path / "metrics.json"
        capsys.readouterr()
        code = run(
            "evaluate", "--model", str(model), "--data", str(quad_csv),
            "--greedy", "25", "--seed", "2", "--out", str(metrics),
        )
        assert code == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["protocol"] == "greedy-submatch" and doc["n_test"] == 25
        assert json.loads(metrics.read_text()) == doc


class TestSubmatchCommand:
    def test_greedy(self, tmp_path, quad_csv):
        out = tmp_path / "matched.csv"
        code = run(
            "submatch", "--data", str(quad_csv), "--method", "greedy",
            "--n-test", "15", "--seed", "4", "--out", str(out),
        )
        assert code == 0
        assert len(load_matched_csv(out)["drawn"]) == 15

    def test_optimal(self, tmp_path, quad_csv):
        out = tmp_path / "matched.csv"
        code = run(
            "submatch", "--data", str(quad_csv), "--method", "optimal",
            "--n-pair", "10", "--out", str(out),
        )
        assert code == 0
        back = load_matched_csv(out)
        assert len(back["drawn"]) == 20  # two test rows per pair

    def test_greedy_needs_n_test(self, quad_csv, tmp_path):
        code = run(
            "submatch", "--data", str(quad_csv), "--method", "greedy",
            "--out", str(tmp_path / "m.csv"),
        )
        assert code == 1


class TestExportMip:
    def test_writes_mps_and_names(self, tmp_path, quad_csv, capsys):
        out = tmp_path / "model.mps"
        code = run(
            "export-mip", "--data", str(quad_csv), "--delta", "1",
            "--n-min-leaf", "2", "--n-cuts", "3", "--out", str(out),
        )
        assert code == 0
        assert "binary" in capsys.readouterr().out
        assert out.read_text().startswith("NAME")
        names = json.loads((tmp_path / "model.names.json").read_text())
        assert names["objective"] == "OBJ"

    def test_rerun_is_byte_identical(self, tmp_path, quad_csv):
        a, b = tmp_path / "a.mps", tmp_path / "b.mps"
        args = ("export-mip", "--data", str(quad_csv), "--delta", "1",
                "--n-min-leaf", "2", "--n-cuts", "3")
        assert run(*args, "--out", str(a)) == 0
        assert run(*args, "--out", str(b)) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_infeasible_sizes_exit_2(self, tmp_path, quad_csv):
        code = run(
            "export-mip", "--data", str(quad_csv), "--delta", "2",
            "--n-min-leaf", "40", "--out", str(tmp_path / "m.mps"),
        )
        assert code == 2


class TestExperiment:
    def config_doc(self, tmp_path, output):
        return {
            "version": 1,
            "data": {"preset": "quadratic"},
            "algorithms": [
                {"name": "pt", "params": {"n_min_leaf": 5}, "label": "tree"},
                "rc-ols",
            ],
            "n_grid": [60, 90],
            "replications": 2,
            "protocol": {"kind": "oracle", "n_test": 40},
            "master_seed": 5,
            "output": str(output),
        }

    def test_oracle_protocol(self, tmp_path, capsys):
        out = tmp_path / "curve.csv"
        cfg = tmp_path / "config.json"
        cfg.write_text(json.dumps(self.config_doc(tmp_path, out)))
        assert run("experiment", "--config", str(cfg)) == 0
        assert "8 rows" in capsys.readouterr().out
        lines = out.read_text().splitlines()
        assert lines[0] == "algo,n,replication,risk,p1,p2"
        assert len(lines) == 9
        cells = [line.split(",")[:3] for line in lines[1:]]
        assert cells == sorted(cells)
        assert {c[0] for c in cells} == {"tree", "rc-ols"}
        for line in lines[1:]:
            assert np.isfinite(float(line.split(",")[3]))

    def test_rerun_is_byte_identical(self, tmp_path):
        out = tmp_path / "curve.csv"
        cfg = tmp_path / "config.json"
        doc = self.config_doc(tmp_path, out)
        doc["n_grid"] = [60]
        doc["replications"] = 1
        cfg.write_text(json.dumps(doc))
        assert run("experiment", "--config", str(cfg)) == 0
        first = out.read_bytes()
        assert run("experiment", "--config", str(cfg)) == 0
        assert out.read_bytes() == first

    def test_submatch_protocol(self, tmp_path):
        out = tmp_path / "curve.csv"
        cfg = tmp_path / "config.json"
        doc = self.config_doc(tmp_path, out)
        doc["algorithms"] = [{"name": "pt", "params": {"n_min_leaf": 5}}]
        doc["n_grid"] = [100]
        doc["replications"] = 1
        doc["protocol"] = {"kind": "greedy-submatch", "n_test": 20}
        cfg.write_text(json.dumps(doc))
        assert run("experiment", "--config", str(cfg)) == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 2
        assert np.isfinite(float(lines[1].split(",")[3]))

    def test_bad_config_exits_1(self, tmp_path):
        cfg = tmp_path / "config.json"
        doc = self.config_doc(tmp_path, tmp_path / "curve.csv")
        doc["algorithms"] = ["no-such-algo"]
        cfg.write_text(json.dumps(doc))
        assert run("experiment", "--config", str(cfg)) == 1


class TestExitCodes:
    def test_usage_errors_exit_1(self, tmp_path, quad_csv):
        assert run("no-such-command") == 1
        assert run("train", "--algo", "pt") == 1  # missing required args
        assert run(
            "train", "--algo", "bogus", "--data", str(quad_csv),
            "--out", str(tmp_path / "m.json"),
        ) == 1

    def test_missing_file_exits_2(self, tmp_path):
        assert run(
            "train", "--algo", "pt", "--data", str(tmp_path / "nope.csv"),
            "--out", str(tmp_path / "m.json"),
        ) == 2

    def test_malformed_csv_exits_2(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("a,b\n1,2\n")  # lacks treatment/outcome columns
        assert run(
            "train", "--algo", "pt", "--data", str(bad),
            "--out", str(tmp_path / "m.json"),
        ) == 2

    def test_invalid_spec_json_exits_2(self, tmp_path):
        spec = tmp_path / "spec.json"
        spec.write_text("{not json")
        assert run("gen-data", "--spec", str(spec), "--out", str(tmp_path / "d.csv")) == 2

    def test_spec_missing_n_exits_1(self, tmp_path):
        spec = tmp_path / "spec.json"
        spec.write_text(json.dumps({"preset": "quadratic"}))
        assert run("gen-data", "--spec", str(spec), "--out", str(tmp_path / "d.csv")) == 1

    def test_bad_params_json_exits_2(self, tmp_path, quad_csv):
        code = run(
            "train", "--algo", "pt", "--data", str(quad_csv),
            "--params", "{broken", "--out", str(tmp_path / "m.json"),
        )
        assert code == 2

    def test_oracle_without_cf_columns_exits_2(self, tmp_path, quad_csv):
        model = tmp_path / "model.json"
        run("train", "--algo", "pt", "--data", str(quad_csv),
            "--params", '{"n_min_leaf": 10}', "--out", str(model))
        assert run("evaluate", "--model", str(model), "--data", str(quad_csv), "--oracle") == 2
