import csv
import json
import math

import numpy as np
import pytest

from sparse_sysid import cli
from sparse_sysid.exceptions import NumericFailure
from sparse_sysid.tables import write_samples_csv

MODEL = {
    "a": [0.5, -0.2],
    "b": [2.0, 1.0],
    "c": [2.0, 0.0, -2.0, 0.0, 2.0],
    "basis": [{"kind": "monomial", "params": {"power": j}, "domain": [-1, 1]} for j in range(1, 6)],
}


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def _json(tmp_path, name, obj):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return str(path)


@pytest.fixture(scope="module")
def example1_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("ex1")
    assert cli.main(["example1", "--out", str(out), "--seed", "7"]) == 0
    return out


class TestExample1:
    def test_layout(self, example1_dir):
        rows = _rows(example1_dir / "summary.csv")
        assert rows[0] == ["coordinate", "method", "N=100", "N=200", "N=300", "N=400", "N=500"]
        assert len(rows) - 1 == 18
        algo = [r for r in rows[1:] if r[1] == "algorithm1"]
        assert all(v == "0" for r in algo for v in r[2:])
        for j in range(1, 11):
            assert (example1_dir / f"replicate_{j}" / "trajectory.csv").exists()
        assert len(_rows(example1_dir / "support.csv")) == 11
        man = json.loads((example1_dir / "manifest.json").read_text())
        assert man["seeds"]["base"] == 7 and len(man["seeds"]["replicates"]) == 10

    def test_overrides(self, tmp_path):
        assert cli.main(["example1", "--out", str(tmp_path), "--replicates", "1", "--n", "100"]) == 0
        rows = _rows(tmp_path / "summary.csv")
        assert rows[0][2:] == ["N=100"]
        assert not (tmp_path / "replicate_2").exists()

    def test_byte_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for d in (a, b):
            assert cli.main(["example1", "--out", str(d), "--replicates", "2", "--n", "200"]) == 0
        assert (a / "summary.csv").read_bytes() == (b / "summary.csv").read_bytes()

    def test_json_format(self, tmp_path):
        assert cli.main(["example1", "--out", str(tmp_path), "--replicates", "1",
                         "--n", "100", "--format", "json"]) == 0
        recs = json.loads((tmp_path / "summary.json").read_text())
        assert len(recs) == 18

    @pytest.mark.parametrize("cfg", [{"bogus": 1}, {"replicates": 0}, {"schedule": {"kind": "x"}}])
    def test_bad_config(self, tmp_path, cfg):
        assert cli.main(["example1", "--config", _json(tmp_path, "c.json", cfg),
                         "--out", str(tmp_path / "o")]) == 2

    def test_missing_out(self):
        assert cli.main(["example1"]) == 2

    def test_numeric_failure(self, tmp_path, monkeypatch, capsys):
        def boom(*a, **k):
            raise NumericFailure("eigensolver did not converge")
        monkeypatch.setattr(cli, "run_campaign", boom)
        assert cli.main(["example1", "--out", str(tmp_path)]) == 3
        assert "converge" in capsys.readouterr().err


class TestIdentify:
    def _data(self, tmp_path, n=400):
        rng = np.random.default_rng(0)
        phi = rng.standard_normal((n, 4))
        y = phi @ np.array([1.0, 0.0, -0.8, 0.0]) + 0.1 * rng.standard_normal(n)
        return write_samples_csv(tmp_path / "data.csv", phi, y)

    def test_outputs(self, tmp_path):
        data = self._data(tmp_path)
        cfg = _json(tmp_path, "s.json", {"kind": "log_over_n", "epsilon": 0.3})
        out = tmp_path / "out"
        assert cli.main(["identify", "--data", str(data), "--config", cfg, "--out", str(out)]) == 0
        assert len(_rows(out / "trajectory.csv")) == 401
        final = json.loads((out / "final.json").read_text())
        assert final["support_zero"] == [2, 4]
        for name in ("excitation", "schedule_validity", "support_history"):
            assert (out / f"{name}.csv").exists()
        assert (out / "manifest.json").exists()

    def test_malformed_row(self, tmp_path, capsys):
        path = tmp_path / "bad.csv"
        path.write_text("phi_1,y\n1,2\n3,x\n")
        assert cli.main(["identify", "--data", str(path), "--out", str(tmp_path / "o")]) == 2
        assert "line 3" in capsys.readouterr().err

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        assert cli.main(["identify", "--data", str(path), "--out", str(tmp_path / "o")]) == 2

    def test_diagnose(self, tmp_path):
        data = self._data(tmp_path, 50)
        assert cli.main(["diagnose", "--data", str(data), "--out", str(tmp_path / "d")]) == 0
        rows = _rows(tmp_path / "d" / "excitation.csv")
        assert rows[0] == ["n", "r_n", "lambda_min", "ratio_weakest", "ratio_zhao"]
        assert len(rows) == 51


class TestHammerstein:
    def test_pipeline(self, tmp_path):
        model = _json(tmp_path, "m.json", MODEL)
        out = tmp_path / "h"
        assert cli.main(["hammerstein", "--model", model, "--out", str(out)]) == 0
        eff = json.loads((out / "effective_basis.json").read_text())
        assert eff["noneffective"] == [2, 4] == eff["true_noneffective"]
        assert eff["effective"] == [1, 3, 5]
        assert float(eff["reconstruction_error"]) < 0.05
        for name in ("io", "trajectory", "M_matrix", "factors", "growth_check"):
            assert (out / f"{name}.csv").exists()

    def test_noise_free_error_decreases(self, tmp_path):
        model = _json(tmp_path, "m.json", MODEL)
        sim = _json(tmp_path, "s.json", {"noise_variance": 0.0})
        errs = []
        for n in (300, 3000):
            out = tmp_path / f"h{n}"
            assert cli.main(["hammerstein", "--model", model, "--config", sim,
                             "--n", str(n), "--out", str(out)]) == 0
            rows = _rows(out / "trajectory.csv")
            errs.append(float(rows[-1][-1]))
        assert errs[1] < errs[0]

    def test_unstable(self, tmp_path, capsys):
        model = _json(tmp_path, "m.json", {**MODEL, "a": [1.1]})
        assert cli.main(["hammerstein", "--model", model, "--out", str(tmp_path / "h")]) == 2
        assert "root" in capsys.readouterr().err.lower()


class TestBound:
    def test_values(self, tmp_path, capsys):
        cfg = _json(tmp_path, "b.json", {"c0": 1, "c2": 1, "c3": 1, "c5": 1,
                                         "m_const": 1, "epsilon": 0.25})
        assert cli.main(["bound", "--config", cfg, "--out", str(tmp_path / "b")]) == 0
        report = json.loads(capsys.readouterr().out)
        assert abs(report["n0"] - 88.7228) < 1e-3
        assert report["optimal"]["n0"] == 47
        assert (tmp_path / "b" / "bound.json").exists()

    def test_epsilon_half_rejected(self, tmp_path):
        cfg = _json(tmp_path, "b.json", {"c0": 1, "c2": 1, "c3": 1, "c5": 1, "epsilon": 0.5})
        assert cli.main(["bound", "--config", cfg]) == 2

    def test_seed_range(self):
        assert cli.main(["bound", "--seed", str(2**64)]) == 2
