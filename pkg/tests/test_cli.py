"""Command-line behaviour: outputs, errors and byte-level determinism."""

import csv
import json
from pathlib import Path

import numpy as np
import pytest

from poisson_cb.cli import main, parse_grid
from poisson_cb.experiments.designs import two_cluster_sample

DATA = Path(__file__).parent / "data"


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def counts(tmp_path):
    def make(values, name="y.txt"):
        f = tmp_path / name
        f.write_text("".join(f"{v}\n" for v in values))
        return str(f)
    return make


class TestEstimate:
    def test_zero_counts(self, counts, tmp_path, capsys):
        out = tmp_path / "e.csv"
        assert main(["estimate", "--counts", counts([0, 0, 0]), "--algorithm", "identity",
                     "--p", "0.1", "--B", "10", "--out", str(out)]) == 0
        assert float(_rows(out)[0]["estimate"]) == 0.0
        assert "value=0.0" in capsys.readouterr().out

    def test_single_count_conditional_mean(self, counts, tmp_path):
        out = tmp_path / "e.csv"
        main(["estimate", "--counts", counts([1]), "--algorithm", "identity", "--p", "0.25",
              "--B", "100000", "--seed", "5", "--out", str(out)])
        row = _rows(out)[0]
        assert abs(float(row["estimate"]) - 1.5) < 4 * float(row["std_error"])

    def test_byte_identical(self, counts, tmp_path):
        y = counts([3, 0, 5, 2, 2, 7])
        outs = [tmp_path / f"{k}.csv" for k in range(2)]
        for o in outs:
            main(["estimate", "--counts", y, "--algorithm", "soft_threshold", "--param", "lam=1",
                  "--loss", "deviance", "--B", "50", "--seed", "3", "--out", str(o)])
        assert outs[0].read_bytes() == outs[1].read_bytes()

    @pytest.mark.parametrize("method", ["ue", "ue_ss"])
    def test_other_methods(self, counts, capsys, method):
        assert main(["estimate", "--counts", counts([3, 0]), "--algorithm", "identity",
                     "--method", method, "--m", "2"]) == 0
        # 2 * sum(y) / n
        assert "value=3.0" in capsys.readouterr().out

    def test_parse_error_has_line_number(self, counts, capsys):
        assert main(["estimate", "--counts", counts([1, "x"]), "--algorithm", "identity"]) == 1
        assert ":2:" in capsys.readouterr().err

    @pytest.mark.parametrize("flag", [["--p", "1.5"], ["--B", "0"], ["--p", "abc"]])
    def test_usage_errors(self, counts, flag):
        with pytest.raises(SystemExit) as exc:
            main(["estimate", "--counts", counts([1]), "--algorithm", "identity", *flag])
        assert exc.value.code == 2

    def test_regression_needs_design(self, counts, capsys):
        assert main(["estimate", "--counts", counts([1, 2]), "--algorithm", "poisson_glm"]) == 1
        assert "design" in capsys.readouterr().err


class TestSimulate:
    def _cfg(self, tmp_path, **kw):
        cfg = {"design": {"kind": "constant", "n": 30, "mu": 2.0},
               "algorithm": {"name": "linear_shrinkage"}, "p": "auto", "B": 10,
               "repetitions": 2, "seed": 1, "truth": {"R": 20}}
        cfg.update(kw)
        f = tmp_path / "cfg.json"
        f.write_text(json.dumps(cfg))
        return str(f)

    def test_outputs(self, tmp_path):
        out = tmp_path / "sim.csv"
        assert main(["simulate", "--config", self._cfg(tmp_path), "--out", str(out)]) == 0
        rows = _rows(out)
        assert {r["p"] for r in rows if r["method"] == "cb"} == {"0.1"}
        assert (tmp_path / "sim_summary.csv").exists()

    def test_zero_repetitions(self, tmp_path, capsys):
        assert main(["simulate", "--config", self._cfg(tmp_path, repetitions=0)]) == 0
        assert capsys.readouterr().out.startswith("repetition,method,p,loss")

    def test_schema_error(self, tmp_path, capsys):
        assert main(["simulate", "--config", self._cfg(tmp_path, B=0)]) == 1
        assert "config.B" in capsys.readouterr().err


class TestTune:
    def test_single_point_grid(self, counts, tmp_path):
        out = tmp_path / "t.csv"
        main(["tune", "--counts", counts([1, 4, 2, 0]), "--algorithm", "linear_shrinkage",
              "--grid", "0.5", "--out", str(out)])
        rows = _rows(out)
        assert len(rows) == 2 and all(r["argmin"] == "true" for r in rows)

    def test_config_supplies_flags(self, counts, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"grid": "lin:0:1:3", "B": 5, "loss": ["squared"]}))
        out = tmp_path / "t.csv"
        assert main(["tune", "--counts", counts([1, 4, 2]), "--algorithm", "linear_shrinkage",
                     "--config", str(cfg), "--out", str(out)]) == 0
        assert len(_rows(out)) == 3

    def test_truth_columns(self, counts, tmp_path):
        mu = tmp_path / "mu.txt"
        mu.write_text("2\n2\n2\n")
        out = tmp_path / "t.csv"
        main(["tune", "--counts", counts([1, 4, 2]), "--algorithm", "linear_shrinkage",
              "--grid", "0,1", "--mu", str(mu), "--truth-R", "50", "--out", str(out)])
        assert "truth" in _rows(out)[0]

    def test_grid_parsing(self):
        assert parse_grid("1,2") == [1.0, 2.0]
        assert parse_grid("log:0:2:3") == pytest.approx([1, 10, 100])
        with pytest.raises(Exception):
            parse_grid("log:0:2")


class TestDenoise:
    def test_golden(self, tmp_path):
        out = tmp_path / "d.pgm"
        assert main(["denoise", "--image", str(DATA / "phantom32.pgm"), "--tau", "0.1",
                     "--out", str(out)]) == 0
        got = np.array([float(r["value"]) for r in _rows(tmp_path / "d_values.csv")])
        want = np.array([float(r["value"]) for r in _rows(DATA / "phantom32_tau0.1_values.csv")])
        np.testing.assert_allclose(got, want, rtol=1e-9, atol=1e-12)

    def test_tau_zero(self, tmp_path):
        img = tmp_path / "i.pgm"
        img.write_text("P2\n3 2\n9\n0 1 2\n9 4 0\n")
        out = tmp_path / "o.pgm"
        main(["denoise", "--image", str(img), "--tau", "0", "--rho", "0.5", "--out", str(out)])
        vals = [float(r["value"]) for r in _rows(tmp_path / "o_values.csv")]
        assert vals == [0.0, 0.5, 1.5, 8.5, 3.5, 0.0]

    def test_constant_image(self, tmp_path):
        img = tmp_path / "i.pgm"
        img.write_text("P2\n4 4\n9\n" + "6 " * 16 + "\n")
        out = tmp_path / "o.pgm"
        main(["denoise", "--image", str(img), "--tau", "3", "--out", str(out)])
        vals = np.array([float(r["value"]) for r in _rows(tmp_path / "o_values.csv")])
        np.testing.assert_allclose(vals, 6.0, rtol=1e-4)

    def test_tune_writes_sweep(self, tmp_path):
        out = tmp_path / "o.pgm"
        assert main(["denoise", "--image", str(DATA / "phantom32.pgm"), "--tune", "--grid",
                     "0.05,0.5", "--B", "4", "--out", str(out)]) == 0
        assert len(_rows(tmp_path / "o_sweep.csv")) == 4

    def test_malformed(self, tmp_path, capsys):
        img = tmp_path / "bad.pgm"
        img.write_text("P2\n2 2\n5\n1 2 3\n")
        assert main(["denoise", "--image", str(img), "--tau", "1"]) == 1
        assert "expected 4 pixels" in capsys.readouterr().err


class TestDensity:
    def test_iso_equals_aniso_diagonal(self, tmp_path):
        s = tmp_path / "s.txt"
        np.savetxt(s, two_cluster_sample(116, 4))
        iso, ani = tmp_path / "iso.csv", tmp_path / "ani.csv"
        common = ["--samples", str(s), "--bins", "16", "--knots", "6", "--B", "5",
                  "--loss", "squared"]
        main(["density", *common, "--grid", "2", "--out", str(iso)])
        main(["density", *common, "--grid", "2", "--grid2", "2", "--out", str(ani)])
        assert iso.read_bytes() == ani.read_bytes()
        a, b = _rows(tmp_path / "iso_sweep.csv")[0], _rows(tmp_path / "ani_sweep.csv")[0]
        assert a["estimate"] == b["estimate"]

    def test_single_point(self, tmp_path):
        s = tmp_path / "s.txt"
        s.write_text("0.0\n")
        out = tmp_path / "d.csv"
        main(["density", "--samples", str(s), "--bins", "21", "--knots", "10", "--B", "3",
              "--grid", "0.0001", "--out", str(out)])
        dens = [float(r["density"]) for r in _rows(out)]
        assert int(np.argmax(dens)) == 10

    def test_empty_file(self, tmp_path):
        s = tmp_path / "s.txt"
        s.write_text("")
        assert main(["density", "--samples", str(s)]) == 1


class TestVerify:
    @pytest.mark.parametrize("suite", ["hudson", "limit", "thinning"])
    def test_suites_pass(self, suite, tmp_path, capsys):
        out = tmp_path / "r.json"
        assert main(["verify", suite, "--out", str(out)]) == 0
        report = json.loads(out.read_text())
        assert report["suite"] == suite and report["passed"]

    def test_illdef_example(self, capsys):
        assert main(["verify", "illdef"]) == 0
        report = json.loads(capsys.readouterr().out)
        check = next(c for c in report["checks"] if c["name"] == "cb mu=1.0 p=0.1")
        assert abs(check["value"] - 0.0387) < 4 * check["se"] + 5e-5

    def test_unknown_suite(self):
        with pytest.raises(SystemExit):
            main(["verify", "nope"])
