import json
import subprocess
import sys

import numpy as np
import pytest

from gmleb import cli, estimators, mixtures, npmle
from gmleb.mixtures import DiscreteMixture


def write_values(path, vals):
    path.write_text("".join(f"{v!r}\n" for v in map(float, vals)))
    return path


def read_estimates(text):
    body = [l for l in text.splitlines() if l and not l.startswith("#")]
    footer = [l for l in text.splitlines() if l.startswith("#")]
    return np.array([float(l) for l in body]), footer


class TestFit:
    def test_single_zero(self, tmp_path):
        inp = tmp_path / "x.txt"
        inp.write_text("0\n")
        assert cli.main(["fit", str(inp)]) == 0
        G = DiscreteMixture.from_csv(tmp_path / "x.mixture.csv")
        assert G == DiscreteMixture.point_mass(0.0)
        side = json.loads((tmp_path / "x.fit.json").read_text())
        assert side["iterations"] >= 0

    def test_matches_library(self, tmp_path):
        X = np.random.default_rng(0).standard_normal(200)
        inp = write_values(tmp_path / "x.txt", X)
        assert cli.main(["fit", str(inp), "--out", str(tmp_path / "o")]) == 0
        fit = npmle.fit_npmle(X, npmle.build_grid_paper(X))
        side = json.loads((tmp_path / "o.fit.json").read_text())
        assert side["final_loglik"] == fit.final_loglik
        assert DiscreteMixture.from_csv(tmp_path / "o.mixture.csv") == fit.mixture

    def test_certified(self, tmp_path):
        X = np.random.default_rng(1).standard_normal(100)
        inp = write_values(tmp_path / "x.txt", X)
        assert cli.main(["fit", str(inp), "--grid", "certified", "--stop", "certified"]) == 0
        side = json.loads((tmp_path / "x.fit.json").read_text())
        assert side["certificate"]["satisfied"] is True

    def test_missing_file(self, tmp_path, capsys):
        assert cli.main(["fit", str(tmp_path / "nope.txt")]) == 2
        assert "cannot read" in capsys.readouterr().err

    def test_non_numeric(self, tmp_path, capsys):
        inp = tmp_path / "x.txt"
        inp.write_text("1.0\n# comment\n\nabc\n")
        code = cli.main(["fit", str(inp)])
        assert code != 0
        assert "x.txt:4" in capsys.readouterr().err

    @pytest.mark.parametrize("text", ["", "# only a comment\n", "nan\n"])
    def test_empty_or_nonfinite(self, tmp_path, text):
        inp = tmp_path / "x.txt"
        inp.write_text(text)
        assert cli.main(["fit", str(inp)]) == 1


class TestEstimate:
    def run(self, tmp_path, vals, *flags):
        inp = write_values(tmp_path / "x.txt", vals)
        out = tmp_path / "est.txt"
        code = cli.main(["estimate", str(inp), "--out", str(out), *flags])
        return code, (read_estimates(out.read_text()) if code == 0 else None)

    def test_identity(self, tmp_path):
        X = np.random.default_rng(2).normal(0, 3, 50)
        code, (est, footer) = self.run(tmp_path, X, "--estimator", "identity")
        assert code == 0
        np.testing.assert_array_equal(est, X)
        assert "# estimator: identity" in footer

    def test_universal_soft_zeros(self, tmp_path):
        code, (est, _) = self.run(tmp_path, np.zeros(20), "--estimator", "universal_soft")
        assert code == 0
        np.testing.assert_array_equal(est, 0.0)

    def test_gmleb_matches_library(self, tmp_path):
        rng = np.random.default_rng(3)
        X = rng.choice([0.0, 4.0], 300) + rng.standard_normal(300)
        code, (est, footer) = self.run(tmp_path, X, "--estimator", "gmleb")
        assert code == 0
        np.testing.assert_array_equal(est, estimators.gmleb(X).estimates)
        assert any(l.startswith("# grid_size") or "iterations" in l for l in footer)

    def test_fdr_q(self, tmp_path):
        X = np.random.default_rng(4).standard_normal(100)
        X[:5] += 6
        code, (est, _) = self.run(tmp_path, X, "--estimator", "fdr", "--q", "0.05")
        assert code == 0
        np.testing.assert_array_equal(est, estimators.run_estimator(
            estimators.EstimatorSpec("fdr", q=0.05), X).estimates)

    def test_q_rejected_for_other_kinds(self, tmp_path):
        code, _ = self.run(tmp_path, [1.0, 2.0], "--estimator", "sure", "--q", "0.1")
        assert code == 2

    def test_oracle_requires_truth(self, tmp_path, capsys):
        code, _ = self.run(tmp_path, [1.0, 2.0], "--estimator", "oracle")
        assert code == 2
        assert "--truth" in capsys.readouterr().err

    def test_oracle_with_truth(self, tmp_path):
        truth = write_values(tmp_path / "t.txt", [0.0, 0.0, 0.0])
        code, (est, _) = self.run(tmp_path, [1.0, -2.0, 0.5], "--estimator", "oracle",
                                  "--truth", str(truth))
        assert code == 0
        np.testing.assert_array_equal(est, 0.0)

    def test_truth_length_mismatch(self, tmp_path):
        truth = write_values(tmp_path / "t.txt", [0.0])
        code, _ = self.run(tmp_path, [1.0, 2.0], "--estimator", "oracle", "--truth", str(truth))
        assert code == 1

    def test_james_stein_small_n(self, tmp_path):
        code, _ = self.run(tmp_path, [1.0, 2.0], "--estimator", "james_stein")
        assert code == 1

    def test_unknown_flag(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            cli.main(["estimate", "x", "--estimator", "identity", "--bogus"])
        assert exc.value.code == 2

    def test_stdout(self, tmp_path, capsys):
        inp = write_values(tmp_path / "x.txt", [1.5, -2.0])
        assert cli.main(["estimate", str(inp), "--estimator", "identity"]) == 0
        est, _ = read_estimates(capsys.readouterr().out)
        np.testing.assert_array_equal(est, [1.5, -2.0])


SMALL = {"n": 60, "replications": 3, "base_seed": 5,
         "estimators": ["gmleb", "sure", {"kind": "fdr", "q": 0.1}, "oracle"],
         "scenarios": [{"id": "a", "signal": {"kind": "binary", "k": 5, "mu": 3}},
                       {"id": "b", "signal": {"kind": "gaussian", "mu": 1, "sigma2": 0.5}}]}


class TestSimulate:
    def scenario_file(self, tmp_path, doc=SMALL):
        p = tmp_path / "sc.json"
        p.write_text(json.dumps(doc))
        return p

    def test_byte_identical(self, tmp_path):
        sc = self.scenario_file(tmp_path)
        for out in ("r1", "r2"):
            assert cli.main(["simulate", "--scenario", str(sc), "--seed", "11",
                             "--out", str(tmp_path / out)]) == 0
        for name in ("records.csv", "aggregate.csv", "table.md"):
            assert (tmp_path / "r1" / name).read_bytes() == (tmp_path / "r2" / name).read_bytes()

    def test_single_rep_zero_se(self, tmp_path):
        sc = self.scenario_file(tmp_path, {**SMALL, "replications": 1})
        assert cli.main(["simulate", "--scenario", str(sc), "--out", str(tmp_path / "o")]) == 0
        lines = (tmp_path / "o" / "aggregate.csv").read_text().splitlines()
        assert lines[0] == "scenario,estimator,mean_total_sq_error,se,replications"
        assert all(l.split(",")[3] == "0.0" for l in lines[1:])

    def test_schema_error(self, tmp_path, capsys):
        bad = json.loads(json.dumps(SMALL))
        bad["scenarios"][1]["signal"].pop("sigma2")
        sc = self.scenario_file(tmp_path, bad)
        assert cli.main(["simulate", "--scenario", str(sc), "--out", str(tmp_path / "o")]) == 1
        assert "scenarios[1].signal.sigma2" in capsys.readouterr().err

    def test_missing_scenario(self, tmp_path):
        assert cli.main(["simulate", "--scenario", str(tmp_path / "no.json"),
                         "--out", str(tmp_path / "o")]) == 2

    def test_timing_flag(self, tmp_path):
        sc = self.scenario_file(tmp_path, {**SMALL, "replications": 1})
        assert cli.main(["simulate", "--scenario", str(sc), "--out", str(tmp_path / "o"),
                         "--timing"]) == 0
        rows = (tmp_path / "o" / "records.csv").read_text().splitlines()[1:]
        assert any(float(r.split(",")[4]) > 0 for r in rows)


class TestCheck:
    def test_passes(self, capsys):
        assert cli.main(["check"]) == 0
        out = capsys.readouterr().out
        assert "PASS lemma_a1" in out and "FAIL" not in out

    def test_sign_flip_detected(self, monkeypatch, capsys):
        real = mixtures.mixture_density_derivs

        # negating f' as a function also negates its derivative f''
        def flipped(G, x):
            f, f1, f2 = real(G, x)
            return f, -f1, -f2

        monkeypatch.setattr(mixtures, "mixture_density_derivs", flipped)
        assert cli.main(["check"]) == 1
        out = capsys.readouterr().out
        assert "FAIL lemma_a1" in out
        assert "failed: lemma_a1" in out


def test_module_entry_point(tmp_path):
    inp = write_values(tmp_path / "x.txt", [0.5])
    proc = subprocess.run([sys.executable, "-m", "gmleb", "estimate", str(inp),
                           "--estimator", "identity"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.splitlines()[0] == "0.5"
