import csv

import numpy as np
import pytest

from tobart import cli
from tobart.cli import CliError, ColumnRoles, load_dataset, main, read_config_file, write_dataset

ROLES = ColumnRoles("y", "s", ["x1", "x2"], ["x1", "x2", "w"])
FAST = ["--iters", "30", "--burnin", "10", "--m-y", "5", "--m-z", "5"]


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return str(path)


def synthetic(path, n=120, seed=0, treat=False):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, 2))
    w = rng.normal(size=n)
    t = (rng.random(n) < 0.5).astype(int)
    s = (0.3 + x[:, 0] + w + rng.normal(size=n) >= 0).astype(int)
    y = x[:, 0] - x[:, 1] + 0.5 * t + rng.normal(size=n)
    rows = [[x[i, 0], x[i, 1], w[i], t[i], s[i], float(y[i]) if s[i] else "NA"] for i in range(n)]
    header = ["x1", "x2", "w", "t", "s", "y"]
    return write_csv(path, header, rows)


def read_rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


class TestLoad:
    def test_three_row_fixture(self, tmp_path):
        p = write_csv(tmp_path / "d.csv", ["x1", "x2", "w", "s", "y"],
                      [[0.1, 1, 2, 1, 3.5], [0.2, 0, 1, 0, ""], [0.3, 1, 0, 1, -1]])
        d = load_dataset(p, ROLES).data
        assert d.n == 3 and d.n1 == 2

    def test_na_on_selected_row(self, tmp_path):
        p = write_csv(tmp_path / "d.csv", ["x1", "x2", "w", "s", "y"],
                      [[0.1, 1, 2, 1, 3.5], [0.2, 0, 1, 1, "NA"]])
        with pytest.raises(CliError, match="row 2"):
            load_dataset(p, ROLES)

    @pytest.mark.parametrize("rows,msg", [
        ([[0.1, 1, 2, 2, 3.5]], "0 or 1"),
        ([[0.1, 1, 2, 0, 3.5]], "unselected row has an outcome"),
        ([["abc", 1, 2, 1, 3.5]], "non-numeric"),
        ([[0.1, 1, 2, 1]], "cells"),
    ])
    def test_validation_errors(self, tmp_path, rows, msg):
        p = write_csv(tmp_path / "d.csv", ["x1", "x2", "w", "s", "y"], rows)
        with pytest.raises(CliError, match=msg):
            load_dataset(p, ROLES)

    def test_missing_column(self, tmp_path):
        p = write_csv(tmp_path / "d.csv", ["x1", "w", "s", "y"], [[0.1, 2, 1, 3.5]])
        with pytest.raises(CliError, match="x2"):
            load_dataset(p, ROLES)

    def test_round_trip(self, tmp_path):
        p = synthetic(tmp_path / "d.csv")
        a = load_dataset(p, ROLES)
        q = tmp_path / "again.csv"
        write_dataset(q, a)
        b = load_dataset(q, ROLES)
        for name in a.table:
            np.testing.assert_allclose(a.table[name], b.table[name], rtol=1e-12, equal_nan=True)
        write_dataset(tmp_path / "third.csv", b)
        assert (tmp_path / "third.csv").read_bytes() == q.read_bytes()


class TestConfig:
    def test_file_and_precedence(self, tmp_path):
        f = tmp_path / "run.cfg"
        f.write_text("# comment\niters = 77\nseed = 5\nmodel = linear\n")
        assert read_config_file(f)["iters"] == "77"
        cfg = cli.resolve_config({"config": str(f), "seed": 9, "iters": None})
        assert cfg["iters"] == 77 and cfg["seed"] == 9 and cfg["model"] == "linear"
        assert cfg["burnin"] == cli.DEFAULTS["burnin"]

    def test_bad_file(self, tmp_path):
        f = tmp_path / "bad.cfg"
        f.write_text("no equals sign here\n")
        with pytest.raises(CliError):
            read_config_file(f)


class TestFit:
    def run(self, tmp_path, name, *extra, data=None):
        data = data or synthetic(tmp_path / "d.csv")
        out = tmp_path / name
        code = main(["fit", "--data", data, "--outcome", "y", "--select", "s", "--x-cols", "x1,x2",
                     "--w-cols", "x1,x2,w", "--out", str(out), *FAST, *extra])
        return code, out

    def test_bundle_contents(self, tmp_path, capsys):
        code, out = self.run(tmp_path, "o1", "--seed", "3")
        assert code == 0
        draws = read_rows(out / "draws.csv")
        assert draws[0] == ["iter", "chain", "gamma", "phi", "rho", "sigma_y2"]
        assert len(draws) == 21
        pred = read_rows(out / "predictions.csv")
        assert pred[0] == ["row", "latent_mean", "latent_q025", "latent_q975", "obs_cond_mean",
                           "obs_cond_q025", "obs_cond_q975", "sel_prob_mean"]
        assert not (out / "effects.csv").exists()
        summary = (out / "summary.txt").read_text().splitlines()
        assert summary[0] == "quantity mean q025 q975"
        name, m, lo, hi = summary[1].split()
        assert name == "rho" and -1 <= float(lo) <= float(m) <= float(hi) <= 1
        echo = (out / "config.txt").read_text()
        assert "seed = 3" in echo and "model = bart" in echo and "resolved_S0" in echo
        assert "rho" in capsys.readouterr().out

    def test_seed_determinism(self, tmp_path):
        data = synthetic(tmp_path / "d.csv")
        _, a = self.run(tmp_path, "a", "--seed", "11", data=data)
        _, b = self.run(tmp_path, "b", "--seed", "11", data=data)
        assert (a / "draws.csv").read_bytes() == (b / "draws.csv").read_bytes()
        assert (a / "predictions.csv").read_bytes() == (b / "predictions.csv").read_bytes()
        _, c = self.run(tmp_path, "c", "--seed", "12", data=data)
        assert (a / "draws.csv").read_bytes() != (c / "draws.csv").read_bytes()

    def test_echo_reruns_identically(self, tmp_path):
        data = synthetic(tmp_path / "d.csv")
        _, a = self.run(tmp_path, "a", "--seed", "4", data=data)
        cfg = tmp_path / "again.cfg"
        lines = [ln for ln in (a / "config.txt").read_text().splitlines()
                 if not ln.startswith(("resolved_", "internal_", "out "))]
        cfg.write_text("\n".join(lines) + f"\nout = {tmp_path / 'b'}\n")
        assert main(["fit", "--config", str(cfg)]) == 0
        assert (a / "draws.csv").read_bytes() == (tmp_path / "b" / "draws.csv").read_bytes()

    def test_seventeen_digits(self, tmp_path):
        _, out = self.run(tmp_path, "o", "--seed", "1")
        rows = read_rows(out / "draws.csv")[1:]
        vals = [float(r[2]) for r in rows]
        assert all(repr(v) == repr(float(f"{v:.17g}")) for v in vals)

    @pytest.mark.parametrize("model", ["linear", "bart-marginalized", "bart-np"])
    def test_models(self, tmp_path, model):
        code, out = self.run(tmp_path, model, "--model", model)
        assert code == 0
        header = read_rows(out / "draws.csv")[0]
        if model == "bart-np":
            assert header[-3:] == ["dependence", "k", "alpha"]

    @pytest.mark.parametrize("prior", ["omori", "ding"])
    def test_priors(self, tmp_path, prior):
        assert self.run(tmp_path, prior, "--prior", prior)[0] == 0

    def test_effects_with_treatment(self, tmp_path):
        code, out = self.run(tmp_path, "eff", "--treat", "t", "--chains", "2")
        assert code == 0
        eff = read_rows(out / "effects.csv")
        assert eff[0] == ["row", "cate_mean", "cate_q025", "cate_q975", "sel_effect_mean",
                          "sel_effect_q025", "sel_effect_q975", "censor_effect_mean"]
        r = eff[1]
        assert float(r[7]) == pytest.approx(-float(r[4]))
        assert set(int(x[1]) for x in read_rows(out / "draws.csv")[1:]) == {0, 1}

    def test_errors_leave_no_output(self, tmp_path, monkeypatch):
        def boom(*a, **k):
            raise RuntimeError("forced failure")
        monkeypatch.setattr(cli.est, "prediction_set", boom)
        code, out = self.run(tmp_path, "bad")
        assert code == 1
        assert not out.exists()

    def test_bad_input_exit_code(self, tmp_path, capsys):
        code, out = self.run(tmp_path, "x", data=str(tmp_path / "missing.csv"))
        assert code == 1 and not out.exists()
        assert "cannot read" in capsys.readouterr().err

    def test_rand_like_fixture(self, tmp_path):
        rng = np.random.default_rng(5)
        n, names = 400, [f"c{j}" for j in range(15)]
        X = rng.normal(size=(n, 15))
        idx = 0.4 + X[:, 0] - 0.5 * X[:, 3] + rng.normal(size=n)
        spend = idx >= 0
        logexp = 4 + 0.5 * X[:, 1] + 0.3 * X[:, 0] + rng.normal(size=n)
        rows = [[*X[i], int(spend[i]), logexp[i] if spend[i] else ""] for i in range(n)]
        data = write_csv(tmp_path / "rand.csv", names + ["any_spend", "log_exp"], rows)
        out = tmp_path / "rand_out"
        code = main(["fit", "--data", data, "--outcome", "log_exp", "--select", "any_spend",
                     "--x-cols", ",".join(names[1:]), "--w-cols", ",".join(names), "--out", str(out),
                     *FAST])
        assert code == 0
        pred = read_rows(out / "predictions.csv")
        assert len(pred) == n + 1
        latent = np.array([float(r[1]) for r in pred[1:]])
        assert abs(latent.mean() - 4) < 1


class TestSimulate:
    def test_headers_and_baseline(self, tmp_path, capsys):
        out = tmp_path / "sim"
        code = main(["simulate", "--dgp", "1", "--rho", "0.45", "--n-train", "150", "--n-test", "50",
                     "--reps", "1", "--models", "bart,tobart_vh", "--out", str(out), *FAST])
        assert code == 0
        rows = read_rows(out / "results.csv")
        assert rows[0][:5] == ["model", "fy_rmse_rel", "fy_cover95", "sel_mse_rel", "rho_mean"]
        assert rows[1][0] == "bart" and float(rows[1][1]) == 1.0 and float(rows[1][3]) == 1.0
        assert "fy_rmse_rel" in capsys.readouterr().out

    def test_other_families_rejected(self, tmp_path):
        assert main(["simulate", "--family", "cate", "--out", str(tmp_path / "x")]) == 1


class TestCalibrate:
    def test_defaults(self, capsys):
        assert main(["calibrate", "--sigma2", "1"]) == 0
        lines = dict(ln.split(" ", 1) for ln in capsys.readouterr().out.splitlines() if ln)
        assert float(lines["S0_vh"]) == pytest.approx(8 / 3, rel=1e-5)
        assert float(lines["S0_omori"]) == pytest.approx(3.6)
        cdf = lines["0.00"].split()
        assert all(float(v) == pytest.approx(0.5) for v in cdf)

    def test_tau_five_modes(self, capsys):
        assert main(["calibrate", "--sigma2", "1", "--tau", "5"]) == 0
        out = capsys.readouterr().out
        assert "vh_rho_modes -0.96609 0.96609" in out

    def test_from_data(self, tmp_path, capsys):
        p = synthetic(tmp_path / "d.csv")
        assert main(["calibrate", "--data", p, "--outcome", "y", "--select", "s",
                     "--out", str(tmp_path / "cal")]) == 0
        assert (tmp_path / "cal" / "calibration.txt").exists()
        y = load_dataset(p, ROLES).data.y
        s2 = np.nanvar(y, ddof=1)
        first = capsys.readouterr().out.splitlines()[0]
        assert float(first.split()[1]) == pytest.approx(s2, rel=1e-5)

    def test_invalid(self, capsys):
        assert main(["calibrate", "--sigma2", "-1"]) == 1
        assert main(["calibrate", "--sigma2", "1", "--n0", "2"]) == 1
        assert main(["calibrate"]) == 1
