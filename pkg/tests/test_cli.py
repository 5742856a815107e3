import json
import os
from pathlib import Path

import pytest

from plap import cli
from plap.errors import ConfigError

LIGHT_ALL = {
    "indicial_trials": 200,
    "hardy_trials": 30,
    "grid_h": [1 / 16, 1 / 32],
    "bochner_h": [1 / 8, 1 / 16],
    "shoot_r_max": 30.0,
    "martin_t": 100.0,
    "riccati_T": 50.0,
    "translate_window": 0.5,
    "translate_shifts": [10.0, 20.0, 40.0],
}

EXPECTED_ROWS = [
    "01_indicial_roots",
    "02_dirichlet_convergence",
    "03_gradient_log_bound",
    "04_kappa_bound",
    "05_bochner_trend",
    "06_exterior_decay",
    "07_exterior_decay_p15",
    "08_ratio_flow_convergence",
    "09_power_solution_residual",
    "10_rescaling_fixed_points",
    "11_campaign_determinism",
]


def read_tree(root):
    return {p.relative_to(root): p.read_bytes()
            for p in sorted(Path(root).rglob("*")) if p.is_file()}


class TestRootsCampaign:
    def test_factorized_case(self, tmp_path):
        cfg = {"params": {"n": 4, "p": 2.0, "a": 0.0, "mu": 0.0}}
        report = cli.run_roots(cfg, tmp_path)
        rows = {r.name: r for r in report.rows}
        assert rows["gamma2"].target == 2.0
        assert rows["gamma2"].passed
        assert report.all_passed
        assert (tmp_path / "roots_report.csv").exists()

    def test_rejects_unknown_key(self, tmp_path):
        with pytest.raises(ConfigError):
            cli.run_roots({"params": {"n": 4, "p": 2.0}, "bogus": 1}, tmp_path)


class TestMartinCampaign:
    def test_kernel_row(self, tmp_path):
        cfg = {"params": {"n": 3, "p": 2.0, "lam": 1.0}, "t": 100.0}
        report = cli.run_martin(cfg, tmp_path)
        row = report.rows[0]
        assert row.name == "kernel_at_xi"
        assert abs(row.target - 2.718281828459045) < 1e-12
        assert row.passed


class TestOtherCampaigns:
    def test_shoot(self, tmp_path):
        cfg = {"params": {"n": 3, "p": 2.0, "lam": 1.0}, "r_max": 30.0}
        report = cli.run_shoot(cfg, tmp_path)
        assert report.all_passed
        assert (tmp_path / "exterior_profile.csv").exists()

    def test_blowup(self, tmp_path):
        cfg = {"params": {"n": 3, "p": 2.0, "lam": 1.0},
               "shifts": [10.0, 20.0, 40.0]}
        report = cli.run_blowup(cfg, tmp_path)
        rows = {r.name: r for r in report.rows}
        assert rows["power_fixed_point_sup"].passed
        assert rows["translate_monotone"].passed
        assert (tmp_path / "translate_far_field.csv").exists()

    def test_grid(self, tmp_path):
        cfg = {"params": {"n": 4, "p": 3.0, "lam": 2.0}, "h": 1 / 32,
               "tol": 1e-9}
        report = cli.run_grid(cfg, tmp_path)
        assert report.all_passed
        assert (tmp_path / "dirichlet_field.plf2").exists()

    def test_bochner(self, tmp_path):
        report = cli.run_bochner({"h_list": [1 / 8, 1 / 16]}, tmp_path)
        assert report.all_passed
        assert (tmp_path / "bochner_trend.csv").exists()


class TestMainEntry:
    def test_malformed_params_exit_2(self, tmp_path, capsys):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({"params": {"n": 3, "p": 5.0}}))
        code = cli.main(["roots", "--config", str(cfg_path),
                        "--out", str(tmp_path / "out")])
        assert code == 2
        assert "p must lie in (1, n)" in capsys.readouterr().err

    def test_unknown_subcommand_exit_2(self, tmp_path):
        code = cli.main(["frobnicate", "--out", str(tmp_path)])
        assert code == 2

    def test_passing_campaign_exit_0(self, tmp_path, capsys):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(
            {"params": {"n": 4, "p": 2.0, "a": 0.0, "mu": 0.75}}))
        code = cli.main(["roots", "--config", str(cfg_path),
                        "--out", str(tmp_path / "out")])
        assert code == 0
        out = capsys.readouterr().out
        assert "PASS" in out and "all checks passed" in out

    def test_bad_log_level_exit_2(self, tmp_path, monkeypatch):
        monkeypatch.setenv("PLAP_LOG", "chatty")
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({"params": {"n": 4, "p": 2.0}}))
        code = cli.main(["roots", "--config", str(cfg_path),
                        "--out", str(tmp_path / "out")])
        assert code == 2

    def test_log_level_accepted(self, tmp_path, monkeypatch):
        monkeypatch.setenv("PLAP_LOG", "debug")
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({"params": {"n": 4, "p": 2.0}}))
        code = cli.main(["roots", "--config", str(cfg_path),
                        "--out", str(tmp_path / "out")])
        assert code == 0


@pytest.fixture(scope="module")
def first_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("all_first")
    report = cli.run_all(LIGHT_ALL, out, seed=7)
    return out, report


class TestAllCampaign:

    def test_report_completeness(self, first_run):
        _, report = first_run
        assert [r.name for r in report.rows] == EXPECTED_ROWS

    def test_row_semantics(self, first_run):
        _, report = first_run
        for row in report.rows:
            assert row.passed == (abs(row.measured - row.target) <= row.tolerance)

    def test_byte_determinism(self, first_run, tmp_path):
        out1, _ = first_run
        cli.run_all(LIGHT_ALL, tmp_path, seed=7)
        tree1, tree2 = read_tree(out1), read_tree(tmp_path)
        assert set(tree1) == set(tree2)
        for name in tree1:
            assert tree1[name] == tree2[name], name

    def test_parallel_matches_sequential(self, first_run, tmp_path):
        out1, _ = first_run
        cli.run_all(LIGHT_ALL, tmp_path, seed=7, parallel=True)
        tree1, tree2 = read_tree(out1), read_tree(tmp_path)
        assert set(tree1) == set(tree2)
        for name in tree1:
            assert tree1[name] == tree2[name], name

    def test_seed_changes_report(self, first_run, tmp_path):
        out1, _ = first_run
        cli.run_all(LIGHT_ALL, tmp_path, seed=8)
        rep1 = (out1 / "report.csv").read_text()
        rep2 = (tmp_path / "report.csv").read_text()
        assert rep1 != rep2  # randomized sweeps see the seed

    def test_rejects_unknown_key(self, tmp_path):
        with pytest.raises(ConfigError):
            cli.run_all({"typo_key": 1}, tmp_path, seed=0)


class TestCheckRow:
    def test_margin_two_sided(self):
        row = cli.CheckRow("x", 1.0, 1.5, 1.0)
        assert row.passed and row.margin == 0.5

    def test_margin_exact(self):
        row = cli.CheckRow("x", 0.0, 0.0, 0.0)
        assert row.passed and row.margin == 0.0

    def test_margin_nan_fails(self):
        row = cli.CheckRow("x", 0.0, float("nan"), 1.0)
        assert not row.passed
