import csv
import os

import pytest

from mobo.app import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, main, workflow_configs

from .conftest import SMALL_INI, mock_command

RUN_FILES = ["config.ini", "evaluations.csv", "pareto_front.csv", "hv_trajectory.csv", "summary.txt"]


def read_rows(path):
    with open(path, encoding="utf-8", newline="") as f:
        return list(csv.DictReader(f))


def read_bytes(path):
    with open(path, "rb") as f:
        return f.read()


class TestDoeCommand:
    def test_design_uses_problem_variable_names(self, tmp_path):
        out = str(tmp_path / "design.csv")
        args = ["doe", "--n", "250", "--problem", "synrel-toy", "--seed", "5", "--proposals", "500"]
        assert main(args + ["--out", out]) == EXIT_OK
        rows = read_rows(out)
        assert len(rows) == 250
        assert list(rows[0])[:3] == ["Rad_PM_L1", "Rad_PM_L2", "Rad_PM_L3"]
        assert len(rows[0]) == 12

    def test_same_seed_writes_identical_file(self, tmp_path):
        first, second = str(tmp_path / "a" / "d.csv"), str(tmp_path / "b" / "d.csv")
        for out in (first, second):
            assert main(["doe", "--n", "20", "--d", "3", "--seed", "1", "--out", out]) == EXIT_OK
        assert read_bytes(first) == read_bytes(second)

    def test_dimension_is_required(self, tmp_path):
        assert main(["doe", "--n", "5", "--out", str(tmp_path / "d.csv")]) == EXIT_CONFIG
        args = ["doe", "--n", "5", "--d", "3", "--problem", "bnh", "--out", str(tmp_path / "d.csv")]
        assert main(args) == EXIT_CONFIG


class TestRunCommand:
    def test_missing_config_file_is_a_config_error(self, tmp_path):
        args = ["run", "-c", str(tmp_path / "absent.ini"), "--out", str(tmp_path)]
        assert main(args) == EXIT_CONFIG

    def test_inconsistent_budget_is_a_config_error(self, tmp_path):
        path = tmp_path / "budget.ini"
        path.write_text(SMALL_INI.replace("seed = 3", "seed = 3\ntotal_budget = 99"), encoding="utf-8")
        assert main(["run", "-c", str(path), "--out", str(tmp_path)]) == EXIT_CONFIG

    def test_artifacts_are_byte_identical_across_runs(self, small_ini, tmp_path):
        roots = [str(tmp_path / "first"), str(tmp_path / "second")]
        for root in roots:
            assert main(["run", "-c", small_ini, "--out", root]) == EXIT_OK
        for name in RUN_FILES:
            first = read_bytes(os.path.join(roots[0], "bnh_optim3_seed3", name))
            second = read_bytes(os.path.join(roots[1], "bnh_optim3_seed3", name))
            assert first == second, name

    def test_run_artifacts_content(self, small_ini, tmp_path):
        assert main(["run", "-c", small_ini, "--out", str(tmp_path)]) == EXIT_OK
        run_dir = tmp_path / "bnh_optim3_seed3"
        evaluations = read_rows(str(run_dir / "evaluations.csv"))
        assert len(evaluations) == 12
        assert {row["seed"] for row in evaluations} == {"3"}
        assert len({row["config_hash"] for row in evaluations}) == 1
        assert [row["source"] for row in evaluations[:8]] == ["doe"] * 8
        trajectory = read_rows(str(run_dir / "hv_trajectory.csv"))
        assert [int(row["evaluations"]) for row in trajectory] == [8, 10, 12]
        assert (run_dir / "mobo.log").exists() is False
        assert (tmp_path / "mobo.log").exists()

    def test_fixed_surrogate_run_writes_verification(self, small_ini, tmp_path):
        args = ["run", "-c", small_ini, "--workflow", "optim1", "--doe", "12", "--out", str(tmp_path)]
        assert main(args) == EXIT_OK
        run_dir = tmp_path / "bnh_optim1_seed3"
        verification = read_rows(str(run_dir / "verification.csv"))
        assert 0 < len(verification) <= 4
        assert {"predicted_f1", "simulated_f1", "discrepancy"} <= set(verification[0])
        assert (run_dir / "predicted_front.csv").exists()
        assert len(read_rows(str(run_dir / "evaluations.csv"))) == 12

    def test_maximized_objectives_are_shown_negated(self, small_ini, tmp_path):
        args = ["run", "-c", small_ini, "--problem", "synrel-toy", "--iters", "1", "--out", str(tmp_path)]
        assert main(args) == EXIT_OK
        rows = read_rows(str(tmp_path / "synrel-toy_optim3_seed3" / "evaluations.csv"))
        assert len(rows) == 10
        for row in rows:
            assert float(row["display_couple"]) == -float(row["f1"])
            assert float(row["display_power_ratio"]) == -float(row["f2"])

    def test_external_simulator_run(self, small_ini, tmp_path):
        args = ["run", "-c", small_ini, "--external-cmd", mock_command(), "--external-dim", "2"]
        assert main(args + ["--iters", "1", "--out", str(tmp_path)]) == EXIT_OK
        rows = read_rows(str(tmp_path / "external_optim3_seed3" / "evaluations.csv"))
        assert len(rows) == 10
        for row in rows:
            x1, x2 = float(row["x1"]), float(row["x2"])
            assert float(row["f1"]) == pytest.approx(x1**2 + x2**2)

    def test_crashing_simulator_aborts_with_runtime_error(self, small_ini, tmp_path):
        args = ["run", "-c", small_ini, "--external-cmd", mock_command("fail"), "--external-dim", "2"]
        assert main(args + ["--workers", "1", "--out", str(tmp_path)]) == EXIT_RUNTIME


class TestCompareCommand:
    def test_invalid_repetitions(self, small_ini, tmp_path):
        args = ["compare", "-c", small_ini, "--repetitions", "0", "--out", str(tmp_path)]
        assert main(args) == EXIT_CONFIG

    def test_writes_summary_fronts_and_workbook(self, small_ini, tmp_path):
        args = ["compare", "-c", small_ini, "--workflows", "optim1,optim3", "--out", str(tmp_path)]
        assert main(args) == EXIT_OK
        out_dir = tmp_path / "bnh_compare_seed3"
        summary = read_rows(str(out_dir / "summary.csv"))
        assert [row["label"] for row in summary] == ["optim1", "optim3"]
        assert all(row["runs"] == "1" for row in summary)
        assert (out_dir / "front_optim1.csv").exists()
        assert (out_dir / "front_optim3.csv").exists()
        assert (out_dir / "comparison.xlsx").stat().st_size > 0
        curves = read_rows(str(out_dir / "hv_curves.csv"))
        assert {row["label"] for row in curves} == {"optim3"}


def test_workflow_configs_share_the_budget(small_config):
    configs = workflow_configs(small_config(), ["optim1", "optim2", "optim3"])
    assert [c.budget for c in configs] == [12, 12, 12]
    assert configs[0].initial_doe_size == 12
    assert configs[1].initial_doe_size == 8
