import csv
import json

import numpy as np
import pytest

from mnlqg import pendulum_problem, save_controller, save_problem, value_iteration_solve
from mnlqg.bench import SUMMARY_COLUMNS, TRACE_COLUMNS
from mnlqg.cli import main

from conftest import make_scalar_problem


@pytest.fixture
def pendulum_file(tmp_path):
    path = tmp_path / "pendulum.json"
    path.write_text(save_problem(pendulum_problem(0.0)))
    return str(path)


@pytest.fixture
def scalar_file(tmp_path):
    path = tmp_path / "scalar.json"
    path.write_text(save_problem(make_scalar_problem()))
    return str(path)


def read_rows(path):
    with open(path, newline="") as handle:
        return list(csv.DictReader(handle))


class TestValidateCommand:
    def test_valid_pendulum_exits_zero_with_warning(self, pendulum_file, capsys):
        assert main(["validate", pendulum_file]) == 0
        out = capsys.readouterr().out
        assert "W not positive definite" in out

    def test_malformed_document(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text("{oops")
        assert main(["validate", str(path)]) == 2

    def test_dimension_mismatch_names_field(self, tmp_path, capsys):
        doc = json.loads(save_problem(pendulum_problem(0.0)))
        doc["B"] = [[0.0, 0.1]]
        path = tmp_path / "bad_dim.json"
        path.write_text(json.dumps(doc))
        assert main(["validate", str(path)]) == 2
        assert "B" in capsys.readouterr().err

    def test_missing_file(self, capsys):
        assert main(["validate", "/nonexistent/problem.json"]) == 2

    def test_invalid_cost_matrix(self, tmp_path, capsys):
        doc = json.loads(save_problem(make_scalar_problem()))
        doc["Q"] = [[1.0, 0.0], [0.0, -1.0]]
        path = tmp_path / "badq.json"
        path.write_text(json.dumps(doc))
        assert main(["validate", str(path)]) == 2
        assert "Q not positive definite" in capsys.readouterr().out


class TestSolveCommand:
    def test_pi_on_quiet_pendulum(self, pendulum_file, tmp_path, capsys):
        out = tmp_path / "report.json"
        code = main(["solve", pendulum_file, "--method", "pi", "--out", str(out)])
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["method"] == "policy_iteration"
        assert doc["converged"] is True
        assert doc["residual_norm"] <= 1e-9
        assert set(doc["controller"]) == {"F", "K", "L"}
        assert set(doc["solution"]) == {"P", "Phat", "S", "Shat"}
        assert doc["history"][0]["delta"] is None
        assert "e_k" not in doc["history"][0]
        printed = capsys.readouterr().out
        assert "iterations:" in printed and "cost:" in printed

    def test_open_loop_init_on_openloop_unstable_system_exits_three(
        self, pendulum_file, tmp_path, capsys
    ):
        out = tmp_path / "report.json"
        code = main(
            ["solve", pendulum_file, "--method", "pi", "--init", "open-loop", "--out", str(out)]
        )
        assert code == 3
        assert "not mean-square stabilizing" in capsys.readouterr().err

    def test_vi_matches_pi_gains(self, pendulum_file, tmp_path):
        out_pi = tmp_path / "pi.json"
        out_vi = tmp_path / "vi.json"
        assert main(["solve", pendulum_file, "--method", "pi", "--out", str(out_pi)]) == 0
        assert main(["solve", pendulum_file, "--method", "vi", "--out", str(out_vi)]) == 0
        doc_pi = json.loads(out_pi.read_text())
        doc_vi = json.loads(out_vi.read_text())
        K_pi = np.array(doc_pi["controller"]["K"])
        K_vi = np.array(doc_vi["controller"]["K"])
        L_pi = np.array(doc_pi["controller"]["L"])
        L_vi = np.array(doc_vi["controller"]["L"])
        assert np.allclose(K_pi, K_vi, atol=1e-8)
        assert np.allclose(L_pi, L_vi, atol=1e-8)

    def test_trace_flag_adds_e_k(self, scalar_file, tmp_path):
        out = tmp_path / "report.json"
        assert main(["solve", scalar_file, "--method", "vi", "--trace", "--out", str(out)]) == 0
        doc = json.loads(out.read_text())
        assert doc["history"][0]["e_k"] == 1.0
        assert doc["history"][-1]["e_k"] == 0.0

    def test_controller_file_init(self, scalar_file, tmp_path):
        problem = make_scalar_problem()
        report = value_iteration_solve(problem)
        init_path = tmp_path / "init.json"
        init_path.write_text(save_controller(report.controller))
        out = tmp_path / "report.json"
        code = main(
            ["solve", scalar_file, "--method", "pi", "--init", str(init_path), "--out", str(out)]
        )
        assert code == 0
        assert json.loads(out.read_text())["iterations"] <= 2

    def test_invalid_problem_is_input_error(self, tmp_path):
        doc = json.loads(save_problem(make_scalar_problem()))
        doc["Q"] = [[1.0, 0.0], [0.0, -1.0]]
        path = tmp_path / "badq.json"
        path.write_text(json.dumps(doc))
        out = tmp_path / "report.json"
        assert main(["solve", str(path), "--out", str(out)]) == 2

    def test_diverging_vi_exits_three(self, tmp_path, capsys):
        doc = json.loads(save_problem(pendulum_problem(1.0)))
        path = tmp_path / "noisy.json"
        path.write_text(json.dumps(doc))
        out = tmp_path / "report.json"
        code = main(["solve", str(path), "--method", "vi", "--out", str(out)])
        assert code == 3
        assert "diverged" in capsys.readouterr().err


class TestBenchPendulumCommand:
    def test_row_cardinality_with_failures_recorded(self, tmp_path, capsys):
        prefix = str(tmp_path / "pend")
        code = main(["bench-pendulum", "--etas", "0,0.5,1.0", "--out", prefix])
        assert code == 0
        rows = read_rows(f"{prefix}_summary.csv")
        assert len(rows) == 6  # 2 methods x 3 etas
        assert [row["eta"] for row in rows] == ["0.0", "0.0", "0.5", "0.5", "1.0", "1.0"]
        quiet = [row for row in rows if row["eta"] == "0.0"]
        assert all(row["converged"] == "true" for row in quiet)
        noisy = [row for row in rows if row["eta"] != "0.0"]
        assert all(row["converged"] == "false" and row["error"] for row in noisy)

    def test_single_method(self, tmp_path):
        prefix = str(tmp_path / "pend")
        code = main(["bench-pendulum", "--etas", "0", "--methods", "pi", "--out", prefix])
        assert code == 0
        rows = read_rows(f"{prefix}_summary.csv")
        assert len(rows) == 1
        assert rows[0]["method"] == "policy_iteration"
        assert rows[0]["ratio_iterations"] == ""

    def test_header_matches_contract(self, tmp_path):
        prefix = str(tmp_path / "pend")
        main(["bench-pendulum", "--etas", "0", "--out", prefix])
        with open(f"{prefix}_summary.csv", newline="") as handle:
            header = next(csv.reader(handle))
        assert tuple(header) == SUMMARY_COLUMNS
        with open(f"{prefix}_trace.csv", newline="") as handle:
            header = next(csv.reader(handle))
        assert tuple(header) == TRACE_COLUMNS

    def test_bad_eta_is_input_error(self, tmp_path):
        prefix = str(tmp_path / "pend")
        assert main(["bench-pendulum", "--etas", "0,banana", "--out", prefix]) == 2
        assert main(["bench-pendulum", "--etas", "2.0", "--out", prefix]) == 2


class TestBenchRandomCommand:
    def test_rows_and_ratios(self, tmp_path):
        prefix = str(tmp_path / "rand")
        code = main(["bench-random", "--count", "2", "--seed", "42", "--out", prefix])
        assert code == 0
        rows = read_rows(f"{prefix}_summary.csv")
        assert len(rows) == 4
        assert {row["seed"] for row in rows} == {"42", "43"}
        assert all(row["ratio_iterations"] != "" for row in rows)
        traces = read_rows(f"{prefix}_trace.csv")
        assert {row["method"] for row in traces} == {"policy_iteration", "value_iteration"}
        first = [r for r in traces if r["method"] == "policy_iteration" and r["seed"] == "42"]
        assert first[0]["e_k"] == "1.0"

    def test_deterministic_across_runs(self, tmp_path):
        prefix_a = str(tmp_path / "a")
        prefix_b = str(tmp_path / "b")
        assert main(["bench-random", "--count", "3", "--seed", "7", "--out", prefix_a]) == 0
        assert main(["bench-random", "--count", "3", "--seed", "7", "--out", prefix_b]) == 0
        rows_a = read_rows(f"{prefix_a}_summary.csv")
        rows_b = read_rows(f"{prefix_b}_summary.csv")
        wall_columns = ("wall_seconds", "ratio_time")
        for row_a, row_b in zip(rows_a, rows_b):
            for column in SUMMARY_COLUMNS:
                if column not in wall_columns:
                    assert row_a[column] == row_b[column]

    def test_jobs_preserve_order_and_content(self, tmp_path):
        prefix_seq = str(tmp_path / "seq")
        prefix_par = str(tmp_path / "par")
        assert main(["bench-random", "--count", "4", "--seed", "3", "--out", prefix_seq]) == 0
        assert main(
            ["bench-random", "--count", "4", "--seed", "3", "--jobs", "3", "--out", prefix_par]
        ) == 0
        rows_seq = read_rows(f"{prefix_seq}_summary.csv")
        rows_par = read_rows(f"{prefix_par}_summary.csv")
        wall_columns = ("wall_seconds", "ratio_time")
        assert len(rows_seq) == len(rows_par) == 8
        for row_a, row_b in zip(rows_seq, rows_par):
            for column in SUMMARY_COLUMNS:
                if column not in wall_columns:
                    assert row_a[column] == row_b[column]


class TestRolloutCommand:
    def test_rollout_smoke(self, scalar_file, tmp_path, capsys):
        report = value_iteration_solve(make_scalar_problem())
        ctrl_path = tmp_path / "ctrl.json"
        ctrl_path.write_text(save_controller(report.controller))
        code = main(
            [
                "rollout", scalar_file, str(ctrl_path),
                "--horizon", "200", "--trials", "8", "--seed", "1",
            ]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "cost_mean:" in out and "cost_stderr:" in out

    def test_unstable_controller_exits_three(self, scalar_file, tmp_path, capsys):
        ctrl_path = tmp_path / "ctrl.json"
        ctrl_path.write_text('{"F": [[3.0]], "K": [[5.0]], "L": [[4.0]]}')
        code = main(
            [
                "rollout", scalar_file, str(ctrl_path),
                "--horizon", "5000", "--trials", "4", "--seed", "1",
            ]
        )
        assert code == 3
        assert "overflow" in capsys.readouterr().err


class TestArgumentErrors:
    def test_unknown_command_exits_two(self):
        with pytest.raises(SystemExit) as excinfo:
            main(["frobnicate"])
        assert excinfo.value.code == 2

    def test_missing_required_flag_exits_two(self):
        with pytest.raises(SystemExit) as excinfo:
            main(["bench-random", "--count", "2"])
        assert excinfo.value.code == 2
