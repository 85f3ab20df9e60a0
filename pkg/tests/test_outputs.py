import csv
import json

import numpy as np
import pytest

from src.comm import ProtocolSpec
from src.dynamics import Trace, run
from src.equilibrium import ReferencePoint
from src.errors import InputError, OutputError
from src.monte_carlo import monte_carlo
from src.outputs import trace_header, write_outputs, write_summary
from src.scenario import build_scenario, parse_scenario
from src.schedule import LeaderSchedule, PowerStep, StepSchedule
from src.smallcell import SmallCellParams, build_scenario as build_small_cell, default_schedule

REFERENCE = ReferencePoint(np.full((2, 1), 10 / 59), np.array([-1 / 59]), 0.0, 0, 0.0, 1e-10)


def quadratic_trace(spec, horizon, seed=5, stride=1, protocol=ProtocolSpec.bernoulli(0.7, 0.7)):
    return run(spec, protocol, StepSchedule.uniform(2, PowerStep()), LeaderSchedule(2), horizon,
               spec.midpoint(), seed, reference=REFERENCE, stride=stride)


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.reader(f))


class TestTrace:
    def test_header(self, quadratic_game):
        header = trace_header(quadratic_trace(quadratic_game, 3))
        assert header[:4] == ["k", "x0_0", "x1_0", "y_0"]
        assert header[-3:] == ["max_staleness", "distance", "lyapunov"]
        assert "alpha_leader" in header and "e_leader" in header

    def test_zero_horizon_is_header_only(self, quadratic_game, tmp_path):
        trace = Trace.empty(quadratic_game, *quadratic_game.midpoint())
        path = write_outputs(trace, tmp_path / "trace.csv")
        rows = read_rows(path)
        assert rows == [trace_header(trace)]

    def test_rows_follow_stride(self, quadratic_game, tmp_path):
        path = write_outputs(quadratic_trace(quadratic_game, 95, stride=10), tmp_path / "trace.csv")
        rows = read_rows(path)
        assert [row[0] for row in rows[1:]] == [str(k) for k in range(0, 95, 10)]
        assert all(len(row) == len(rows[0]) for row in rows)

    def test_lyapunov_only_at_wakeups(self, quadratic_game, tmp_path):
        rows = read_rows(write_outputs(quadratic_trace(quadratic_game, 10), tmp_path / "trace.csv"))
        lyapunov = [row[-1] for row in rows[1:]]
        assert [bool(v) for v in lyapunov] == [k % 2 == 0 for k in range(10)]
        assert all(row[-2] != "" for row in rows[1:])

    def test_identical_runs_are_byte_identical(self, quadratic_game, tmp_path):
        first = write_outputs(quadratic_trace(quadratic_game, 500), tmp_path / "a.csv")
        second = write_outputs(quadratic_trace(quadratic_game, 500), tmp_path / "b.csv")
        assert first.read_bytes() == second.read_bytes()

    def test_small_cell_price_constant_per_block(self, tmp_path):
        params = SmallCellParams()
        spec, _ = build_small_cell(params)
        trace = run(spec, ProtocolSpec.gossip(), default_schedule(params), LeaderSchedule(params.leader_period),
                    200, spec.midpoint(), seed=2)
        rows = read_rows(write_outputs(trace, tmp_path / "trace.csv"))
        column = rows[0].index("y_0")
        prices = [row[column] for row in rows[1:]]
        assert len(prices) == 200
        for start in range(0, 200, 10):
            assert len(set(prices[start:start + 10])) == 1


class TestSummary:
    def test_non_finite_values_become_null(self, tmp_path):
        path = write_outputs({"b": float("nan"), "a": np.array([1.0, np.inf]), "flag": np.bool_(True)},
                             tmp_path / "summary.json")
        text = path.read_text()
        assert json.loads(text) == {"a": [1.0, None], "b": None, "flag": True}
        assert text.index('"a"') < text.index('"b"')
        assert text.endswith("\n")

    def test_byte_stable(self, tmp_path):
        summary = {"seed": 1, "errors": np.linspace(0, 1, 7), "nested": {"z": 1, "y": (2, 3)}}
        first = write_summary(summary, tmp_path / "one.json")
        second = write_summary(dict(reversed(list(summary.items()))), tmp_path / "two.json")
        assert first.read_bytes() == second.read_bytes()

    def test_mse_curve(self, tmp_path):
        scenario = build_scenario(parse_scenario(json.dumps({
            "game": {"kind": "quadratic-test"},
            "schedule": {"leader_period": 2},
            "run": {"seed": 1, "horizon": 20, "runs": 2},
        })))
        result = monte_carlo(scenario, REFERENCE, max_workers=1)
        rows = read_rows(write_outputs(result, tmp_path / "mse.csv"))
        assert rows[0] == ["k", "mse"]
        assert len(rows) == 22
        assert float(rows[1][1]) == pytest.approx(REFERENCE.norm() ** 2)


class TestErrors:
    def test_unwritable_path(self, tmp_path):
        blocker = tmp_path / "blocker"
        blocker.write_text("")
        with pytest.raises(OutputError) as excinfo:
            write_outputs({"a": 1}, blocker / "summary.json")
        assert "blocker" in str(excinfo.value)

    def test_unknown_result(self, tmp_path):
        with pytest.raises(InputError):
            write_outputs([1, 2, 3], tmp_path / "x")
