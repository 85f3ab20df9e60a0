"""
Monte-Carlo estimate of the mean-square error E||z^k - z*||^2.
Runs are independent (run r uses the stream spawned from (seed, r)) and are
executed on a worker pool; results are reduced in run-id order, so the
outcome depends neither on which run finishes first nor on the pool kind.
"""

import logging
import multiprocessing
from concurrent.futures import Executor, ProcessPoolExecutor, ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional

import numpy as np

from src.dynamics import run as simulate
from src.equilibrium import ReferencePoint
from src.errors import InputError, LeaderNetError, ScenarioError
from src.scenario import Scenario
from src.settings import CONFIG

logger = logging.getLogger(__name__)

MIN_RUNS = 2
EXECUTORS = ("process", "thread")


@dataclass
class RunOutcome:
    run_id: int
    squared_error: np.ndarray
    final_error: float
    iterations_to: Optional[int]


def simulate_run(scenario: Scenario, reference: ReferencePoint, run_id: int) -> RunOutcome:
    """One independent run; module level so process workers can unpickle it"""
    sc = scenario
    trace = simulate(sc.spec, sc.protocol, sc.schedule, sc.leader_schedule, sc.horizon, sc.initial,
                     seed=sc.seed, reference=reference, stride=sc.horizon, run_id=run_id)
    return RunOutcome(
        run_id=run_id,
        squared_error=trace.squared_error(),
        final_error=float(trace.distance[-1]),
        iterations_to=trace.iterations_to(sc.config.run.threshold),
    )


@dataclass
class MonteCarloResult:
    """Mean-square error curve (horizon + 1 entries) plus per-run summaries"""
    seed: int
    runs: int
    protocol: str
    threshold: float
    mse: np.ndarray
    final_errors: np.ndarray
    iterations_to: List[Optional[int]]

    @property
    def horizon(self) -> int:
        return len(self.mse) - 1

    def mse_ratio(self, early: int, late: int) -> float:
        """MSE(late) / MSE(early)"""
        return float(self.mse[late] / self.mse[early]) if self.mse[early] > 0 else 0.0

    def to_dict(self) -> Dict[str, object]:
        return {
            "seed": self.seed,
            "runs": self.runs,
            "protocol": self.protocol,
            "horizon": self.horizon,
            "final_mse": float(self.mse[-1]),
            "final_errors": self.final_errors.tolist(),
            "mean_final_error": float(self.final_errors.mean()),
            "threshold": self.threshold,
            "iterations_to_threshold": self.iterations_to,
        }


class MonteCarloRunner:
    """
    Runs go to a process pool by default; the simulation loop holds the GIL,
    so threads only pay off for oracles that release it. `executor="thread"`
    (or config monte_carlo.executor) keeps everything in this process.
    """

    def __init__(self, scenario: Scenario, reference: ReferencePoint, runs: int,
                 log_callback: Optional[Callable[[str], None]] = None, max_workers: Optional[int] = None,
                 executor: Optional[str] = None):
        if runs < MIN_RUNS:
            raise InputError(f"Monte-Carlo needs at least {MIN_RUNS} runs")
        self.executor = executor or CONFIG["monte_carlo"].get("executor", "process")
        if self.executor not in EXECUTORS:
            raise InputError(f"unknown executor {self.executor!r}; expected one of {EXECUTORS}")
        self.scenario = scenario
        self.reference = reference
        self.runs = runs
        self.log_callback = log_callback or logger.info
        configured = CONFIG["monte_carlo"]["max_workers"]
        cpus = multiprocessing.cpu_count() or 1
        default = cpus if self.executor == "process" else min(32, cpus + 4)
        self.max_workers = min(max_workers or configured or default, runs)

    def run_one(self, run_id: int) -> RunOutcome:
        return simulate_run(self.scenario, self.reference, run_id)

    def _pool(self) -> Executor:
        if self.executor == "process":
            return ProcessPoolExecutor(max_workers=self.max_workers)
        return ThreadPoolExecutor(max_workers=self.max_workers)

    def _submit(self, pool: Executor, run_id: int):
        if self.executor == "process":
            return pool.submit(simulate_run, self.scenario, self.reference, run_id)
        return pool.submit(self.run_one, run_id)

    def run(self) -> MonteCarloResult:
        sc = self.scenario
        self.log_callback(f"🚀 Monte-Carlo: {self.runs} runs of {sc.horizon} iterations "
                          f"({sc.protocol.label}, {self.max_workers} {self.executor} workers)")
        outcomes: List[Optional[RunOutcome]] = [None] * self.runs
        with self._pool() as executor:
            futures = {self._submit(executor, run_id): run_id for run_id in range(self.runs)}
            done = 0
            for future in as_completed(futures):
                run_id = futures[future]
                try:
                    outcomes[run_id] = future.result()
                except LeaderNetError as e:
                    for pending in futures:
                        pending.cancel()
                    self.log_callback(f"❌ Run {run_id} failed: {e}")
                    raise ScenarioError(str(e), run_id=run_id) from e
                except Exception as e:
                    for pending in futures:
                        pending.cancel()
                    self.log_callback(f"❌ Run {run_id} failed: {e}")
                    raise ScenarioError(f"unexpected failure: {e}", run_id=run_id) from e
                done += 1
                if done % max(1, self.runs // 10) == 0:
                    logger.debug(f"{done}/{self.runs} runs finished")

        squared = np.stack([o.squared_error for o in outcomes])
        result = MonteCarloResult(
            seed=sc.seed,
            runs=self.runs,
            protocol=sc.protocol.label,
            threshold=sc.config.run.threshold,
            mse=squared.mean(axis=0),
            final_errors=np.array([o.final_error for o in outcomes]),
            iterations_to=[o.iterations_to for o in outcomes],
        )
        self.log_callback(f"📊 Final MSE {result.mse[-1]:.3e}, mean final error "
                          f"{result.final_errors.mean():.3e}")
        return result


def monte_carlo(scenario: Scenario, reference: ReferencePoint, runs: Optional[int] = None,
                log_callback: Optional[Callable[[str], None]] = None,
                max_workers: Optional[int] = None, executor: Optional[str] = None) -> MonteCarloResult:
    """MSE curve over `runs` independent runs (the scenario's run count by default)"""
    runs = scenario.config.run.runs if runs is None else runs
    return MonteCarloRunner(scenario, reference, runs, log_callback, max_workers, executor).run()
