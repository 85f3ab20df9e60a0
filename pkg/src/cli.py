"""
Command-line interface: validate, gne, check, run, mc and smallcell.
"""

import argparse
import logging
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from src.comm import ProtocolSpec, assumption_constants
from src.db import CACHE_FILE, ReferenceCache
from src.dynamics import check_increment_bound, leader_change_iterations, run as simulate
from src.equilibrium import (ReferencePoint, check_theorem_conditions, estimate_constants,
                             monotonicity_probe, solve_reference_gne, verify_gne)
from src.errors import (ConfigError, InputError, LeaderNetError, OracleError, ReferenceNotConverged,
                        ScenarioError)
from src.game import GameConstants, estimate_bounds, validate_game
from src.monte_carlo import MIN_RUNS, monte_carlo
from src.outputs import write_outputs
from src.scenario import (RunConfig, Scenario, ScenarioConfig, SmallCellGameConfig, build_scenario,
                          load_and_build)
from src.schedule import kappa_bound
from src.settings import CONFIG, seed_override
from src.smallcell import average_power

logger = logging.getLogger("leadernet")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_SCENARIO = 3
EXIT_NOT_CONVERGED = 4

SMALL_CELL_HORIZON = 20000
SMALL_CELL_PROTOCOLS = (ProtocolSpec.normal(), ProtocolSpec.bernoulli(0.7, 0.7), ProtocolSpec.gossip())
SMALL_CELL_TOLERANCE = 0.01

Log = Callable[[str], None]


# ---------------------------------------------------------------- shared steps

def _master_seed(args) -> Optional[int]:
    return args.seed if args.seed is not None else seed_override()


def _output_dir(args, scenario: Scenario) -> Path:
    return Path(args.output or scenario.config.output.directory)


def solve_reference(scenario: Scenario, out_dir: Path, log: Log) -> ReferencePoint:
    """Reference equilibrium, from the cache when a good enough one is stored"""
    run_cfg = scenario.config.run
    cache = ReferenceCache(out_dir / CACHE_FILE, log) if scenario.config.output.cache else None
    key = scenario.reference_key()
    point = cache.load(key, run_cfg.reference_tol) if cache else None
    if point is not None:
        return point
    log(f"🚀 Solving reference equilibrium of {scenario.spec.name}")
    point = solve_reference_gne(scenario.spec, step=scenario.reference_step, tol=run_cfg.reference_tol,
                                max_iter=run_cfg.reference_max_iter)
    log(f"✅ Reference residual {point.residual:.2e} after {point.iterations_used} iterations")
    if cache:
        cache.store(key, point)
    return point


def game_constants(scenario: Scenario) -> GameConstants:
    """Sampled C_n, C_0, L, L_0 plus grid-certified A_n, A_0, B_n"""
    rng = np.random.default_rng(scenario.seed)
    constants = estimate_constants(scenario.spec, CONFIG["numerics"]["constant_sample_pairs"], rng)
    return constants.with_bounds(estimate_bounds(scenario.spec))


def condition_report(scenario: Scenario, constants: GameConstants):
    kappa = kappa_bound(scenario.schedule, scenario.horizon, scenario.leader_schedule)
    _, delta = assumption_constants(scenario.protocol, scenario.spec)
    report = check_theorem_conditions(constants, kappa.kappa, delta, scenario.leader_schedule.k_bar)
    return report, kappa


def _scenario_header(scenario: Scenario) -> Dict[str, object]:
    return {
        "game": scenario.spec.name,
        "seed": scenario.seed,
        "protocol": scenario.protocol.label,
        "horizon": scenario.horizon,
        "leader_period": scenario.leader_schedule.period,
    }


# ---------------------------------------------------------------- commands

def cmd_validate(args, log: Log) -> int:
    scenario = load_and_build(args.scenario, _master_seed(args))
    violations = validate_game(scenario.spec)
    if violations:
        for v in violations:
            log(f"❌ {v}")
        log(f"⚠️ {len(violations)} game invariant violation(s)")
        return EXIT_CONFIG
    log(f"✅ {args.scenario} is valid ({scenario.spec.n_followers} followers, {scenario.protocol.label})")
    return EXIT_OK


def cmd_gne(args, log: Log) -> int:
    scenario = load_and_build(args.scenario, _master_seed(args))
    out_dir = _output_dir(args, scenario)
    reference = solve_reference(scenario, out_dir, log)
    verification = verify_gne(scenario.spec, reference, args.probes, np.random.default_rng(scenario.seed))
    summary = {
        **_scenario_header(scenario),
        "reference": reference.to_dict(),
        "verification": {
            "passed": verification.passed,
            "worst_value": verification.worst_value,
            "worst_agent": verification.worst_agent,
            "per_agent": verification.per_agent,
            "epsilon": verification.epsilon,
        },
    }
    write_outputs(summary, out_dir / scenario.config.output.summary_file)
    if not verification.passed:
        log(f"❌ Reference fails the equilibrium check at {verification.worst_agent} "
            f"({verification.worst_value:.3e})")
        return EXIT_NOT_CONVERGED
    log(f"✅ Reference verified; worst directional value {verification.worst_value:.3e}")
    return EXIT_OK


def cmd_check(args, log: Log) -> int:
    scenario = load_and_build(args.scenario, _master_seed(args))
    out_dir = _output_dir(args, scenario)
    constants = game_constants(scenario)
    report, kappa = condition_report(scenario, constants)
    probe = monotonicity_probe(scenario.spec, args.pairs, np.random.default_rng(scenario.seed), constants)
    verdict = "hold" if report.holds else "do not hold"
    log(f"📊 Sufficient conditions {verdict}: follower margins "
        f"{min(report.follower_margins):.3g}, leader margin {report.leader_margin:.3g}")
    log(f"📊 Smallest sampled monotonicity value {probe.min_psi:.3e} over {probe.pairs} pairs")
    summary = {
        **_scenario_header(scenario),
        "conditions": report.to_dict(),
        "kappa": {"value": kappa.kappa, "attained_at": kappa.attained_at, "analytic": kappa.analytic},
        "monotonicity": {
            "min_psi": probe.min_psi,
            "certificate_at_min": probe.certificate_at_min,
            "pairs": probe.pairs,
            "strictly_monotone": probe.strictly_monotone,
        },
    }
    write_outputs(summary, out_dir / scenario.config.output.summary_file)
    return EXIT_OK


def cmd_run(args, log: Log) -> int:
    scenario = load_and_build(args.scenario, _master_seed(args))
    out_dir = _output_dir(args, scenario)
    reference = solve_reference(scenario, out_dir, log)
    log(f"🚀 Running {scenario.horizon} iterations ({scenario.protocol.label})")
    trace = simulate(scenario.spec, scenario.protocol, scenario.schedule, scenario.leader_schedule,
                     scenario.horizon, scenario.initial, seed=scenario.seed, reference=reference,
                     stride=scenario.config.run.stride)
    constants = game_constants(scenario)
    report, _ = condition_report(scenario, constants)
    violations = check_increment_bound(trace, constants, scenario.schedule)
    if violations:
        log(f"⚠️ {len(violations)} increment(s) exceed the sub-gradient bound")
    threshold = scenario.config.run.threshold
    summary = {
        **_scenario_header(scenario),
        "reference": reference.to_dict(),
        "final_error": float(trace.distance[-1]),
        "relative_final_error": float(trace.distance[-1]) / max(reference.norm(), 1e-300),
        "threshold": threshold,
        "iterations_to_threshold": trace.iterations_to(threshold),
        "increment_violations": len(violations),
        "constants": constants.to_dict(),
        "conditions": report.to_dict(),
    }
    if scenario.geometry is not None:
        summary["geometry"] = scenario.geometry.to_dict()
    write_outputs(trace, out_dir / scenario.config.output.trace_file)
    write_outputs(summary, out_dir / scenario.config.output.summary_file)
    log(f"✅ Final distance to reference {trace.distance[-1]:.3e}")
    return EXIT_OK


def cmd_mc(args, log: Log) -> int:
    scenario = load_and_build(args.scenario, _master_seed(args))
    runs = args.runs if args.runs is not None else scenario.config.run.runs
    if runs < MIN_RUNS:
        raise ConfigError([("run.runs", f"Monte-Carlo needs at least {MIN_RUNS} runs, got {runs}")])
    out_dir = _output_dir(args, scenario)
    reference = solve_reference(scenario, out_dir, log)
    result = monte_carlo(scenario, reference, runs=args.runs, log_callback=log)
    summary = {**_scenario_header(scenario), "reference": reference.to_dict(), "monte_carlo": result.to_dict()}
    write_outputs(result, out_dir / scenario.config.output.mse_file)
    write_outputs(summary, out_dir / scenario.config.output.summary_file)
    return EXIT_OK


def _small_cell_config(args) -> Tuple[ScenarioConfig, Path]:
    seed = _master_seed(args)
    if args.scenario:
        scenario = load_and_build(args.scenario, seed)
        if not isinstance(scenario.config.game, SmallCellGameConfig):
            raise ConfigError([("game.kind", "the smallcell command needs a small-cell game")])
        return scenario.config, Path(args.scenario).resolve().parent
    run_cfg = RunConfig(seed=0 if seed is None else seed, horizon=args.horizon or SMALL_CELL_HORIZON)
    return ScenarioConfig(game=SmallCellGameConfig(kind="small-cell"), run=run_cfg), Path(".")


def _slowest_first(values: Dict[str, Optional[float]]) -> bool:
    """gossip >= bernoulli >= normal; a protocol that never got there counts as failing"""
    ordered = [values.get(kind) for kind in ("gossip", "bernoulli", "normal")]
    if any(v is None for v in ordered):
        return False
    return ordered[0] >= ordered[1] >= ordered[2]


def cmd_smallcell(args, log: Log) -> int:
    """Build the small-cell network and run it under all three protocols"""
    config, base_dir = _small_cell_config(args)
    if args.horizon:
        config = config.model_copy(update={"run": config.run.model_copy(update={"horizon": args.horizon})})
    base = build_scenario(config, base_dir)
    out_dir = Path(args.output or config.output.directory)
    log(f"📡 Placed {base.spec.n_followers} cells after {base.geometry.attempts} attempt(s)")
    reference = solve_reference(base, out_dir, log)
    scale = max(reference.norm(), 1e-300)
    every = max(1, base.horizon // 200)

    protocols: Dict[str, object] = {}
    all_converged = True
    for protocol in SMALL_CELL_PROTOCOLS:
        scenario = build_scenario(config.with_protocol(protocol), base_dir)
        log(f"🚀 {protocol.label}: {scenario.horizon} iterations")
        trace = simulate(scenario.spec, scenario.protocol, scenario.schedule, scenario.leader_schedule,
                         scenario.horizon, scenario.initial, seed=scenario.seed, reference=reference)
        relative = float(trace.distance[-1]) / scale
        changes = leader_change_iterations(trace)
        period = scenario.leader_schedule.period
        power = [[int(k), average_power(trace.x_snapshots[i])]
                 for i, k in enumerate(trace.snapshot_iterations) if i % every == 0]
        converged = relative < SMALL_CELL_TOLERANCE
        all_converged = all_converged and converged
        protocols[protocol.kind.value] = {
            "label": protocol.label,
            "relative_final_error": relative,
            "converged": converged,
            "iterations_to_relative_1pct": trace.iterations_to(SMALL_CELL_TOLERANCE * scale),
            # mean over the states reached during the first leader period
            "early_relative_distance": float(trace.distance[1:period + 1].mean()) / scale,
            "final_price": trace.y_final.tolist(),
            "leader_piecewise_constant": all(k % period == 0 for k in changes),
            "leader_change_count": len(changes),
            "average_power": power,
        }
        write_outputs(trace, out_dir / f"trace_{protocol.kind.value}.csv")
        mark = "✅" if converged else "⚠️"
        log(f"{mark} {protocol.label}: relative error {relative:.3e}")

    ordering = {
        metric: _slowest_first({kind: result[metric] for kind, result in protocols.items()})
        for metric in ("iterations_to_relative_1pct", "early_relative_distance")
    }
    for metric, holds in ordering.items():
        if not holds:
            log(f"⚠️ Protocol ordering gossip >= bernoulli >= normal fails on {metric}")

    summary = {
        "game": base.spec.name,
        "seed": base.seed,
        "horizon": base.horizon,
        "leader_period": base.leader_schedule.period,
        "geometry": base.geometry.to_dict(),
        "reference": reference.to_dict(),
        "protocols": protocols,
        "protocol_ordering": ordering,
    }
    write_outputs(summary, out_dir / config.output.summary_file)
    return EXIT_OK if all_converged else EXIT_SCENARIO


# ---------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="master seed (overrides the file and LEADERNET_SEED)")
    common.add_argument("--output", help="output directory (overrides the file)")
    level = common.add_mutually_exclusive_group()
    level.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    level.add_argument("-q", "--quiet", action="store_true", help="warnings only")

    parser = argparse.ArgumentParser(prog="leadernet",
                                     description="Leader-follower network aggregative games "
                                                 "under stochastic communication")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[common], help="validate a scenario and its game")
    p.add_argument("scenario")
    p.set_defaults(handler=cmd_validate)

    p = sub.add_parser("gne", parents=[common], help="solve and verify the reference equilibrium")
    p.add_argument("scenario")
    p.add_argument("--probes", type=int, default=1000, help="probe points per agent")
    p.set_defaults(handler=cmd_gne)

    p = sub.add_parser("check", parents=[common], help="convergence conditions and monotonicity probe")
    p.add_argument("scenario")
    p.add_argument("--pairs", type=int, default=10000, help="sampled pairs for the monotonicity probe")
    p.set_defaults(handler=cmd_check)

    p = sub.add_parser("run", parents=[common], help="simulate one trajectory")
    p.add_argument("scenario")
    p.set_defaults(handler=cmd_run)

    p = sub.add_parser("mc", parents=[common], help="Monte-Carlo mean-square error")
    p.add_argument("scenario")
    p.add_argument("--runs", type=int, help="number of runs (overrides the file)")
    p.set_defaults(handler=cmd_mc)

    p = sub.add_parser("smallcell", parents=[common], help="small-cell case study under all protocols")
    p.add_argument("scenario", nargs="?", help="optional small-cell scenario file")
    p.add_argument("--horizon", type=int, help=f"iterations per protocol (default {SMALL_CELL_HORIZON})")
    p.set_defaults(handler=cmd_smallcell)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(message)s")
    log = logger.info
    try:
        return args.handler(args, log)
    except ConfigError as e:
        for path, message in e.errors:
            logger.error(f"❌ {path}: {message}")
        return EXIT_CONFIG
    except InputError as e:
        logger.error(f"❌ {e}")
        return EXIT_CONFIG
    except (ScenarioError, OracleError) as e:
        logger.error(f"❌ {e}")
        return EXIT_SCENARIO
    except ReferenceNotConverged as e:
        logger.error(f"❌ {e}")
        return EXIT_NOT_CONVERGED
    except LeaderNetError as e:
        logger.error(f"❌ {e}")
        return EXIT_FAILURE
    except Exception:
        logger.exception("❌ Unexpected failure")
        return EXIT_FAILURE
