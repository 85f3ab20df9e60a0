"""
Scenario files: strict pydantic models for the `game`, `protocol`, `schedule`,
`run` and `output` sections, and the builder that turns a validated config
into a runnable game, protocol and schedule.
"""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Annotated, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from src.comm import ProtocolSpec
from src.errors import ConfigError, InputError
from src.game import GameSpec, affine_game_from_dict, build_quadratic_game
from src.schedule import LeaderSchedule, PowerStep, StepSchedule
from src.settings import CONFIG
from src.smallcell import REFERENCE_STEP, SmallCellGeometry, SmallCellParams, build_scenario as build_small_cell
from src.smallcell import default_schedule as small_cell_schedule

SEED_LIMIT = 2 ** 64


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


# ---------------------------------------------------------------- game

class QuadraticGameConfig(StrictModel):
    kind: Literal["quadratic-test"]
    n_followers: int = Field(2, ge=2)


class SmallCellGameConfig(SmallCellParams):
    kind: Literal["small-cell"]

    def params(self) -> SmallCellParams:
        return SmallCellParams(**self.model_dump(exclude={"kind"}))


class CustomGameConfig(StrictModel):
    kind: Literal["custom-from-file"]
    path: str


GameConfig = Annotated[Union[QuadraticGameConfig, SmallCellGameConfig, CustomGameConfig],
                       Field(discriminator="kind")]


# ---------------------------------------------------------------- protocol

class NormalProtocolConfig(StrictModel):
    kind: Literal["normal"]

    def to_spec(self) -> ProtocolSpec:
        return ProtocolSpec.normal()


class BernoulliProtocolConfig(StrictModel):
    kind: Literal["bernoulli"]
    p: float = Field(gt=0, le=1)
    q: float = Field(gt=0, le=1)

    def to_spec(self) -> ProtocolSpec:
        return ProtocolSpec.bernoulli(self.p, self.q)


class GossipProtocolConfig(StrictModel):
    kind: Literal["gossip"]

    def to_spec(self) -> ProtocolSpec:
        return ProtocolSpec.gossip()


ProtocolConfig = Annotated[Union[NormalProtocolConfig, BernoulliProtocolConfig, GossipProtocolConfig],
                           Field(discriminator="kind")]


# ---------------------------------------------------------------- schedule / run / output

class StepConfig(StrictModel):
    a: float = Field(1.0, gt=0)
    b: float = Field(1.0, ge=1)
    p: float = Field(1.0, gt=0.5, le=1)

    def to_step(self) -> PowerStep:
        return PowerStep(self.a, self.b, self.p)


class ScheduleConfig(StrictModel):
    """
    `followers` (one entry per follower) wins over `follower`; unset entries
    and an unset `leader_period` fall back to the game's defaults.
    """
    follower: Optional[StepConfig] = None
    followers: Optional[List[StepConfig]] = None
    leader: Optional[StepConfig] = None
    leader_period: Optional[int] = Field(None, ge=1)


class RunConfig(StrictModel):
    seed: int = Field(ge=0, lt=SEED_LIMIT)
    horizon: int = Field(ge=1)
    runs: int = Field(2, ge=1)
    stride: int = Field(1, ge=1)
    initial: Literal["midpoint", "lower", "upper"] = "midpoint"
    threshold: float = Field(0.1, gt=0)
    reference_step: Optional[float] = Field(None, gt=0)
    reference_tol: float = Field(CONFIG["reference"]["tol"], gt=0)
    reference_max_iter: int = Field(CONFIG["reference"]["max_iter"], ge=1)


class OutputConfig(StrictModel):
    directory: str = CONFIG["output"]["directory"]
    trace_file: str = CONFIG["output"]["trace_file"]
    summary_file: str = CONFIG["output"]["summary_file"]
    mse_file: str = "mse.csv"
    cache: bool = True


class ScenarioConfig(StrictModel):
    game: GameConfig
    protocol: ProtocolConfig = NormalProtocolConfig(kind="normal")
    schedule: ScheduleConfig = ScheduleConfig()
    run: RunConfig
    output: OutputConfig = OutputConfig()

    def with_seed(self, seed: int) -> "ScenarioConfig":
        if not 0 <= seed < SEED_LIMIT:
            raise ConfigError([("run.seed", f"must lie in [0, 2^64), got {seed}")])
        return self.model_copy(update={"run": self.run.model_copy(update={"seed": seed})})

    def with_protocol(self, protocol: ProtocolSpec) -> "ScenarioConfig":
        kind = protocol.kind.value
        if kind == "bernoulli":
            section = BernoulliProtocolConfig(kind=kind, p=protocol.link_probability,
                                              q=protocol.activity_probability)
        elif kind == "gossip":
            section = GossipProtocolConfig(kind=kind)
        else:
            section = NormalProtocolConfig(kind=kind)
        return self.model_copy(update={"protocol": section})


def _error_pairs(error: ValidationError) -> List[Tuple[str, str]]:
    return [(".".join(str(part) for part in item["loc"]) or "$", item["msg"]) for item in error.errors()]


def parse_scenario(text: str) -> ScenarioConfig:
    """Validate a JSON scenario document; every field error is collected in ConfigError.errors"""
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError([("$", f"not valid JSON: {e}")]) from e
    try:
        return ScenarioConfig.model_validate(document)
    except ValidationError as e:
        raise ConfigError(_error_pairs(e)) from e


def render_scenario(config: ScenarioConfig) -> str:
    return json.dumps(config.model_dump(mode="json"), indent=4, sort_keys=True) + "\n"


def load_scenario(path: Union[str, Path]) -> Tuple[ScenarioConfig, Path]:
    """Parse a scenario file; also returns the directory relative paths resolve against"""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError([("$", f"cannot read {path}: {e}")]) from e
    return parse_scenario(text), path.resolve().parent


# ---------------------------------------------------------------- building

@dataclass(frozen=True, eq=False)
class Scenario:
    """Everything a run needs, resolved from a ScenarioConfig"""
    config: ScenarioConfig
    spec: GameSpec
    protocol: ProtocolSpec
    schedule: StepSchedule
    leader_schedule: LeaderSchedule
    initial: Tuple[np.ndarray, np.ndarray]
    reference_step: Optional[float]
    game_document: Dict[str, object]
    geometry: Optional[SmallCellGeometry] = None

    @property
    def seed(self) -> int:
        return self.config.run.seed

    @property
    def horizon(self) -> int:
        return self.config.run.horizon

    def reference_key(self) -> Dict[str, object]:
        """Inputs that determine the reference equilibrium"""
        return {
            "game": self.game_document,
            "step": self.reference_step,
            "max_iter": self.config.run.reference_max_iter,
        }


def _read_game_file(path: Path) -> Dict[str, object]:
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigError([("game.path", f"cannot read {path}: {e}")]) from e
    except json.JSONDecodeError as e:
        raise ConfigError([("game.path", f"{path} is not valid JSON: {e}")]) from e


def build_scenario(config: ScenarioConfig, base_dir: Union[str, Path] = ".") -> Scenario:
    game = config.game
    geometry = None
    reference_step = config.run.reference_step
    game_document: Dict[str, object] = game.model_dump(mode="json")
    default_period = 1

    if isinstance(game, QuadraticGameConfig):
        spec = build_quadratic_game(game.n_followers)
        default_steps = StepSchedule.uniform(spec.n_followers)
    elif isinstance(game, SmallCellGameConfig):
        params = game.params()
        spec, geometry = build_small_cell(params)
        default_steps = small_cell_schedule(params)
        default_period = params.leader_period
        if reference_step is None:
            reference_step = REFERENCE_STEP
    else:
        path = Path(game.path)
        if not path.is_absolute():
            path = Path(base_dir) / path
        document = _read_game_file(path)
        game_document = {"kind": game.kind, "document": document}
        try:
            spec = affine_game_from_dict(document)
        except InputError as e:
            raise ConfigError([("game.path", str(e))]) from e
        default_steps = StepSchedule.uniform(spec.n_followers)

    schedule = _resolve_schedule(config.schedule, default_steps, spec.n_followers)
    period = config.schedule.leader_period or default_period
    corners = {"midpoint": spec.midpoint, "lower": spec.lower_corner, "upper": spec.upper_corner}
    return Scenario(
        config=config,
        spec=spec,
        protocol=config.protocol.to_spec(),
        schedule=schedule,
        leader_schedule=LeaderSchedule(period),
        initial=corners[config.run.initial](),
        reference_step=reference_step,
        game_document=game_document,
        geometry=geometry,
    )


def _resolve_schedule(section: ScheduleConfig, defaults: StepSchedule, n_followers: int) -> StepSchedule:
    if section.followers is not None:
        if len(section.followers) != n_followers:
            raise ConfigError([("schedule.followers",
                                f"{len(section.followers)} entries for {n_followers} followers")])
        followers = tuple(step.to_step() for step in section.followers)
    elif section.follower is not None:
        followers = (section.follower.to_step(),) * n_followers
    else:
        followers = defaults.followers
    if section.leader is not None:
        leader = section.leader.to_step()
    elif section.follower is not None and section.followers is None:
        leader = section.follower.to_step()
    else:
        leader = defaults.leader
    return StepSchedule(followers, leader)


def load_and_build(path: Union[str, Path], seed: Optional[int] = None) -> Scenario:
    config, base_dir = load_scenario(path)
    if seed is not None:
        config = config.with_seed(seed)
    return build_scenario(config, base_dir)
