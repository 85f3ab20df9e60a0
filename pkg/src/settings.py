"""
Application settings for LeaderNet.
Loads config.json from the project root and the optional master-seed override
from the environment (LEADERNET_SEED, also read from a local .env file).
"""

import json
import os
from copy import deepcopy
from pathlib import Path
from typing import Any, Dict, Optional

from dotenv import load_dotenv

from src.errors import ConfigError

CONFIG_PATH = Path(__file__).resolve().parent.parent / "config.json"
SEED_ENV_VAR = "LEADERNET_SEED"

DEFAULTS: Dict[str, Dict[str, Any]] = {
    "numerics": {
        "weight_tolerance": 1e-12,
        "increment_slack": 1e-9,
        "bound_grid_points": 11,
        "bound_safety_factor": 1.1,
        "constant_sample_pairs": 400,
    },
    "reference": {
        "tol": 1e-10,
        "max_iter": 200000,
    },
    "monte_carlo": {
        "max_workers": None,
        "executor": "process",
    },
    "output": {
        "directory": "results",
        "trace_file": "trace.csv",
        "summary_file": "summary.json",
        "cache_file": "reference_cache.db",
    },
}


def load_config(path: Path = CONFIG_PATH) -> Dict[str, Dict[str, Any]]:
    """Read config.json and layer it over the built-in defaults"""
    config = deepcopy(DEFAULTS)
    try:
        with open(path, "r", encoding="utf-8") as f:
            loaded = json.load(f)
    except FileNotFoundError:
        return config
    for section, values in loaded.items():
        if isinstance(values, dict):
            config.setdefault(section, {}).update(values)
    return config


CONFIG = load_config()


def seed_override() -> Optional[int]:
    """Master seed from LEADERNET_SEED, if set"""
    load_dotenv()
    raw = os.getenv(SEED_ENV_VAR)
    if raw is None or raw.strip() == "":
        return None
    try:
        return int(raw, 0)
    except ValueError:
        raise ConfigError([(SEED_ENV_VAR, f"must be an integer, got {raw!r}")])
