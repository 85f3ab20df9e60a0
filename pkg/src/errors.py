"""Exception hierarchy shared by every LeaderNet module."""

from typing import Any, List, Optional, Tuple


class LeaderNetError(Exception):
    """Base class for all LeaderNet failures"""


class InputError(LeaderNetError, ValueError):
    """Malformed arguments: wrong shapes, missing neighbors, infeasible points"""


class OracleError(LeaderNetError):
    """A sub-gradient or cost oracle failed or returned non-finite values"""

    def __init__(self, message: str, location: Optional[dict] = None):
        super().__init__(message)
        self.location = location or {}

    def __str__(self):
        base = super().__str__()
        if not self.location:
            return base
        where = ", ".join(f"{k}={v}" for k, v in self.location.items())
        return f"{base} (at {where})"


class ScenarioError(LeaderNetError):
    """A scenario that cannot be built or simulated"""

    def __init__(self, message: str, run_id: Optional[int] = None):
        super().__init__(message)
        self.run_id = run_id

    def __str__(self):
        base = super().__str__()
        return base if self.run_id is None else f"run {self.run_id}: {base}"


class ConfigError(LeaderNetError):
    """Scenario document failed validation; `errors` holds (path, message) pairs"""

    def __init__(self, errors: List[Tuple[str, str]]):
        self.errors = list(errors)
        lines = [f"{path}: {message}" for path, message in self.errors]
        super().__init__("invalid scenario:\n  " + "\n  ".join(lines))


class ReferenceNotConverged(LeaderNetError):
    """Reference solver exhausted max_iter before reaching the tolerance"""

    def __init__(self, message: str, best: Any = None, residual: float = float("nan")):
        super().__init__(message)
        self.best = best
        self.residual = residual


class OutputError(LeaderNetError):
    """Writing a result file failed"""

    def __init__(self, message: str, path: Any = None):
        super().__init__(message if path is None else f"{path}: {message}")
        self.path = path
