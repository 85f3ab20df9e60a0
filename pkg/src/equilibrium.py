"""
Full-information reference equilibrium and the convergence-condition checks.
"""

from dataclasses import dataclass
from typing import Dict, Mapping, Optional, Tuple

import numpy as np

from src.errors import InputError, ReferenceNotConverged
from src.game import GameBounds, GameConstants, GameSpec, estimate_bounds
from src.settings import CONFIG

DEGENERATE_PAIR = 1e-14


@dataclass(frozen=True, eq=False)
class ReferencePoint:
    """
    Reference GNE z* = (x*, y*). `residual` is the natural-map residual
    ||z - Pi(z - g(z))||, which is zero exactly at an equilibrium.
    """
    x_star: np.ndarray
    y_star: np.ndarray
    residual: float
    iterations_used: int
    step: float
    tol: float

    def to_dict(self) -> Dict[str, object]:
        return {
            "x_star": np.asarray(self.x_star).tolist(),
            "y_star": np.asarray(self.y_star).tolist(),
            "residual": self.residual,
            "iterations_used": self.iterations_used,
            "step": self.step,
            "tol": self.tol,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, object]) -> "ReferencePoint":
        return cls(
            x_star=np.asarray(data["x_star"], dtype=float),
            y_star=np.asarray(data["y_star"], dtype=float),
            residual=float(data["residual"]),
            iterations_used=int(data["iterations_used"]),
            step=float(data["step"]),
            tol=float(data["tol"]),
        )

    def distance(self, x: np.ndarray, y: np.ndarray) -> float:
        return float(np.sqrt(np.sum((x - self.x_star) ** 2) + np.sum((y - self.y_star) ** 2)))

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.x_star ** 2) + np.sum(self.y_star ** 2)))


def _natural_residual(spec: GameSpec, x: np.ndarray, y: np.ndarray,
                      g_x: np.ndarray, g_y: np.ndarray) -> float:
    rx = x - spec.project_followers(x - g_x)
    ry = y - np.clip(y - g_y, spec.leader_set.lower, spec.leader_set.upper)
    return float(np.sqrt(np.sum(rx ** 2) + np.sum(ry ** 2)))


def default_reference_step(constants: GameConstants) -> float:
    """min(C) / (4 (L_bar + max C)^2), a conservative contraction step"""
    c_all = (*constants.strong_convexity_followers, constants.strong_convexity_leader)
    return min(c_all) / (4.0 * (constants.l_bar + max(c_all)) ** 2)


def solve_reference_gne(spec: GameSpec, step: Optional[float] = None,
                        tol: float = CONFIG["reference"]["tol"],
                        max_iter: int = CONFIG["reference"]["max_iter"],
                        constants: Optional[GameConstants] = None,
                        initial: Optional[Tuple[np.ndarray, np.ndarray]] = None) -> ReferencePoint:
    """
    Synchronous projected pseudo-gradient iteration z <- Pi(z - step g(z))
    with true aggregates, until the natural residual drops below tol.
    """
    if tol <= 0:
        raise InputError("tol must be positive")
    if step is None:
        if constants is None:
            constants = estimate_constants(spec, CONFIG["numerics"]["constant_sample_pairs"],
                                           np.random.default_rng(0))
        step = default_reference_step(constants)
    if step <= 0:
        raise InputError("step must be positive")

    x, y = spec.midpoint() if initial is None else (np.array(initial[0], dtype=float),
                                                    np.array(initial[1], dtype=float))
    lower_y, upper_y = spec.leader_set.lower, spec.leader_set.upper
    best = None
    best_residual = np.inf
    for it in range(max_iter + 1):
        g_x, g_y = spec.stacked_subgradient(x, y)
        residual = _natural_residual(spec, x, y, g_x, g_y)
        if residual < best_residual:
            best_residual = residual
            best = (x.copy(), y.copy(), it)
        if residual < tol:
            return ReferencePoint(x, y, residual, it, step, tol)
        x = spec.project_followers(x - step * g_x)
        y = np.clip(y - step * g_y, lower_y, upper_y)

    best_point = ReferencePoint(best[0], best[1], best_residual, best[2], step, tol)
    raise ReferenceNotConverged(
        f"reference solver stopped after {max_iter} iterations with residual {best_residual:.3e} > {tol:.1e}",
        best=best_point, residual=best_residual)


@dataclass(frozen=True)
class GneVerification:
    """Most negative directional value d(z*)^T (v - z*) found over feasible probes"""
    worst_value: float
    worst_agent: Optional[str]
    epsilon: Dict[str, float]
    per_agent: Dict[str, float]

    @property
    def passed(self) -> bool:
        return all(self.per_agent[agent] >= -self.epsilon[agent] for agent in self.per_agent)


def _probe_points(box, probes: int, rng: np.random.Generator) -> np.ndarray:
    corners = box.grid(2)
    return np.vstack([corners, box.sample(rng, probes)])


def verify_gne(spec: GameSpec, candidate: ReferencePoint, probes_per_agent: int,
               rng: np.random.Generator, bounds: Optional[GameBounds] = None) -> GneVerification:
    """
    Variational check of the equilibrium: for every agent and every probe v
    in its feasible box, d(z*)^T (v - z*) >= -epsilon with epsilon = 10 tol A.
    """
    x_star = np.asarray(candidate.x_star, dtype=float)
    y_star = np.asarray(candidate.y_star, dtype=float)
    g_x, g_y = spec.stacked_subgradient(x_star, y_star)
    if bounds is None:
        bounds = estimate_bounds(spec)

    per_agent: Dict[str, float] = {}
    epsilon: Dict[str, float] = {}
    for n, box in enumerate(spec.follower_sets):
        values = (_probe_points(box, probes_per_agent, rng) - x_star[n]) @ g_x[n]
        per_agent[f"follower_{n}"] = min(0.0, float(values.min()))
        epsilon[f"follower_{n}"] = 10.0 * candidate.tol * bounds.certified_follower_bounds[n]
    values = (_probe_points(spec.leader_set, probes_per_agent, rng) - y_star) @ g_y
    per_agent["leader"] = min(0.0, float(values.min()))
    epsilon["leader"] = 10.0 * candidate.tol * bounds.certified_leader_bound

    worst_agent = min(per_agent, key=per_agent.get)
    worst = per_agent[worst_agent]
    return GneVerification(worst, worst_agent if worst < 0 else None, epsilon, per_agent)


def estimate_constants(spec: GameSpec, sample_pairs: int, rng: np.random.Generator,
                       overrides: Optional[Mapping[str, object]] = None) -> GameConstants:
    """
    Sampled strong-convexity and Lipschitz constants.
    C_n is the smallest quotient (d(x) - d(x'))^T (x - x') / ||x - x'||^2 seen at
    a common (sigma, y); L the largest ||d(x, s1, y1) - d(x, s2, y2)|| /
    (||s1 - s2|| + ||y1 - y2||) over followers; C_0 and L_0 likewise for the
    leader. `overrides` replaces any of the resulting fields by exact values.
    """
    if sample_pairs < 100:
        raise InputError("sample_pairs must be at least 100")
    N = spec.n_followers
    sigma_boxes = [spec.sigma_box(n) for n in range(N)]
    sigma0_box = spec.leader_sigma_box()

    def sample_x():
        return np.array([b.sample(rng) for b in spec.follower_sets])

    def sample_sigma():
        return np.array([b.sample(rng) for b in sigma_boxes])

    c_followers = np.full(N, np.inf)
    lipschitz = 0.0
    c_leader = np.inf
    lipschitz_leader = 0.0
    for _ in range(sample_pairs):
        x1, x2 = sample_x(), sample_x()
        s1, s2 = sample_sigma(), sample_sigma()
        y1, y2 = spec.leader_set.sample(rng), spec.leader_set.sample(rng)

        dx = x1 - x2
        dx_sq = np.sum(dx ** 2, axis=1)
        g1 = spec.follower_subgradients(x1, s1, y1)
        g2 = spec.follower_subgradients(x2, s1, y1)
        ok = dx_sq > DEGENERATE_PAIR
        quotient = np.einsum("nd,nd->n", g1 - g2, dx)[ok] / dx_sq[ok]
        c_followers[ok] = np.minimum(c_followers[ok], quotient)

        spread = np.linalg.norm(s1 - s2, axis=1) + np.linalg.norm(y1 - y2)
        g3 = spec.follower_subgradients(x1, s2, y2)
        ok = spread > DEGENERATE_PAIR
        if np.any(ok):
            lipschitz = max(lipschitz, float(np.max(np.linalg.norm(g1 - g3, axis=1)[ok] / spread[ok])))

        s0a, s0b = sigma0_box.sample(rng), sigma0_box.sample(rng)
        dy = y1 - y2
        if np.sum(dy ** 2) > DEGENERATE_PAIR:
            h1 = spec.leader_subgradient(y1, s0a)
            h2 = spec.leader_subgradient(y2, s0a)
            c_leader = min(c_leader, float((h1 - h2) @ dy / np.sum(dy ** 2)))
        ds0 = np.linalg.norm(s0a - s0b)
        if ds0 > DEGENERATE_PAIR:
            h3 = spec.leader_subgradient(y1, s0a) - spec.leader_subgradient(y1, s0b)
            lipschitz_leader = max(lipschitz_leader, float(np.linalg.norm(h3) / ds0))

    fields = {
        "strong_convexity_followers": tuple(float(c) for c in c_followers),
        "strong_convexity_leader": float(c_leader),
        "lipschitz_follower": lipschitz,
        "lipschitz_leader": lipschitz_leader,
    }
    if overrides:
        unknown = set(overrides) - set(GameConstants.__dataclass_fields__)
        if unknown:
            raise InputError(f"unknown constant overrides: {sorted(unknown)}")
        fields.update(overrides)
    if not np.all(np.isfinite(fields["strong_convexity_followers"])) or \
            not np.isfinite(fields["strong_convexity_leader"]):
        raise InputError("every sample pair was degenerate; widen the feasible boxes")
    if min(fields["strong_convexity_followers"]) <= 0 or fields["strong_convexity_leader"] <= 0:
        raise InputError("sampled costs are not strongly convex (non-positive curvature found)")
    return GameConstants(**fields)


@dataclass(frozen=True)
class ConditionReport:
    """Sufficient convergence conditions C_n > (kappa/delta) L_bar and C_0 > kappa K_bar L_bar"""
    constants: GameConstants
    kappa: float
    delta: float
    k_bar: int
    l_bar: float
    follower_margins: Tuple[float, ...]
    leader_margin: float
    note: str = "sufficient conditions only: a failed check does not imply divergence"

    @property
    def holds(self) -> bool:
        return all(m > 0 for m in self.follower_margins) and self.leader_margin > 0

    def to_dict(self) -> Dict[str, object]:
        return {
            "constants": self.constants.to_dict(),
            "kappa": self.kappa,
            "delta": self.delta,
            "K_bar": self.k_bar,
            "L_bar": self.l_bar,
            "follower_margins": list(self.follower_margins),
            "leader_margin": self.leader_margin,
            "verdict": "hold" if self.holds else "do not hold",
            "note": self.note,
        }


def check_theorem_conditions(constants: GameConstants, kappa: float, delta: float, k_bar: int) -> ConditionReport:
    if not 0.0 < delta <= 1.0:
        raise InputError(f"delta must lie in (0, 1], got {delta}")
    if kappa < 1.0:
        raise InputError(f"kappa must be at least 1, got {kappa}")
    if k_bar < 1:
        raise InputError(f"K_bar must be at least 1, got {k_bar}")
    l_bar = constants.l_bar
    follower_margins = tuple(c - (kappa / delta) * l_bar for c in constants.strong_convexity_followers)
    leader_margin = constants.strong_convexity_leader - kappa * k_bar * l_bar
    return ConditionReport(constants, kappa, delta, k_bar, l_bar, follower_margins, leader_margin)


@dataclass(frozen=True)
class ProbeResult:
    """Smallest sampled Psi = (z - z')^T (g(z) - g(z'))"""
    min_psi: float
    certificate_at_min: Optional[float]
    pairs: int

    @property
    def strictly_monotone(self) -> bool:
        return self.min_psi > 0


def monotonicity_probe(spec: GameSpec, pairs: int, rng: np.random.Generator,
                       constants: Optional[GameConstants] = None) -> ProbeResult:
    """
    Sample feasible pairs z != z' and return the smallest Psi, together with
    the lower bound (C_0 - L_bar)||y - y'||^2 + sum (C_n - L_bar)||x_n - x_n'||^2
    at that pair when constants are supplied.
    """
    if pairs < 1:
        raise InputError("pairs must be at least 1")
    min_psi = np.inf
    certificate = None
    for _ in range(pairs):
        x1 = np.array([b.sample(rng) for b in spec.follower_sets])
        x2 = np.array([b.sample(rng) for b in spec.follower_sets])
        y1, y2 = spec.leader_set.sample(rng), spec.leader_set.sample(rng)
        dx, dy = x1 - x2, y1 - y2
        if np.sum(dx ** 2) + np.sum(dy ** 2) <= DEGENERATE_PAIR:
            continue
        gx1, gy1 = spec.stacked_subgradient(x1, y1)
        gx2, gy2 = spec.stacked_subgradient(x2, y2)
        psi = float(np.sum(dx * (gx1 - gx2)) + dy @ (gy1 - gy2))
        if psi < min_psi:
            min_psi = psi
            if constants is not None:
                l_bar = constants.l_bar
                certificate = float((constants.strong_convexity_leader - l_bar) * np.sum(dy ** 2)
                                    + np.sum((np.asarray(constants.strong_convexity_followers) - l_bar)
                                             * np.sum(dx ** 2, axis=1)))
    return ProbeResult(float(min_psi), certificate, pairs)
