"""Nearest Triplet-Separated configuration of an embedding.

The free variables are the ``N`` output points. Each objective is a max of
distances; it is smoothed with an annealed log-sum-exp, the separation
constraint is added as an exact penalty, and the result of every restart is
repaired to exact feasibility before its true objective is measured. The
best feasible value found is therefore an upper bound on the infimum over
all Triplet-Separated configurations.
"""

from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .geometry import (
    InvalidInputError,
    LabeledPointSet,
    diameter,
    hausdorff_distance,
    thickness,
)
from .isometry import EmbeddingPair, d_iso
from .triplet import has_valid_triplets, is_triplet_separated, separation_margin


class ProjectionDivergedError(RuntimeError):
    """Every restart produced a non-finite objective."""


class FeasibilityError(RuntimeError):
    """A configuration could not be certified Triplet-Separated."""


class Objective(str, enum.Enum):
    HAUSDORFF_LIKE = "haus"
    POINTWISE_SUP = "sup"
    ISOMETRIC_ERROR = "iso"

    @property
    def kernel_code(self) -> int:
        return {"haus": kernels.OBJ_HAUS, "sup": kernels.OBJ_SUP,
                "iso": kernels.OBJ_ISO}[self.value]


@dataclass(frozen=True)
class ProjectionConfig:
    """Solver settings. Temperatures and step sizes are in units of the input diameter.

    ``initial_step_size`` applies to the first stage; later stages scale it
    by their temperature relative to the first. ``step_decay`` is applied per
    iteration within a stage.
    """

    objective: Objective = Objective.ISOMETRIC_ERROR
    restarts: int = 20
    max_iterations: int = 700
    initial_step_size: float = 0.02
    smoothing_temperature_schedule: tuple = (0.05, 0.02, 0.008, 0.003, 0.001, 3e-4, 1e-4)
    penalty_weight_schedule: tuple = (2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0)
    seed: int = 0
    convergence_tolerance: float = 0.0
    step_decay: float = 0.99
    momentum: float = 0.9
    perturbation_scale: float = 0.5
    repair_max_steps: int = 200
    thickness_floor: float = 1e-6

    def __post_init__(self):
        object.__setattr__(self, "objective", Objective(self.objective))
        temps = tuple(float(t) for t in self.smoothing_temperature_schedule)
        weights = tuple(float(w) for w in self.penalty_weight_schedule)
        if not temps or not weights:
            raise InvalidInputError("schedules must be non-empty")
        if any(t <= 0 for t in temps) or any(a < b for a, b in zip(temps, temps[1:])):
            raise InvalidInputError("temperature schedule must be positive and decreasing")
        if any(w <= 0 for w in weights) or any(a > b for a, b in zip(weights, weights[1:])):
            raise InvalidInputError("penalty weight schedule must be positive and increasing")
        if self.restarts < 1 or self.max_iterations < 1:
            raise InvalidInputError("restarts and max_iterations must be positive")
        if self.initial_step_size <= 0 or not 0 < self.step_decay <= 1:
            raise InvalidInputError("step size must be positive and decay in (0, 1]")
        if not 0 <= self.momentum < 1:
            raise InvalidInputError("momentum must lie in [0, 1)")
        if self.convergence_tolerance < 0:
            raise InvalidInputError("convergence_tolerance must be nonnegative")
        object.__setattr__(self, "smoothing_temperature_schedule", temps)
        object.__setattr__(self, "penalty_weight_schedule", weights)

    def stages(self):
        """Paired (temperature, weight) stages; the shorter schedule holds its last value."""
        temps = self.smoothing_temperature_schedule
        weights = self.penalty_weight_schedule
        k = max(len(temps), len(weights))
        return ([temps[min(i, len(temps) - 1)] for i in range(k)],
                [weights[min(i, len(weights) - 1)] for i in range(k)])

    def replace(self, **changes) -> "ProjectionConfig":
        values = dict(self.__dict__)
        values.update(changes)
        return ProjectionConfig(**values)


@dataclass
class ProjectionResult:
    f_star: LabeledPointSet
    objective: Objective
    objective_value: float
    feasible: bool
    restarts_used: int
    iterations_per_restart: list[int] = field(default_factory=list)
    restart_objectives: list[float | None] = field(default_factory=list)
    best_restart_index: int = -1
    abandoned_restarts: list[int] = field(default_factory=list)
    thickness_of_input: float = 0.0
    thin_input: bool = False

    def to_dict(self) -> dict:
        return {
            "objective": self.objective.value,
            "objective_value": self.objective_value,
            "feasible": self.feasible,
            "f_star": self.f_star.to_dict(),
            "diagnostics": {
                "restarts_used": self.restarts_used,
                "iterations_per_restart": self.iterations_per_restart,
                "restart_objectives": self.restart_objectives,
                "best_restart_index": self.best_restart_index,
                "abandoned_restarts": self.abandoned_restarts,
                "thickness_of_input": self.thickness_of_input,
                "thin_input": self.thin_input,
            },
        }


def evaluate_objective(ps: LabeledPointSet, Y, objective) -> float:
    """Exact objective between ``ps`` and the configuration ``Y`` (same labels)."""
    objective = Objective(objective)
    X = ps.points
    Y = np.asarray(Y, dtype=float)
    if Y.shape != X.shape:
        raise InvalidInputError("configuration shape differs from the input")
    if objective is Objective.POINTWISE_SUP:
        return float(np.max(np.linalg.norm(X - Y, axis=1)))
    if objective is Objective.ISOMETRIC_ERROR:
        return d_iso(EmbeddingPair(ps, ps.with_points(Y)))
    return max(hausdorff_distance(X[ps.labels == c], Y[ps.labels == c]) for c in ps.classes)


def feasibility_violation(ps: LabeledPointSet) -> float:
    """``max(0, separation_margin)``; 0 when no valid triplet exists."""
    if not has_valid_triplets(ps):
        return 0.0
    return max(0.0, separation_margin(ps))


def _class_offsets(Y, codes):
    g = Y.mean(axis=0)
    cents = np.array([Y[codes == c].mean(axis=0) for c in range(codes.max() + 1)])
    return g, cents


def repair_to_feasible(ps: LabeledPointSet, max_steps: int = 200,
                       initial_step: float = 1e-6) -> LabeledPointSet:
    """Push classes apart along their centroid directions until separated.

    Class ``i`` is translated by ``s * (c_i - g) / max_j ||c_j - g||`` with
    ``s`` doubling from ``initial_step * diam``. Coinciding class centroids
    are first split by a small deterministic offset.
    """
    if is_triplet_separated(ps):
        return ps
    codes = ps.codes
    Y = ps.points.copy()
    diam = diameter(Y)
    scale = diam if diam > 0 else 1.0
    g, cents = _class_offsets(Y, codes)
    k = cents.shape[0]
    gaps = np.linalg.norm(cents[:, None] - cents[None, :], axis=-1)
    np.fill_diagonal(gaps, np.inf)
    if gaps.min() <= 1e-12 * scale or np.linalg.norm(cents - g, axis=1).max() <= 1e-12 * scale:
        for c in range(k):
            Y[codes == c, 0] += 1e-3 * scale * (c + 1)
        g, cents = _class_offsets(Y, codes)
    V = cents - g
    V /= np.linalg.norm(V, axis=1).max()
    s = initial_step * scale
    for _ in range(max_steps):
        Z = Y + s * V[codes]
        cand = ps.with_points(Z)
        if is_triplet_separated(cand):
            return cand
        s *= 2.0
    raise FeasibilityError("repair failed")


def _initial_points(Xs, codes, restart, rng, cfg):
    if restart == 0:
        return Xs.copy()
    if restart == 1:
        Y = np.empty_like(Xs)
        for c in np.unique(codes):
            Y[codes == c] = Xs[codes == c].mean(axis=0)
        return Y + 1e-3 * rng.normal(size=Xs.shape)
    sigma = cfg.perturbation_scale * rng.uniform(0.1, 1.0)
    return Xs + sigma * rng.normal(size=Xs.shape)


def _run_restart(ps, Xs, center, diam, codes, cfg, restart):
    rng = np.random.default_rng([cfg.seed, restart])
    Y0 = _initial_points(Xs, codes, restart, rng, cfg)
    temps, weights = cfg.stages()
    iters = max(1, cfg.max_iterations // len(temps))
    Y, it, best_Y, _ = kernels.descend(
        Xs, Y0, codes, cfg.objective.kernel_code, temps, weights, iters,
        cfg.initial_step_size, cfg.step_decay, cfg.momentum, cfg.convergence_tolerance)
    candidates = [] if Y is None else [c for c in (Y, best_Y) if c is not None]
    best = None
    for cand in candidates:
        try:
            fixed = repair_to_feasible(ps.with_points(cand * diam + center), cfg.repair_max_steps)
        except FeasibilityError:
            continue
        value = evaluate_objective(ps, fixed.points, cfg.objective)
        if best is None or value < best[0]:
            best = (value, fixed)
    return restart, it, Y is None, best


def project(ps: LabeledPointSet, cfg: ProjectionConfig | None = None) -> ProjectionResult:
    """Best certified-feasible configuration found for ``cfg.objective``."""
    cfg = cfg or ProjectionConfig()
    diam = diameter(ps)
    th = thickness(ps.points) if len(ps) > 1 else 0.0
    thin = th < cfg.thickness_floor * diam if diam > 0 else True
    if is_triplet_separated(ps):
        return ProjectionResult(ps, cfg.objective, 0.0, True, 0, best_restart_index=-1,
                                thickness_of_input=th, thin_input=thin)
    center = ps.points.mean(axis=0)
    Xs = (ps.points - center) / diam
    codes = ps.codes
    workers = min(kernels.worker_count(), cfg.restarts)
    job = lambda r: _run_restart(ps, Xs, center, diam, codes, cfg, r)  # noqa: E731
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(job, range(cfg.restarts)))
    else:
        outcomes = [job(r) for r in range(cfg.restarts)]
    iterations, values, abandoned = [], [], []
    best = None
    for restart, it, diverged, cand in outcomes:
        iterations.append(int(it))
        if diverged:
            abandoned.append(restart)
        if cand is None:
            values.append(None)
            continue
        values.append(cand[0])
        if best is None or cand[0] < best[1]:
            best = (restart, cand[0], cand[1])
    if best is None:
        if len(abandoned) == cfg.restarts:
            raise ProjectionDivergedError("projection diverged")
        raise FeasibilityError("repair failed on every restart")
    restart, value, f_star = best
    if not is_triplet_separated(f_star):
        raise FeasibilityError("feasibility certificate failed")
    return ProjectionResult(f_star, cfg.objective, float(value), True, cfg.restarts,
                            iterations, values, restart, abandoned, th, thin)


def collapse_ratio(ps: LabeledPointSet, result: ProjectionResult) -> float:
    """``diam(f_star) / diam(input)``."""
    d = diameter(ps)
    if d <= 0:
        raise InvalidInputError("degenerate input")
    return diameter(result.f_star) / d
