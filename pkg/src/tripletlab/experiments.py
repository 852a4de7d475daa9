"""Bound verification, collapse sweeps and toy figure instances."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import InvalidInputError, LabeledPointSet, diameter, pairwise_distances, thickness
from .projection import (
    Objective,
    ProjectionConfig,
    ProjectionResult,
    collapse_ratio,
    evaluate_objective,
    project,
)
from .triplet import (
    HardNegative,
    class_boundary,
    has_valid_triplets,
    hnm_loss,
    is_triplet_separated,
    mine,
)


@dataclass
class Check:
    name: str
    lhs: float
    rhs: float
    rigorous: bool
    passed: bool
    report_only: bool = False

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    def to_dict(self) -> dict:
        return {"name": self.name, "lhs": self.lhs, "rhs": self.rhs, "slack": self.slack,
                "rigorous": self.rigorous, "report_only": self.report_only,
                "passed": self.passed}


@dataclass
class BoundReport:
    N: int
    n: int
    c: int
    seed: int
    tl_hnm: float
    d_iso_ub: float
    d_haus_ub: float
    pointwise_sup_ub: float
    thickness_of_input: float
    c_emp: float | None
    checks: list[Check] = field(default_factory=list)
    projections: dict = field(default_factory=dict)

    def check(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    @property
    def rigorous_passed(self) -> bool:
        return all(c.passed for c in self.checks if c.rigorous)

    def to_dict(self) -> dict:
        return {
            "instance": {"N": self.N, "n": self.n, "c": self.c, "seed": self.seed},
            "tl_hnm": self.tl_hnm,
            "d_iso_ub": self.d_iso_ub,
            "d_haus_ub": self.d_haus_ub,
            "pointwise_sup_ub": self.pointwise_sup_ub,
            "thickness_of_input": self.thickness_of_input,
            "c_emp": self.c_emp,
            "checks": [c.to_dict() for c in self.checks],
            "projections": self.projections,
        }


OBJECTIVES = (Objective.ISOMETRIC_ERROR, Objective.HAUSDORFF_LIKE, Objective.POINTWISE_SUP)


def verify_bounds(ps: LabeledPointSet, cfg: ProjectionConfig | None = None,
                  tolerance: float = 0.05) -> BoundReport:
    """Compute every quantity of the bound chains for one instance.

    One projection runs per objective; each upper bound is then the smallest
    value of its objective over all three certified-feasible configurations.
    """
    cfg = cfg or ProjectionConfig()
    tl = hnm_loss(ps) if has_valid_triplets(ps) else 0.0
    results: dict[Objective, ProjectionResult] = {
        obj: project(ps, cfg.replace(objective=obj)) for obj in OBJECTIVES}
    cross = {
        obj: {other: evaluate_objective(ps, res.f_star.points, other) for other in OBJECTIVES}
        for obj, res in results.items()}
    ub = {other: min(cross[obj][other] for obj in OBJECTIVES) for other in OBJECTIVES}
    d_iso_ub = ub[Objective.ISOMETRIC_ERROR]
    d_haus_ub = ub[Objective.HAUSDORFF_LIKE]
    sup_ub = ub[Objective.POINTWISE_SUP]
    k = 1.0 + tolerance
    checks = [
        Check("R1", tl, 2.0 * d_iso_ub, True, tl <= 2.0 * d_iso_ub),
        Check("R2", d_haus_ub, sup_ub, True, d_haus_ub <= sup_ub),
    ]
    for obj, row in cross.items():
        h, s = row[Objective.HAUSDORFF_LIKE], row[Objective.POINTWISE_SUP]
        checks.append(Check(f"R2[{obj.value}]", h, s, True, h <= s))
    checks += [
        Check("S1", d_iso_ub, 2.0 * tl * k, False, d_iso_ub <= 2.0 * tl * k),
        Check("S2", d_iso_ub, 2.0 * d_haus_ub * k, False, d_iso_ub <= 2.0 * d_haus_ub * k),
    ]
    c_emp = d_haus_ub / d_iso_ub if d_iso_ub > 0 else None
    checks.append(Check("S3", d_haus_ub, d_iso_ub, False, True, report_only=True))
    th = results[Objective.ISOMETRIC_ERROR].thickness_of_input
    return BoundReport(
        N=len(ps), n=ps.dimension, c=int(ps.classes.size), seed=cfg.seed, tl_hnm=tl,
        d_iso_ub=d_iso_ub, d_haus_ub=d_haus_ub, pointwise_sup_ub=sup_ub,
        thickness_of_input=th, c_emp=c_emp, checks=checks,
        projections={obj.value: {"objective_value": res.objective_value,
                                 "best_restart_index": res.best_restart_index,
                                 "cross": {o.value: v for o, v in cross[obj].items()},
                                 "f_star": res.f_star.to_dict()}
                     for obj, res in results.items()},
    )


# ---------------------------------------------------------------- sweeps

@dataclass
class CollapseRecord:
    N: int
    n: int
    num_classes: int
    trial: int
    trial_seed: int
    collapse_ratio: float
    collapsed: bool
    objective_value: float


CSV_HEADER = ["N", "n", "classes", "trial", "seed", "collapse_ratio", "collapsed", "objective"]


def interleaved_instance(N: int, n: int, num_classes: int, rng) -> LabeledPointSet:
    """Uniform points in the unit cube with labels ``k mod num_classes``."""
    X = rng.uniform(0.0, 1.0, size=(N, n))
    return LabeledPointSet(n, X, np.arange(N) % num_classes)


def cell_seed(root: int, N: int, n: int, trial: int) -> int:
    """Seed of one sweep trial, derived from the root seed only."""
    return int(np.random.SeedSequence([root, N, n, trial]).generate_state(1, np.uint32)[0])


def collapse_sweep(N_values, n_values, num_classes: int = 2, trials: int = 20,
                   cfg: ProjectionConfig | None = None, threshold: float = 0.1,
                   seed: int = 0):
    """Collapse ratio of the Hausdorff-like projection over a grid of ``(N, n)``.

    Returns ``(records, table)`` where ``table`` maps ``(N, n)`` to the mean
    ratio, its standard error and the collapsed fraction.
    """
    cfg = (cfg or ProjectionConfig()).replace(objective=Objective.HAUSDORFF_LIKE)
    for N in N_values:
        if N < 2 * num_classes:
            raise InvalidInputError(f"N={N} is below 2 * num_classes")
    records = []
    for N in N_values:
        for n in n_values:
            for trial in range(trials):
                s = cell_seed(seed, N, n, trial)
                ps = interleaved_instance(N, n, num_classes, np.random.default_rng(s))
                res = project(ps, cfg.replace(seed=s))
                ratio = collapse_ratio(ps, res)
                records.append(CollapseRecord(N, n, num_classes, trial, s, ratio,
                                              ratio < threshold, res.objective_value))
    return records, aggregate(records)


def aggregate(records) -> dict:
    table = {}
    keys = sorted({(r.N, r.n) for r in records})
    for key in keys:
        ratios = np.array([r.collapse_ratio for r in records if (r.N, r.n) == key])
        flags = np.array([r.collapsed for r in records if (r.N, r.n) == key], dtype=float)
        m = ratios.size
        table[key] = {
            "trials": m,
            "mean_ratio": float(ratios.mean()),
            "stderr_ratio": float(ratios.std(ddof=1) / math.sqrt(m)) if m > 1 else 0.0,
            "collapsed_fraction": float(flags.mean()),
            "stderr_fraction": float(flags.std(ddof=1) / math.sqrt(m)) if m > 1 else 0.0,
        }
    return table


def records_to_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        w.writerow([r.N, r.n, r.num_classes, r.trial, r.trial_seed, repr(r.collapse_ratio),
                    "true" if r.collapsed else "false", repr(r.objective_value)])
    return buf.getvalue()


def trend_inversions(table, n: int) -> list[tuple[int, int, bool]]:
    """Consecutive-N cells at fixed ``n`` whose collapsed fraction decreases.

    Each entry is ``(N_low, N_high, within_one_stderr)``.
    """
    cells = sorted((N, v) for (N, m), v in table.items() if m == n)
    out = []
    for (N0, a), (N1, b) in zip(cells, cells[1:]):
        if b["collapsed_fraction"] < a["collapsed_fraction"]:
            se = math.hypot(a["stderr_fraction"], b["stderr_fraction"])
            out.append((N0, N1, a["collapsed_fraction"] - b["collapsed_fraction"] <= se))
    return out


# --------------------------------------------------------------- figures

def toy_instance(seed: int, split=(3, 2), spacing: float = 1.0, spread: float = 0.6,
                 max_attempts: int = 1000) -> LabeledPointSet:
    """Two overlapping planar Gaussian classes that are not Triplet-Separated."""
    rng = np.random.default_rng(seed)
    labels = np.repeat(np.arange(len(split)), split)
    centers = np.array([[spacing * k, 0.0] for k in range(len(split))])
    for _ in range(max_attempts):
        X = centers[labels] + spread * rng.normal(size=(labels.size, 2))
        ps = LabeledPointSet(2, X, labels)
        if not is_triplet_separated(ps):
            return ps
    raise InvalidInputError("could not draw an overlapping toy instance")


def min_volume_ellipse(points, tol: float = 1e-9, max_iter: int = 10000):
    """Minimum-volume enclosing ellipsoid ``{x : (x - c)^T A (x - c) <= 1}``.

    Khachiyan's barycentric coordinate ascent. Degenerate (flat) point sets
    are handled by regularising within the affine hull.
    """
    P = np.asarray(points, dtype=float)
    N, d = P.shape
    c0 = P.mean(axis=0)
    Q = P - c0
    if N == 1 or np.allclose(Q, 0):
        eps = max(1e-9, 1e-9 * float(np.abs(P).max()))
        return c0, np.eye(d) / eps ** 2
    Qh = np.vstack([Q.T, np.ones(N)])
    u = np.full(N, 1.0 / N)
    ridge = 1e-12 * float(np.abs(Q).max()) ** 2
    for _ in range(max_iter):
        V = Qh @ (u[:, None] * Qh.T) + ridge * np.eye(d + 1)
        M = np.einsum("ij,ji->i", Qh.T, np.linalg.solve(V, Qh))
        j = int(np.argmax(M))
        step = (M[j] - d - 1) / ((d + 1) * (M[j] - 1))
        new = (1 - step) * u
        new[j] += step
        done = np.linalg.norm(new - u) < tol
        u = new
        if done:
            break
    c = Q.T @ u
    S = (Q.T * u) @ Q - np.outer(c, c)
    S += ridge * np.eye(d)
    A = np.linalg.inv(S) / d
    # scale up so every point is inside despite the finite tolerance
    r = np.einsum("ij,jk,ik->i", Q - c, A, Q - c).max()
    if r > 1:
        A = A / r
    return c + c0, A


def ellipse_axes(A) -> tuple[np.ndarray, np.ndarray]:
    """Semi-axis lengths and unit axis directions of ``x^T A x <= 1``."""
    w, V = np.linalg.eigh(A)
    return 1.0 / np.sqrt(w), V


@dataclass
class FigureBundle:
    """Everything needed to draw one figure."""

    title: str
    points: np.ndarray
    labels: np.ndarray
    stars: np.ndarray | None = None
    arrows: list = field(default_factory=list)
    boundaries: list = field(default_factory=list)
    triplet: tuple | None = None
    bars: list = field(default_factory=list)
    ellipse: tuple | None = None
    info: dict = field(default_factory=dict)

    def is_empty(self) -> bool:
        return self.points is None or len(self.points) == 0

    def to_dict(self) -> dict:
        out = {
            "title": self.title,
            "points": np.asarray(self.points).tolist(),
            "labels": np.asarray(self.labels).tolist(),
            "stars": None if self.stars is None else np.asarray(self.stars).tolist(),
            "arrows": [[list(map(float, a)), list(map(float, b))] for a, b in self.arrows],
            "boundaries": [{"class": int(c), "polyline": np.asarray(p).tolist()}
                           for c, p in self.boundaries],
            "triplet": None if self.triplet is None else list(self.triplet),
            "bars": self.bars,
            "ellipse": None,
            "info": self.info,
        }
        if self.ellipse is not None:
            c, A = self.ellipse
            out["ellipse"] = {"center": np.asarray(c).tolist(), "A": np.asarray(A).tolist()}
        return out


def boundary_bundle(ps: LabeledPointSet, class_id, angular_samples: int = 360) -> FigureBundle:
    poly = class_boundary(ps, class_id, angular_samples)
    return FigureBundle(f"boundary of class {class_id}", ps.points, ps.labels,
                        boundaries=[(class_id, poly)])


def _discrepancy_pairs(X, Y):
    DX, DY = pairwise_distances(X), pairwise_distances(Y)
    iu = np.triu_indices(X.shape[0], 1)
    gap = np.abs(DX - DY)[iu]
    order = np.argsort(-gap, kind="stable")
    return [(int(iu[0][k]), int(iu[1][k]), float(gap[k])) for k in order]


def toy_figures(preset: str = "toy5", seed: int = 0, cfg: ProjectionConfig | None = None,
                ps: LabeledPointSet | None = None) -> dict:
    """Geometry of the toy illustrations.

    ``toy5`` returns bundles ``setup``, ``haus``, ``iso`` and ``triplet``;
    ``toy20`` returns ``collapse`` with the enclosing ellipse of ``f_star``.
    ``ps`` overrides the generated instance.
    """
    cfg = cfg or ProjectionConfig(seed=seed)
    if preset == "toy5":
        ps = ps if ps is not None else toy_instance(seed)
        return _toy5(ps, cfg)
    if preset == "toy20":
        if ps is None:
            ps = interleaved_instance(20, 2, 2, np.random.default_rng(seed))
        return _toy20(ps, cfg)
    raise InvalidInputError(f"unknown preset {preset!r}")


def _boundaries(ps):
    return [(c, class_boundary(ps, c)) for c in ps.classes]


def _arrows(X, Y):
    return [(X[k], Y[k]) for k in range(X.shape[0]) if np.linalg.norm(X[k] - Y[k]) > 0]


def _toy5(ps, cfg):
    X = ps.points
    haus = project(ps, cfg.replace(objective=Objective.HAUSDORFF_LIKE))
    iso = project(ps, cfg.replace(objective=Objective.ISOMETRIC_ERROR))
    trip = mine(ps, HardNegative()) if has_valid_triplets(ps) else None
    pairs = _discrepancy_pairs(X, iso.f_star.points)
    info = {"d_haus_ub": haus.objective_value, "d_iso_ub": iso.objective_value}
    if trip is not None:
        tset = set(trip.indices)
        top = pairs[0][:2]
        info.update({
            "tl_hnm": max(0.0, trip.signed_loss),
            "top_pair": list(top),
            "top_pair_in_triplet": set(top) <= tset,
            "top_two_pairs_cover_triplet": set(pairs[0][:2]) | set(pairs[1][:2]) == tset,
        })
    tri = None if trip is None else trip.indices
    bars = [{"pair": [k, l], "discrepancy": g} for k, l, g in pairs]
    return {
        "setup": FigureBundle("toy example", X, ps.labels, boundaries=_boundaries(ps), info=info),
        "haus": FigureBundle("Hausdorff-like projection", X, ps.labels,
                             stars=haus.f_star.points, arrows=_arrows(X, haus.f_star.points),
                             boundaries=_boundaries(haus.f_star), info=info),
        "iso": FigureBundle("isometric-error projection", X, ps.labels,
                            stars=iso.f_star.points, bars=bars, info=info),
        "triplet": FigureBundle("hard negative triplet", X, ps.labels, triplet=tri, info=info),
    }


def _toy20(ps, cfg):
    X = ps.points
    haus = project(ps, cfg.replace(objective=Objective.HAUSDORFF_LIKE))
    Y = haus.f_star.points
    ellipse = min_volume_ellipse(Y)
    info = {"d_haus_ub": haus.objective_value,
            "collapse_ratio": collapse_ratio(ps, haus),
            "input_diameter": diameter(ps),
            "input_thickness": thickness(X)}
    return {"collapse": FigureBundle("collapse of the Hausdorff-like projection", X, ps.labels,
                                     stars=Y, arrows=_arrows(X, Y), ellipse=ellipse, info=info)}


def ellipse_contains(ellipse, points, tol: float = 1e-9) -> np.ndarray:
    c, A = ellipse
    D = np.asarray(points, dtype=float) - c
    return np.einsum("ij,jk,ik->i", D, A, D) <= 1.0 + tol


__all__ = [
    "BoundReport", "Check", "CollapseRecord", "FigureBundle",
    "aggregate", "boundary_bundle", "collapse_sweep", "ellipse_axes", "ellipse_contains",
    "interleaved_instance", "min_volume_ellipse", "records_to_csv", "toy_figures",
    "toy_instance", "trend_inversions", "verify_bounds",
]
