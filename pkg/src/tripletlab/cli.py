"""Command-line entry point: ``tripletlab <subcommand> [options]``.

Every option can also be supplied through ``--config FILE``, a flat
``key = value`` text file (``#`` starts a comment). Precedence is command
line, then config file, then built-in default. Documents go to ``--out``
when given (the one-line summary is then printed on stdout), otherwise the
document is written to stdout and the summary to stderr.

Exit codes: 0 success, 1 invalid input, 2 solver divergence, 3 failed
feasibility certificate or violated rigorous bound. Errors are reported on
stderr as ``error_code: <code>: <message>``.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import experiments, geometry
from .geometry import InvalidInputError
from .isometry import EmbeddingPair, align_isometry, d_iso, estimate_cn
from .projection import (
    FeasibilityError,
    Objective,
    ProjectionConfig,
    ProjectionDivergedError,
    project,
)
from .svg import emit_svg
from .triplet import (
    BatchHard,
    HardNegative,
    RandomTriplet,
    SemiHard,
    class_boundary,
    has_valid_triplets,
    hnm_loss,
    is_triplet_separated,
    mine,
    separation_margin,
)

EXIT_OK, EXIT_INVALID, EXIT_DIVERGED, EXIT_INVARIANT = 0, 1, 2, 3
SEED_MAX = 2 ** 64 - 1


def _seed(text) -> int:
    v = int(text)
    if not 0 <= v <= SEED_MAX:
        raise ValueError("seed must be a 64-bit unsigned integer")
    return v


def _floats(text) -> tuple:
    return tuple(float(t) for t in str(text).split(",") if t.strip())


def _ints(text) -> tuple:
    return tuple(int(t) for t in str(text).split(",") if t.strip())


def _objective(text) -> Objective:
    return Objective(str(text))


def _pos_int(text) -> int:
    v = int(text)
    if v < 1:
        raise ValueError("must be a positive integer")
    return v


_CFG = ProjectionConfig()

# name -> (converter, default, help)
OPTIONS = {
    "seed": (_seed, 0, "root seed (64-bit unsigned)"),
    "objective": (_objective, Objective.ISOMETRIC_ERROR, "projection objective: haus, sup or iso"),
    "restarts": (_pos_int, _CFG.restarts, "number of solver restarts"),
    "iters": (_pos_int, _CFG.max_iterations, "iterations per restart"),
    "step": (float, _CFG.initial_step_size, "initial step size (units of diameter)"),
    "temperatures": (_floats, _CFG.smoothing_temperature_schedule,
                     "comma-separated decreasing smoothing temperatures"),
    "penalties": (_floats, _CFG.penalty_weight_schedule,
                  "comma-separated increasing penalty weights"),
    "convergence_tolerance": (float, _CFG.convergence_tolerance,
                              "stop a stage when the step norm falls below this"),
    "momentum": (float, _CFG.momentum, "heavy-ball momentum in [0, 1)"),
    "step_decay": (float, _CFG.step_decay, "multiplicative step decay per iteration"),
    "perturbation_scale": (float, _CFG.perturbation_scale,
                           "scale of random restart perturbations"),
    "margin": (float, 0.0, "triplet loss margin"),
    "batch_size": (_pos_int, None, "batch size for batch-hard mining (default: all points)"),
    "resolution": (_pos_int, 360, "angular resolution of the thickness search"),
    "class_id": (int, None, "class whose boundary is traced (default: smallest label)"),
    "samples": (_pos_int, 360, "angular samples of the boundary polyline"),
    "svg": (str, None, "also write an SVG drawing to this path"),
    "bound_tolerance": (float, 0.05, "relative slack of the soft bound checks"),
    "dimension": (_pos_int, 2, "ambient dimension"),
    "trials": (_pos_int, None, "number of trials"),
    "q": (float, 0.5, "thickness floor of the sampled sets"),
    "epsilons": (_floats, (1e-3, 1e-2, 1e-1), "comma-separated perturbation sizes"),
    "N_values": (_ints, (6, 10, 20, 40), "comma-separated point counts"),
    "n_values": (_ints, (2,), "comma-separated dimensions"),
    "classes": (_pos_int, 2, "number of classes"),
    "threshold": (float, 0.1, "collapse threshold on the diameter ratio"),
    "preset": (str, "toy5", "figure preset: toy5 or toy20"),
    "panel": (str, None, "bundle to draw (toy5: setup, haus, iso, triplet; toy20: collapse)"),
}

PROJECTION_KEYS = ["seed", "restarts", "iters", "step", "temperatures", "penalties",
                   "convergence_tolerance", "momentum", "step_decay", "perturbation_scale"]


def read_config(path) -> dict:
    """Parse a flat ``key = value`` file; unknown keys are rejected."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InvalidInputError(f"cannot read config {path}: {exc.strerror}") from exc
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidInputError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in OPTIONS:
            raise InvalidInputError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = value
    return values


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InvalidInputError(message)


def _add(p, *names):
    for name in names:
        conv, default, text = OPTIONS[name]
        shown = default.value if isinstance(default, Objective) else default
        if isinstance(shown, tuple):
            shown = ",".join(str(v) for v in shown)
        p.add_argument("--" + name.replace("_", "-"), dest=name, default=None,
                       type=str, help=f"{text} (default: {shown})")


SUBCOMMANDS = {
    "loss": (["input"], ["seed", "margin", "batch_size"],
             "triplet losses and the mined triplet of every strategy"),
    "separated": (["input"], [], "Triplet-Separated predicate and separation margin"),
    "thickness": (["input"], ["seed", "resolution"], "thickness and diameter of the point set"),
    "boundary": (["input"], ["class_id", "samples", "svg"],
                 "boundary of the region forbidden to other classes (2D)"),
    "d-iso": (["first", "second"], [], "isometric error between two embeddings"),
    "align": (["first", "second"], [], "least-squares rigid alignment of two embeddings"),
    "project": (["input"], ["objective"] + PROJECTION_KEYS,
                "nearest Triplet-Separated configuration"),
    "verify-bounds": (["input"], PROJECTION_KEYS + ["bound_tolerance"],
                      "check the bounds between triplet loss and distances to separation"),
    "estimate-cn": ([], ["seed", "dimension", "trials", "q", "epsilons"],
                    "empirical constant of the isometric approximation property"),
    "collapse-sweep": ([], PROJECTION_KEYS + ["N_values", "n_values", "classes", "trials",
                                              "threshold"],
                       "collapse ratio of the Hausdorff-like projection over (N, n)"),
    "figure": ([], ["preset", "panel", "seed", "restarts", "iters"],
               "SVG figure of a toy instance plus a JSON sidecar"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tripletlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (positional, keys, text) in SUBCOMMANDS.items():
        p = sub.add_parser(name, help=text, description=text)
        for pos in positional:
            p.add_argument(pos, help="point set JSON file")
        if name == "figure":
            p.add_argument("--input", default=None, help="use this point set instead of the preset")
        _add(p, *keys)
        p.add_argument("--config", default=None, help="flat key = value config file")
        p.add_argument("--out", default=None, help="output path (default: stdout)")
    return parser


def resolve(args, keys) -> dict:
    """Merge command line, config file and defaults for ``keys``."""
    config = read_config(args.config) if args.config else {}
    out = {}
    for key in keys:
        conv, default, _ = OPTIONS[key]
        raw = getattr(args, key, None)
        source = "--" + key.replace("_", "-")
        if raw is None and key in config:
            raw, source = config[key], f"config key {key!r}"
        if raw is None:
            out[key] = default
            continue
        try:
            out[key] = conv(raw)
        except ValueError as exc:
            raise InvalidInputError(f"{source}: invalid value {raw!r} ({exc})") from exc
    return out


def projection_config(opts, objective=None) -> ProjectionConfig:
    return ProjectionConfig(
        objective=objective or opts.get("objective", Objective.ISOMETRIC_ERROR),
        restarts=opts["restarts"], max_iterations=opts["iters"],
        initial_step_size=opts["step"],
        smoothing_temperature_schedule=opts["temperatures"],
        penalty_weight_schedule=opts["penalties"], seed=opts["seed"],
        convergence_tolerance=opts["convergence_tolerance"], momentum=opts["momentum"],
        step_decay=opts["step_decay"], perturbation_scale=opts["perturbation_scale"])


def to_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _fnum(v) -> str:
    return "none" if v is None else f"{v:.6g}"


# ------------------------------------------------------------ handlers

def _triplet_entry(ps, strategy, margin):
    try:
        t = mine(ps, strategy, margin)
    except InvalidInputError:
        return None
    return {"triplet": list(t.indices), "signed_loss": t.signed_loss,
            "loss": max(0.0, t.signed_loss + margin)}


def cmd_loss(args, o):
    ps = geometry.load(args.input)
    if o["margin"] < 0:
        raise InvalidInputError("margin must be nonnegative")
    valid = has_valid_triplets(ps)
    batch = o["batch_size"] or len(ps)
    strategies = {
        "hard_negative": HardNegative(),
        "semi_hard": SemiHard(),
        "batch_hard": BatchHard(batch, o["seed"]),
        "random": RandomTriplet(o["seed"]),
    }
    doc = {
        "margin": o["margin"],
        "hnm_loss": hnm_loss(ps) if valid else None,
        "separation_margin": separation_margin(ps) if valid else None,
        "strategies": {k: (_triplet_entry(ps, s, o["margin"]) if valid else None)
                       for k, s in strategies.items()},
    }
    hard = doc["strategies"]["hard_negative"]
    trip = "none" if hard is None else ",".join(map(str, hard["triplet"]))
    return to_json(doc), f"hnm_loss={_fnum(doc['hnm_loss'])} triplet={trip}"


def cmd_separated(args, o):
    ps = geometry.load(args.input)
    sep = is_triplet_separated(ps)
    margin = separation_margin(ps) if has_valid_triplets(ps) else None
    doc = {"separated": sep, "margin": margin}
    return to_json(doc), f"separated={str(sep).lower()} margin={_fnum(margin)}"


def cmd_thickness(args, o):
    ps = geometry.load(args.input)
    th = geometry.thickness(ps.points, o["resolution"], o["seed"])
    diam = geometry.diameter(ps)
    doc = {"thickness": th, "diameter": diam, "ratio": th / diam if diam > 0 else None}
    return to_json(doc), f"thickness={_fnum(th)} diameter={_fnum(diam)}"


def cmd_boundary(args, o):
    ps = geometry.load(args.input)
    cid = o["class_id"] if o["class_id"] is not None else int(ps.classes[0])
    if cid not in set(ps.classes.tolist()):
        raise InvalidInputError(f"class {cid} not present")
    poly = class_boundary(ps, cid, o["samples"])
    if o["svg"]:
        Path(o["svg"]).write_text(emit_svg(experiments.boundary_bundle(ps, cid, o["samples"])))
    doc = {"class": cid, "samples": o["samples"], "polyline": poly.tolist()}
    return to_json(doc), f"class={cid} vertices={poly.shape[0]}"


def _pair(args):
    return EmbeddingPair(geometry.load(args.first), geometry.load(args.second))


def cmd_d_iso(args, o):
    v = d_iso(_pair(args))
    return to_json({"d_iso": v}), f"d_iso={_fnum(v)}"


def cmd_align(args, o):
    U, residual = align_isometry(_pair(args))
    doc = {"Q": U.Q.tolist(), "t": U.t.tolist(), "determinant": U.determinant,
           "residual": residual}
    return to_json(doc), f"residual={_fnum(residual)} determinant={U.determinant:+.0f}"


def cmd_project(args, o):
    ps = geometry.load(args.input)
    res = project(ps, projection_config(o))
    summary = (f"objective={res.objective.value} value={_fnum(res.objective_value)} "
               f"feasible={str(res.feasible).lower()} best_restart={res.best_restart_index}")
    return to_json(res.to_dict()), summary


def cmd_verify_bounds(args, o):
    ps = geometry.load(args.input)
    report = experiments.verify_bounds(ps, projection_config(o), o["bound_tolerance"])
    parts = [f"{c.name}={'pass' if c.passed else 'fail'}" for c in report.checks
             if c.name in ("R1", "R2", "S1", "S2")]
    summary = " ".join(parts) + f" c_emp={_fnum(report.c_emp)}"
    status = EXIT_OK if report.rigorous_passed else EXIT_INVARIANT
    return to_json(report.to_dict()), summary, status


def cmd_estimate_cn(args, o):
    est = estimate_cn(o["dimension"], trials=o["trials"] or 30, epsilon_grid=o["epsilons"],
                      q=o["q"], seed=o["seed"])
    return to_json(est.to_dict()), f"n={est.dimension} q={est.q} c_hat={_fnum(est.c_hat)}"


def cmd_collapse_sweep(args, o):
    records, table = experiments.collapse_sweep(
        o["N_values"], o["n_values"], num_classes=o["classes"], trials=o["trials"] or 20,
        cfg=projection_config(o, Objective.HAUSDORFF_LIKE), threshold=o["threshold"],
        seed=o["seed"])
    means = " ".join(f"N{N}n{n}={v['mean_ratio']:.3f}" for (N, n), v in table.items())
    return experiments.records_to_csv(records), f"records={len(records)} {means}"


def cmd_figure(args, o):
    preset = o["preset"]
    defaults = {"toy5": "haus", "toy20": "collapse"}
    if preset not in defaults:
        raise InvalidInputError(f"unknown preset {preset!r}")
    panel = o["panel"] or defaults[preset]
    cfg = ProjectionConfig(seed=o["seed"], restarts=o["restarts"], max_iterations=o["iters"])
    ps = geometry.load(args.input) if args.input else None
    bundles = experiments.toy_figures(preset, o["seed"], cfg, ps)
    if panel not in bundles:
        raise InvalidInputError(f"panel {panel!r} not in {sorted(bundles)}")
    svg = emit_svg(bundles[panel])
    sidecar = to_json({"preset": preset, "panel": panel, "seed": o["seed"],
                       "bundles": {k: b.to_dict() for k, b in bundles.items()}})
    out = Path(args.out or f"{preset}_{panel}.svg")
    out.write_text(svg)
    side = out.with_suffix(".json")
    side.write_text(sidecar)
    b = bundles[panel]
    summary = (f"figure={out} sidecar={side} points={len(b.points)} "
               f"boundaries={len(b.boundaries)} arrows={len(b.arrows)}")
    return None, summary


HANDLERS = {
    "loss": cmd_loss, "separated": cmd_separated, "thickness": cmd_thickness,
    "boundary": cmd_boundary, "d-iso": cmd_d_iso, "align": cmd_align,
    "project": cmd_project, "verify-bounds": cmd_verify_bounds,
    "estimate-cn": cmd_estimate_cn, "collapse-sweep": cmd_collapse_sweep,
    "figure": cmd_figure,
}


def _fail(code, name, message) -> int:
    print(f"error_code: {name}: {message}", file=sys.stderr)
    return code


def run(argv=None) -> int:
    """Execute one subcommand and return the process exit code."""
    try:
        args = build_parser().parse_args(argv)
        opts = resolve(args, SUBCOMMANDS[args.command][1])
        outcome = HANDLERS[args.command](args, opts)
        document, summary = outcome[0], outcome[1]
        status = outcome[2] if len(outcome) > 2 else EXIT_OK
        if document is not None and args.command != "figure":
            if args.out:
                Path(args.out).write_text(document)
                print(summary)
            else:
                sys.stdout.write(document)
                print(summary, file=sys.stderr)
        else:
            print(summary)
        if status == EXIT_INVARIANT:
            return _fail(status, "invariant_violation", "a rigorous bound check failed")
        return status
    except ProjectionDivergedError as exc:
        return _fail(EXIT_DIVERGED, "solver_diverged", exc)
    except FeasibilityError as exc:
        return _fail(EXIT_INVARIANT, "feasibility_failed", exc)
    except InvalidInputError as exc:
        return _fail(EXIT_INVALID, "invalid_input", exc)
    except OSError as exc:
        return _fail(EXIT_INVALID, "invalid_input", f"{exc.filename}: {exc.strerror}")
    except SystemExit as exc:  # --help
        return int(exc.code or 0)


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
