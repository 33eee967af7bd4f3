"""Command-line entry point: ``expressive-attempt {solve,grid,render,compare,check}``."""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys

import numpy as np

from .costs import COST_KINDS, CostSpec, DistanceMetric
from .estimator import DEFAULT_ALPHAS, DEFAULT_LAMBDAS, grid_search
from .exceptions import AttemptError, InfeasibleAttemptError, PlanFileError
from .export import export_csv, export_structured, load_plan
from .kinematics import joint_positions
from .motion import compose_baseline, compose_expressive
from .optimizer import solve_attempt
from .render import render_contact_sheet, render_svg
from .taskfile import load_task

METRICS = ("l2", "dot", "proj")


def _float_list(text):
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("list must not be empty")
    return values


def _override_spec(spec, args):
    metric = DistanceMetric(args.metric or spec.metric.kind, spec.metric.k if args.k is None else args.k)
    kind = args.cost or spec.cost_kind
    # body points are per-cost; keep the file's choice only when the cost is unchanged
    body = spec.body_points if kind == spec.cost_kind else None
    lam = spec.lam if args.lam is None else args.lam
    alpha = spec.alpha if args.alpha is None else args.alpha
    return CostSpec(kind, metric, body, lam, alpha)


def settings_echo(spec, options, timing):
    return {"cost": spec.to_dict(), "solve": options.to_dict(), "timing": timing.to_dict()}


def build_plan(bundle, spec, baseline=False, result=None):
    """Solve ``bundle.task`` under ``spec`` (unless ``result`` is given) and compose the timed plan."""
    if result is None:
        result = solve_attempt(bundle.chain, bundle.task, spec, bundle.options)
    if not result.converged:
        raise InfeasibleAttemptError(f"no feasible attempt found (best residual {result.constraint_residual:.3g}, "
                                     f"clearance {result.min_clearance:.3g})")
    compose = compose_baseline if baseline else compose_expressive
    plan = compose(bundle.chain, bundle.task, result, bundle.timing)
    plan = plan.with_metadata(
        settings=settings_echo(spec, bundle.options, bundle.timing),
        objective=float(result.objective),
        constraint_residual=float(result.constraint_residual),
    )
    return plan, result


def _write(path, text):
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def cmd_solve(args):
    bundle = load_task(args.taskfile)
    spec = _override_spec(bundle.spec, args)
    plan, result = build_plan(bundle, spec, args.baseline)
    out = args.out or f"{bundle.task.name}{'-baseline' if args.baseline else ''}.plan.json"
    if out.endswith(".csv"):
        _write(out, export_csv(plan, bundle.chain))
    else:
        _write(out, export_structured(plan, bundle.chain, bundle.task))
    print(f"objective {result.objective:.9g}")
    print(f"constraint_residual {result.constraint_residual:.3e}")
    print(f"min_clearance {result.min_clearance:.6g}")
    print(f"seed {result.seed_index}")
    print(f"wrote {out}")
    return 0


def cmd_grid(args):
    bundle = load_task(args.taskfile)
    spec = _override_spec(bundle.spec, args)
    best, _, rows = grid_search(bundle.chain, bundle.task, spec.cost_kind, spec.metric.kind, spec.metric.k,
                                args.lambdas, args.alphas, bundle.options, spec.body_points)
    columns = ["rank", "lam", "alpha", "objective", "similarity", "constraint_residual",
               "min_clearance", "seed_index", "converged"]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format(row[c], ".9g") if isinstance(row[c], float) else row[c] for c in columns])
    _write(args.out, buf.getvalue())
    print(f"best lambda {best['lam']:g} alpha {best['alpha']:g}")
    print(f"wrote {args.out}")
    return 0


def cmd_render(args):
    try:
        with open(args.planfile, encoding="utf-8") as fh:
            plan, chain, task = load_plan(fh.read())
    except (OSError, ValueError, KeyError) as err:
        raise PlanFileError(f"cannot load plan {args.planfile}: {err}") from None
    frames = render_svg(plan, chain, frame_stride=args.stride, task=task)
    for i, svg in enumerate(frames):
        _write(os.path.join(args.out, f"frame_{i:04d}.svg"), svg)
    print(f"wrote {len(frames)} frames to {args.out}")
    return 0


def cmd_compare(args):
    bundle = load_task(args.taskfile)
    items = []
    for kind in COST_KINDS:
        for metric in METRICS:
            k = bundle.spec.metric.k if metric == "proj" else 3
            spec = CostSpec(kind, DistanceMetric(metric, k), None, bundle.spec.lam, bundle.spec.alpha)
            plan, result = build_plan(bundle, spec)
            name = f"{kind}_{metric}"
            _write(os.path.join(args.out, f"{name}.plan.json"), export_structured(plan, bundle.chain, bundle.task))
            items.append((f"{kind} / {metric}", result.trajectory))
            print(f"{name}: objective {result.objective:.6g} residual {result.constraint_residual:.2e}")
    _write(os.path.join(args.out, "contact_sheet.svg"), render_contact_sheet(items, bundle.chain, bundle.task))
    print(f"wrote 9 plans and contact_sheet.svg to {args.out}")
    return 0


def plan_checks(bundle, spec):
    """``(name, passed)`` pairs for the invariants of a solved plan."""
    chain, task, options, timing = bundle.chain, bundle.task, bundle.options, bundle.timing
    plan, result = build_plan(bundle, spec)
    base, _ = build_plan(bundle, spec, baseline=True, result=result)
    xi = result.trajectory
    ee = joint_positions(chain, xi)[0][:, -1, :]
    phases = plan.phases
    attempts = [p for p in phases if p.label == "attempt"]
    rewinds = [p for p in phases if p.label == "rewind"]
    n = timing.repetitions
    checks = [
        ("converged", bool(result.converged)),
        ("ee residual within tolerance",
         float(np.max(np.linalg.norm(ee - task.x_f.position, axis=1))) <= options.constraint_tolerance),
        ("clearance at or above margin", result.min_clearance >= options.collision_margin - 1e-6),
        ("plan structure approach + N x (attempt, rewind)",
         plan.labels() == ["approach"] + ["attempt", "rewind"] * n),
        ("rewinds reverse attempts exactly",
         all(np.array_equal(r.waypoints, a.waypoints[::-1]) for a, r in zip(attempts, rewinds))),
        ("phase endpoints chain",
         all(np.array_equal(a.waypoints[-1], b.waypoints[0]) for a, b in zip(phases, phases[1:]))),
        ("attempt phase shorter than rewind phase", all(a.duration < r.duration for a, r in zip(attempts, rewinds))),
        ("baseline shares approach, N and speeds",
         np.array_equal(base.phases[0].waypoints, phases[0].waypoints)
         and sum(p.label == "attempt" for p in base.phases) == n
         and {p.step_duration for p in base.phases[1:]} == {p.step_duration for p in phases[1:]}),
        ("export is deterministic",
         export_structured(plan, chain, task) == export_structured(plan, chain, task)
         and export_csv(plan, chain) == export_csv(plan, chain)),
    ]
    loaded, _, _ = load_plan(export_structured(plan, chain, task))
    checks.append(("structured export round-trips",
                   all(np.max(np.abs(a.waypoints - b.waypoints)) <= 1e-9 for a, b in zip(loaded.phases, phases))))
    return checks


def cmd_check(args):
    bundle = load_task(args.taskfile)
    spec = _override_spec(bundle.spec, args)
    failed = 0
    for name, ok in plan_checks(bundle, spec):
        print(f"{'PASS' if ok else 'FAIL'} {name}")
        failed += not ok
    return 1 if failed else 0


def _spec_flags(p):
    p.add_argument("--cost", choices=COST_KINDS)
    p.add_argument("--metric", choices=METRICS)
    p.add_argument("-k", type=int)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--alpha", type=float)


def build_parser():
    parser = argparse.ArgumentParser(prog="expressive-attempt", description="Expressive attempt motions for tasks a robot cannot complete.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one task and write its plan")
    p.add_argument("taskfile")
    _spec_flags(p)
    p.add_argument("--out", help="output path; .csv writes sampled rows, anything else the structured plan")
    p.add_argument("--baseline", action="store_true", help="write the repeated-failure baseline instead")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("grid", help="grid-search lambda and alpha")
    p.add_argument("taskfile")
    _spec_flags(p)
    p.add_argument("--lambdas", type=_float_list, default=list(DEFAULT_LAMBDAS))
    p.add_argument("--alphas", type=_float_list, default=list(DEFAULT_ALPHAS))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("render", help="render a structured plan to SVG frames")
    p.add_argument("planfile")
    p.add_argument("--out", required=True)
    p.add_argument("--stride", type=int, default=5)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("compare", help="solve all cost x metric pairs and draw a contact sheet")
    p.add_argument("taskfile")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("check", help="solve and verify plan invariants")
    p.add_argument("taskfile")
    _spec_flags(p)
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except AttemptError as err:
        print(f"{err.code}: {err}".replace("\n", " "), file=sys.stderr)
    except (ValueError, TypeError) as err:
        print(f"invalid-argument: {err}".replace("\n", " "), file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
