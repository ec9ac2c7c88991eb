"""Command-line surface: reconstruct, simulate, evaluate, compose, serve.

Exit codes for reconstruct: 0 on success, 2 when the solve finished but is
flagged unreliable (mass ratio at a bound, restitution outside [0, 1], or
non-convergence), 1 on hard errors such as schema violations or insufficient
observations. Batch harnesses can therefore count flagged solves separately.
"""
from __future__ import annotations

import argparse
import sys

import numpy as np

from . import composer, evaluate, schemas
from .errors import ImpactLabError, SchemaError
from .simulator import add_noise, make_drop_scene, make_two_body_scene, sample_observations, simulate
from .solver import SolveConfig, reconstruct, reconstruct_single_body


def _cmd_reconstruct(args) -> int:
    try:
        data = schemas.load_json(args.input)
        obs = schemas.annotation_from_dict(data)
    except (OSError, SchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.fps_override is not None:
        obs.fps = args.fps_override
    config = SolveConfig(seed=args.seed)
    try:
        if args.single_body:
            if args.plane is None:
                print("error: --single-body requires --plane px py pz nx ny nz", file=sys.stderr)
                return 1
            point, normal = np.array(args.plane[:3]), np.array(args.plane[3:])
            record = reconstruct_single_body(obs, point, normal, config)
        else:
            record = reconstruct(obs, config)
    except ImpactLabError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    schemas.save_json(schemas.solution_to_dict(record), args.output)
    flags = record.flags
    if record.single_body:
        print(f"restitution c = {record.restitution:.6g}")
    else:
        print(f"mass ratio m_ba = {record.mass_ratio:.6g}")
        print(f"restitution c = {record.restitution:.6g}")
    print(f"collision frame t_c = {record.t_c:g}")
    print(
        "flags: "
        f"mass_at_bound={flags.mass_at_bound} "
        f"restitution_out_of_range={flags.restitution_out_of_range} "
        f"non_converged={flags.non_converged}"
    )
    print(f"solution written to {args.output}")
    return 2 if flags.any else 0


def _cmd_simulate(args) -> int:
    if args.preset == "two-box":
        scene = make_two_body_scene(seed=args.seed, mass_ratio=args.mass_ratio, restitution=args.restitution)
    else:
        scene = make_drop_scene(restitution=args.restitution or 0.75, spin=args.spin)
    gt = simulate(scene)
    try:
        obs = sample_observations(gt, args.interval)
    except ImpactLabError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    if args.noise > 0:
        obs = add_noise(obs, args.noise, seed=args.noise_seed)
    schemas.save_json(schemas.annotation_to_dict(obs), args.output)
    ev = gt.events[0]
    print(f"scene: {args.preset}, collision at frame {ev.t:g}")
    if args.preset == "two-box":
        print(f"true mass ratio {gt.mass_ratio:.6g}, true restitution {gt.restitution:.6g}")
    else:
        print(f"true restitution {gt.restitution:.6g}")
        print(f"plane: point {scene.plane.point.tolist()} normal {scene.plane.normal.tolist()}")
    print(f"annotations written to {args.output}")
    return 0


def _cmd_evaluate(args) -> int:
    intervals = tuple(int(v) for v in args.intervals.split(","))
    noises = tuple(float(v) for v in args.noise.split(","))
    results = evaluate.run_sweep(args.trials, intervals, noises, args.seed)
    doc = evaluate.sweep_document(results)
    if args.output:
        schemas.save_json(doc, args.output)
        print(f"sweep table written to {args.output}")
    header = f"{'interval':>8} {'noise':>6} {'runs':>5} {'mean|max m_err':>16} {'mean|max c_err':>16} {'flagged':>8}"
    print(header)
    for row in evaluate.summarize(results):
        print(
            f"{row.interval:>8d} {row.noise:>6.2f} {row.runs:>5d} "
            f"{row.mean_mass_rel_error:>7.4f}|{row.max_mass_rel_error:<8.4f} "
            f"{row.mean_restitution_abs_error:>7.4f}|{row.max_restitution_abs_error:<8.4f} "
            f"{row.flagged_rate:>8.2f}"
        )
    return 0


def _cmd_compose(args) -> int:
    pairs = []
    try:
        for spec_path in args.solutions:
            record = schemas.solution_from_dict(schemas.load_json(spec_path))
            pairs.append(composer.place_pair(record))
    except (OSError, SchemaError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    comp = composer.SceneComposition(pairs=pairs, duration=args.duration)
    if args.auto_time is not None:
        early, late = args.auto_time
        result = composer.auto_time(comp.pairs[early], comp.pairs[late])
        comp.pairs[late].time_offset += result.offset
        print(f"auto-time: offset {result.offset:+.3f} frames, approach {result.distance:.4g} m"
              + ("" if result.within_contact else " (no coincidence reached)"))
    if args.predict or args.keyframes:
        comp = composer.predict_secondary(comp)
        print(f"predicted {len(comp.predicted_events)} secondary event(s)")
        for w in comp.warnings:
            print(f"warning: {w}")
        if args.keyframes:
            schemas.save_json(composer.export_keyframes(comp), args.keyframes)
            print(f"keyframes written to {args.keyframes}")
    schemas.save_json(schemas.scene_to_dict(comp), args.output)
    print(f"scene written to {args.output}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    comp = composer.SceneComposition(pairs=[])
    if args.scene:
        comp = schemas.scene_from_dict(schemas.load_json(args.scene))
    app = create_app(comp)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="impactlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("reconstruct", help="fit a collision to an annotation file")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fps-override", type=float, default=None)
    p.add_argument("--single-body", action="store_true")
    p.add_argument("--plane", type=float, nargs=6, metavar=("PX", "PY", "PZ", "NX", "NY", "NZ"))
    p.set_defaults(func=_cmd_reconstruct)

    p = sub.add_parser("simulate", help="generate synthetic annotations")
    p.add_argument("--preset", choices=("two-box", "drop"), default="two-box")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mass-ratio", type=float, default=None)
    p.add_argument("--restitution", type=float, default=None)
    p.add_argument("--spin", type=float, default=0.0)
    p.add_argument("--interval", type=int, default=10)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--noise-seed", type=int, default=0)
    p.add_argument("--output", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("evaluate", help="recovery-error sweep on synthetic scenes")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--intervals", default="5,10,19")
    p.add_argument("--noise", default="0,0.05")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", default=None)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("compose", help="build an authored scene from solutions")
    p.add_argument("--solutions", nargs="+", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--duration", type=int, default=None)
    p.add_argument("--auto-time", type=int, nargs=2, metavar=("EARLY", "LATE"), default=None)
    p.add_argument("--predict", action="store_true")
    p.add_argument("--keyframes", default=None)
    p.set_defaults(func=_cmd_compose)

    p = sub.add_parser("serve", help="local HTTP service backing the authoring UI")
    p.add_argument("--port", type=int, default=8321)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--scene", default=None)
    p.set_defaults(func=_cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
