"""``vtr`` command line: teach | repeat | eval | perturb (+ scenario export)."""
import argparse
import json
import logging
import math
import sys
from pathlib import Path

from .config import load_config
from .errors import SchemaError, StepBudgetExceeded, UnknownLabel
from .evaluation import (configure_world, load_starts, parse_pose, reports_to_csv, run_batch,
                         run_trial, summarize, teach_run)
from .scenarios import BACKWARD_STARTS, FORWARD_STARTS, RELOCATION_MOVES, lab_world
from .semantic_map import load_map, save_map, unique_landmarks
from .simworld import load_world, perturb_objects, save_world

EXIT_OK = 0
EXIT_SCHEMA = 2
EXIT_TEACH_SPARSE = 3
EXIT_RELOC = 4
EXIT_BUDGET = 5

RELOC_FAILURES = {"BootstrapFailed", "InsufficientLandmarks", "NoValidPair"}


def _clean(obj):
    """NaN -> None so emitted JSON stays standard."""
    if isinstance(obj, float) and math.isnan(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_clean(v) for v in obj]
    return obj


def _load_inputs(args, need_map=False):
    cfg = load_config(args.config)
    world = configure_world(load_world(args.world), cfg)
    teach = load_map(args.map) if need_map else None
    return cfg, world, teach


def cmd_teach(args):
    cfg, world, _ = _load_inputs(args)
    start = parse_pose(args.start) if args.start else None
    try:
        result = teach_run(world, start, args.seed, cfg)
    except StepBudgetExceeded:
        print("teach: step budget exhausted before the last waypoint", file=sys.stderr)
        return EXIT_BUDGET
    smap = result.map
    n_unique = len(unique_landmarks(smap))
    print(f"landmarks: {len(smap.landmarks)} (unique: {n_unique})")
    print(f"keyframes: {len(smap.keyframes)}")
    if n_unique < 3:
        print(f"teach: only {n_unique} unique landmarks mapped, need 3", file=sys.stderr)
        return EXIT_TEACH_SPARSE
    save_map(smap, args.out)
    return EXIT_OK


def cmd_repeat(args):
    cfg, world, teach = _load_inputs(args, need_map=True)
    report, trace = run_trial(world, teach, parse_pose(args.start), args.direction, (args.seed,), cfg)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        trace.to_csv(fh)
    print(json.dumps(_clean(report.to_dict()), indent=1))
    if report.status in RELOC_FAILURES:
        print(f"repeat: {report.status}", file=sys.stderr)
        return EXIT_RELOC
    if report.status == "StepBudgetExceeded":
        print("repeat: step budget exhausted", file=sys.stderr)
        return EXIT_BUDGET
    return EXIT_OK


def cmd_eval(args):
    cfg, world, teach = _load_inputs(args, need_map=True)
    starts = load_starts(args.starts)
    if not starts:
        raise SchemaError("starts", "no start poses")
    reports = run_batch(world, teach, starts, args.direction, args.seed, cfg, args.jobs)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        reports_to_csv(reports, fh)
    summary = summarize(reports)
    summary_path = args.summary or str(Path(args.out).with_suffix(".summary.json"))
    with open(summary_path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=1)
        fh.write("\n")
    print(json.dumps(summary, indent=1))
    return EXIT_OK


def _load_moves(path):
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError("$", f"invalid JSON: {exc}") from exc
    if not isinstance(raw, list):
        raise SchemaError("$", "expected a list of moves")
    moves = []
    for i, item in enumerate(raw):
        try:
            label, pos = (item["label"], item["pos"]) if isinstance(item, dict) else item
            pos = tuple(float(v) for v in pos)
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"[{i}]", "expected {label, pos}") from exc
        if len(pos) != 3:
            raise SchemaError(f"[{i}].pos", "expected [x, y, z]")
        moves.append((str(label), pos))
    return moves


def cmd_perturb(args):
    world = load_world(args.world)
    try:
        out = perturb_objects(world, _load_moves(args.moves))
    except UnknownLabel as exc:
        print(f"perturb: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    save_world(out, args.out)
    return EXIT_OK


def cmd_scenario(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_world(lab_world(seed=args.seed), out / "lab_world.json")
    for name, starts in (("forward_starts.json", FORWARD_STARTS), ("backward_starts.json", BACKWARD_STARTS)):
        (out / name).write_text(json.dumps([list(s) for s in starts], indent=1) + "\n")
    moves = [{"label": label, "pos": list(pos)} for label, pos in RELOCATION_MOVES]
    (out / "relocation_moves.json").write_text(json.dumps(moves, indent=1) + "\n")
    print(f"wrote lab scenario files to {out}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="vtr", description="Semantic-landmark visual teach and repeat")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, need_map=False):
        p.add_argument("--world", required=True, help="world JSON file")
        if need_map:
            p.add_argument("--map", required=True, help="teach map JSON file")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--config", help="JSON overrides for mapping/repeat/bootstrap/camera/noise")

    p = sub.add_parser("teach", help="drive the teach path and save the teach map")
    common(p)
    p.add_argument("--start", help='"x,y,heading_deg" (default: first waypoint facing the second)')
    p.add_argument("--out", required=True, help="output map JSON")
    p.set_defaults(func=cmd_teach)

    p = sub.add_parser("repeat", help="one repeat trial; report JSON on stdout")
    common(p, need_map=True)
    p.add_argument("--start", required=True, help='"x,y,heading_deg"')
    p.add_argument("--direction", default="fwd", choices=["fwd", "bwd", "forward", "backward"])
    p.add_argument("--out", required=True, help="output trace CSV")
    p.set_defaults(func=cmd_repeat)

    p = sub.add_parser("eval", help="batch of repeat trials with summary statistics")
    common(p, need_map=True)
    p.add_argument("--starts", required=True, help="start poses file")
    p.add_argument("--direction", default="fwd", choices=["fwd", "bwd", "forward", "backward"])
    p.add_argument("--out", required=True, help="per-trial CSV")
    p.add_argument("--summary", help="summary JSON (default: <out>.summary.json)")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("perturb", help="move objects in a world file")
    p.add_argument("--world", required=True)
    p.add_argument("--moves", required=True, help='JSON list of {"label": .., "pos": [x, y, z]}')
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("scenario", help="write the built-in lab world and start files")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(func=cmd_scenario)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except SchemaError as exc:
        print(f"{args.command}: schema error at {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except ValueError as exc:
        print(f"{args.command}: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except OSError as exc:
        print(f"{args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
