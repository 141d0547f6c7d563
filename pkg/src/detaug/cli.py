"""Command-line surface: augment, preview, search, and policy utilities.

Exit codes: 0 success, 1 runtime errors occurred (some inputs failed), 2
usage or configuration errors.  All randomness flows from --seed, and
outputs carry no wall-clock data unless --timings is passed, so identical
invocations produce identical bytes.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .boxes import AnnotatedImage, BBox
from .dataset import DatasetError, load_dataset, write_augmented
from .policy import (
    Policy,
    PolicyParseError,
    builtin_coco_policy,
    parse_policy,
    search_space_cardinality,
    serialize_policy,
)
from .preview import render_preview
from .raster import decode_image, encode_png
from .search import (
    DEFAULT_SPACE,
    ExternalReward,
    AveragedReward,
    SearchResult,
    evolution_search,
    ppo_search,
    random_search,
    token_match_reward,
)

logger = logging.getLogger(__name__)

_LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


def _configure_logging() -> None:
    name = os.environ.get("AUG_LOG_LEVEL", "warn").lower()
    logging.basicConfig(level=_LOG_LEVELS.get(name, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def _print_summary(pairs: list[tuple[str, object]], pretty: bool) -> None:
    if pretty:
        width = max(len(k) for k, _ in pairs)
        for k, v in pairs:
            print(f"{k.ljust(width)}  {v}")
    else:
        for k, v in pairs:
            print(f"{k}={v}")


def _load_policy_arg(args) -> Policy:
    if args.builtin:
        return builtin_coco_policy()
    text = Path(args.policy).read_text()
    return parse_policy(text)


def _add_policy_source(p: argparse.ArgumentParser) -> None:
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--policy", help="path to a policy JSON file")
    group.add_argument("--builtin", action="store_true", help="use the built-in learned policy")


def cmd_augment(args) -> int:
    try:
        policy = _load_policy_arg(args)
    except (OSError, PolicyParseError) as e:
        print(f"error: policy: {e}", file=sys.stderr)
        return EXIT_USAGE
    try:
        ds = load_dataset(args.annotations, args.image_root)
    except DatasetError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    try:
        result = write_augmented(
            ds,
            policy,
            args.out,
            master_seed=args.seed,
            passes=args.passes,
            workers=args.workers,
            use_jpeg=args.jpeg,
        )
    except (OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    _print_summary(
        [
            ("images_written", result.images_written),
            ("boxes_in", result.boxes_in),
            ("boxes_out", result.boxes_out),
            ("boxes_dropped", result.boxes_in - result.boxes_out),
            ("errors", len(result.errors)),
        ],
        args.pretty,
    )
    for line in result.errors:
        print(f"error: {line}", file=sys.stderr)
    return EXIT_OK if not result.errors else EXIT_RUNTIME


def _parse_box(text: str) -> BBox:
    parts = text.split(",")
    if len(parts) not in (4, 5):
        raise argparse.ArgumentTypeError("box must be x0,y0,x1,y1[,category]")
    try:
        coords = [float(v) for v in parts[:4]]
        category = int(parts[4]) if len(parts) == 5 else 0
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from e
    try:
        return BBox(coords[0], coords[1], coords[2], coords[3], category)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from e


def cmd_preview(args) -> int:
    try:
        policy = _load_policy_arg(args)
    except (OSError, PolicyParseError) as e:
        print(f"error: policy: {e}", file=sys.stderr)
        return EXIT_USAGE
    try:
        image = decode_image(args.image)
    except Exception as e:
        print(f"error: cannot decode {args.image}: {e}", file=sys.stderr)
        return EXIT_USAGE
    boxes = tuple(args.box or ())
    try:
        annotated = AnnotatedImage(image, boxes)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    grid = render_preview(annotated, policy, args.samples, seed=args.seed)
    try:
        encode_png(grid, args.out)
    except OSError as e:
        print(f"error: cannot write {args.out}: {e}", file=sys.stderr)
        return EXIT_USAGE
    _print_summary(
        [
            ("rows", len(policy.sub_policies)),
            ("cols", args.samples),
            ("out", args.out),
        ],
        args.pretty,
    )
    return EXIT_OK


def _run_optimizer(args, reward_fn, rng) -> SearchResult:
    if args.optimizer == "random":
        return random_search(reward_fn, args.budget, rng)
    if args.optimizer == "evolution":
        return evolution_search(reward_fn, args.population, args.sample, args.budget, rng)
    iterations = args.budget // args.batch
    if iterations < 1:
        raise ValueError(f"budget {args.budget} is below one batch of {args.batch}")
    return ppo_search(
        reward_fn,
        iterations,
        args.batch,
        rng,
        clip_eps=args.clip_eps,
        lr=args.lr,
        epochs=args.epochs,
    )


def cmd_search(args) -> int:
    rng = np.random.default_rng(args.seed)
    if args.command is not None:
        try:
            reward_fn = ExternalReward(args.command, timeout=args.timeout)
        except ValueError as e:
            print(f"error: {e}", file=sys.stderr)
            return EXIT_USAGE
    else:
        target = DEFAULT_SPACE.sample(np.random.default_rng(args.synthetic_target_seed))
        reward_fn = token_match_reward(target)
    if args.repeats > 1:
        reward_fn = AveragedReward(reward_fn, args.repeats)
    try:
        result = _run_optimizer(args, reward_fn, rng)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    best_policy = DEFAULT_SPACE.decode(result.best_candidate)
    try:
        Path(args.out_policy).write_text(serialize_policy(best_policy))
        if args.out_log:
            with open(args.out_log, "w") as fh:
                for rec in result.history:
                    row = {
                        "index": rec.index,
                        "tokens": list(rec.tokens),
                        "reward": rec.reward,
                        "best_so_far": rec.best_so_far,
                    }
                    if rec.error is not None:
                        row["error"] = rec.error
                    if args.timings:
                        row["wall_ms"] = rec.wall_ms
                    fh.write(json.dumps(row, separators=(",", ":")) + "\n")
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    eval_errors = sum(1 for rec in result.history if rec.error is not None)
    _print_summary(
        [
            ("optimizer", args.optimizer),
            ("evaluations", len(result.history)),
            ("best_reward", f"{result.best_reward:.6f}"),
            ("eval_errors", eval_errors),
            ("out_policy", args.out_policy),
        ],
        args.pretty,
    )
    return EXIT_OK if eval_errors == 0 else EXIT_RUNTIME


def cmd_policy(args) -> int:
    if args.policy_action == "cardinality":
        value = search_space_cardinality(args.ops, args.L, args.M, args.N, args.K)
        _print_summary([("cardinality", value), ("approx", f"{value:.2e}")], args.pretty)
        return EXIT_OK
    if args.policy_action == "validate":
        try:
            policy = parse_policy(Path(args.file).read_text())
        except (OSError, PolicyParseError) as e:
            print(f"error: {e}", file=sys.stderr)
            return EXIT_USAGE
        _print_summary(
            [("ok", "true"), ("sub_policies", len(policy.sub_policies))], args.pretty
        )
        return EXIT_OK
    # show
    if args.builtin:
        policy = builtin_coco_policy()
    else:
        try:
            policy = parse_policy(Path(args.file).read_text())
        except (OSError, PolicyParseError) as e:
            print(f"error: {e}", file=sys.stderr)
            return EXIT_USAGE
    print(serialize_policy(policy), end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="detaug",
        description="Deterministic box-aware augmentation: apply policies, preview them, search for them.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_aug = sub.add_parser("augment", help="apply a policy to a dataset")
    p_aug.add_argument("--annotations", required=True, help="annotation JSON path")
    p_aug.add_argument("--image-root", required=True, help="directory holding the image files")
    _add_policy_source(p_aug)
    p_aug.add_argument("--out", required=True, help="output directory")
    p_aug.add_argument("--seed", type=int, default=0)
    p_aug.add_argument("--passes", type=int, default=1, help="augmented copies per image")
    p_aug.add_argument("--workers", type=int, default=1)
    p_aug.add_argument("--jpeg", action="store_true", help="write JPEG instead of PNG")
    p_aug.add_argument("--pretty", action="store_true", help="aligned human-readable summary")
    p_aug.set_defaults(func=cmd_augment)

    p_prev = sub.add_parser("preview", help="render a sub-policy x samples contact sheet")
    p_prev.add_argument("--image", required=True, help="input image path")
    _add_policy_source(p_prev)
    p_prev.add_argument("--samples", type=int, default=5, help="columns per sub-policy")
    p_prev.add_argument("--seed", type=int, default=0)
    p_prev.add_argument("--out", required=True, help="output PNG path")
    p_prev.add_argument(
        "--box",
        action="append",
        type=_parse_box,
        help="box as x0,y0,x1,y1[,category]; repeatable",
    )
    p_prev.add_argument("--pretty", action="store_true")
    p_prev.set_defaults(func=cmd_preview)

    p_search = sub.add_parser("search", help="optimize a policy against a reward")
    p_search.add_argument("--optimizer", required=True, choices=("random", "evolution", "ppo"))
    p_search.add_argument("--budget", type=int, required=True, help="total reward evaluations")
    p_search.add_argument("--seed", type=int, default=0)
    p_search.add_argument("--out-policy", required=True, help="where to write the best policy")
    p_search.add_argument("--out-log", help="line-JSON evaluation history")
    reward_group = p_search.add_mutually_exclusive_group(required=True)
    reward_group.add_argument(
        "--synthetic-target-seed",
        type=int,
        help="token-match reward against a hidden target drawn from this seed",
    )
    reward_group.add_argument(
        "--command",
        help="shell template scoring a policy file; must contain {policy}",
    )
    p_search.add_argument("--timeout", type=float, help="per-evaluation command timeout (s)")
    p_search.add_argument("--repeats", type=int, default=1, help="average this many evaluations")
    p_search.add_argument("--population", type=int, default=64, help="evolution population size")
    p_search.add_argument("--sample", type=int, default=16, help="evolution tournament size")
    p_search.add_argument("--batch", type=int, default=64, help="ppo candidates per iteration")
    p_search.add_argument("--clip-eps", type=float, default=0.2, help="ppo clipping width")
    p_search.add_argument("--lr", type=float, default=6.0, help="ppo learning rate")
    p_search.add_argument("--epochs", type=int, default=4, help="ppo ascent steps per batch")
    p_search.add_argument("--timings", action="store_true", help="include wall_ms in the log")
    p_search.add_argument("--pretty", action="store_true")
    p_search.set_defaults(func=cmd_search)

    p_pol = sub.add_parser("policy", help="validate, show, or count policies")
    pol_sub = p_pol.add_subparsers(dest="policy_action", required=True)
    p_val = pol_sub.add_parser("validate", help="parse and check a policy file")
    p_val.add_argument("file")
    p_val.add_argument("--pretty", action="store_true")
    p_val.set_defaults(func=cmd_policy)
    p_show = pol_sub.add_parser("show", help="print a policy in canonical form")
    p_show.add_argument("file", nargs="?")
    p_show.add_argument("--builtin", action="store_true")
    p_show.add_argument("--pretty", action="store_true")
    p_show.set_defaults(func=cmd_policy)
    p_card = pol_sub.add_parser("cardinality", help="count the search space exactly")
    p_card.add_argument("--ops", type=int, default=22)
    p_card.add_argument("--L", type=int, default=6)
    p_card.add_argument("--M", type=int, default=6)
    p_card.add_argument("--N", type=int, default=2)
    p_card.add_argument("--K", type=int, default=5)
    p_card.add_argument("--pretty", action="store_true")
    p_card.set_defaults(func=cmd_policy)
    return parser


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else EXIT_OK
    if args.command == "policy" and args.policy_action == "show":
        if args.file is None and not args.builtin:
            print("error: show needs a policy file or --builtin", file=sys.stderr)
            return EXIT_USAGE
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
