"""Command-line interface: explore / task / robustness / baseline / score /
parse. Exit code 0 on completed experiments, nonzero on spec or I/O errors.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .awm import AwmError
from .datafiles import pickaxe16_path
from .harness import ExperimentSpec, run_experiment
from .hypotheses import (
    DEFAULT_PROMPT,
    DocumentSyntaxError,
    FetchError,
    build_hypothesized_awm,
    fetch_llm_hypothesis,
    normalize_aliases,
    parse_recipe_dict,
)
from .tech_tree import TreeError, load_tree_file


def _parse_seeds(text: str) -> tuple[int, ...]:
    if "," in text:
        return tuple(int(x) for x in text.split(",") if x.strip() != "")
    return tuple(range(int(text)))


def _parse_rates(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(",") if x.strip() != "")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--tree", default=str(pickaxe16_path()), help="tree definition file")
    parser.add_argument(
        "--hypothesis",
        default="truth",
        help="file:PATH | perturb:INSERT,DELETE | empty | truth",
    )
    parser.add_argument("--seeds", type=_parse_seeds, default=(0,), help="count N or comma list")
    parser.add_argument("--c0", type=int, default=10, help="frontier visit cap before widening")
    parser.add_argument("--max-iterations", type=int, default=400)
    parser.add_argument("--p0", type=float, default=0.2, help="initial collect success probability")
    parser.add_argument("--pmax", type=float, default=0.95, help="asymptotic collect success probability")
    parser.add_argument("--tau", type=float, default=3.0, help="attempts scale of the learning curve")
    parser.add_argument("--retry-cap", type=int, default=10, help="attempts per acquire call")
    parser.add_argument("--workers", type=int, default=1, help="concurrent trials")
    parser.add_argument("--out", default="results", help="output directory")


def _spec_from_args(args, experiment: str, goal: str | None = None) -> ExperimentSpec:
    return ExperimentSpec(
        experiment=experiment,
        tree_path=args.tree,
        hypothesis=args.hypothesis,
        goal=goal,
        seeds=args.seeds,
        c0=args.c0,
        p0=args.p0,
        p_max=args.pmax,
        tau=args.tau,
        retry_cap=args.retry_cap,
        max_iterations=args.max_iterations,
        insert_rates=getattr(args, "insert_rates", ()),
        delete_rates=getattr(args, "delete_rates", ()),
        workers=args.workers,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dreamcraft",
        description="Crafting-tree exploration experiments with hypothesized belief graphs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("explore", help="open-ended exploration curves")
    _add_common(p)

    p = sub.add_parser("task", help="goal-directed run with an empty-hypothesis reference")
    p.add_argument("item", help="goal item")
    _add_common(p)

    p = sub.add_parser("robustness", help="goal runs over a grid of injected edge errors")
    p.add_argument("--goal", default="stone_pickaxe")
    p.add_argument("--insert-rates", type=_parse_rates, default=(0.0, 0.2))
    p.add_argument("--delete-rates", type=_parse_rates, default=(0.0, 0.2))
    _add_common(p)

    p = sub.add_parser("baseline", help="random-explorer discovery curves (no belief graph)")
    _add_common(p)

    p = sub.add_parser("score", help="score a hypothesis against the ground truth")
    _add_common(p)

    p = sub.add_parser("parse", help="recipe-dictionary document to belief-graph JSON")
    p.add_argument("input", nargs="?", default="-", help="document path, or - for stdin")
    p.add_argument("--tree", default=str(pickaxe16_path()), help="tree supplying the node universe")
    p.add_argument("--out", default="-", help="output path for the belief-graph JSON")
    p.add_argument("--from-llm", action="store_true", help="fetch the document from a completion endpoint")
    p.add_argument("--endpoint", help="completion endpoint URL (with --from-llm)")
    return parser


def _cmd_parse(args) -> int:
    tree = load_tree_file(args.tree)
    if args.from_llm:
        if not args.endpoint:
            print("error: --from-llm requires --endpoint", file=sys.stderr)
            return 2
        text = fetch_llm_hypothesis(args.endpoint, DEFAULT_PROMPT, tree.names())
    elif args.input == "-":
        text = sys.stdin.read()
    else:
        text = Path(args.input).read_text(encoding="utf-8")

    result = parse_recipe_dict(text)
    for skip in result.skipped:
        print(f"skipped entry '{skip.key}' (line {skip.line}): {skip.reason}", file=sys.stderr)
    entries = normalize_aliases(result.entries)
    awm = build_hypothesized_awm(entries, set(tree.items))
    payload = awm.to_json()
    if args.out == "-":
        sys.stdout.write(payload)
    else:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(payload, encoding="utf-8")
        print(f"wrote {args.out} ({len(entries)} entries, {len(result.skipped)} skipped)")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "parse":
            return _cmd_parse(args)
        experiment = {"explore": "open_ended"}.get(args.command, args.command)
        goal = None
        if args.command == "task":
            goal = args.item
        elif args.command == "robustness":
            goal = args.goal
        spec = _spec_from_args(args, experiment, goal)
        files = run_experiment(spec, args.out)
        for path in files:
            print(path)
        return 0
    except (TreeError, AwmError, DocumentSyntaxError, FetchError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
