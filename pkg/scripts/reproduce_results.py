#!/usr/bin/env python3
"""Run the four headline experiments at desk scale and print a summary.

Writes CSVs and manifests under the output directory (one subdirectory per
experiment) and ends with a comparison table: exploration speed with and
without guidance, task-step ratios, robustness under injected errors, and the
random-explorer baseline.
"""
import argparse
import statistics
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from dreamcraft.datafiles import llm_fixture_path, pickaxe16_path
from dreamcraft.harness import ExperimentSpec, run_experiment


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="results", help="output root directory")
    parser.add_argument("--seeds", type=int, default=10, help="seeds per configuration")
    parser.add_argument("--tree", default=str(pickaxe16_path()))
    parser.add_argument("--workers", type=int, default=4)
    args = parser.parse_args()

    seeds = tuple(range(args.seeds))
    out = Path(args.out)
    base = dict(tree_path=args.tree, seeds=seeds, workers=args.workers)

    print("== open-ended exploration (parsed-document / unguided / exact graph) ==")
    sources = [
        ("guided", f"file:{llm_fixture_path()}"),
        ("unguided", "empty"),
        ("exact", "truth"),
    ]
    for label, source in sources:
        spec = ExperimentSpec(
            experiment="open_ended", hypothesis=source, max_iterations=900, **base
        )
        run_experiment(spec, out / f"open_ended_{label}")
        finals = []
        for seed in seeds:
            rows = (out / f"open_ended_{label}" / f"curves_seed{seed}.csv").read_text().splitlines()[1:]
            finals.append(int(rows[-1].split(",")[0]))
        print(f"  {label:9s} mean iterations to full verification: {statistics.mean(finals):8.1f}")

    print("== goal task: stone_pickaxe (guided vs empty reference) ==")
    spec = ExperimentSpec(
        experiment="task", hypothesis="truth", goal="stone_pickaxe", max_iterations=900, **base
    )
    run_experiment(spec, out / "task_stone_pickaxe")
    for line in (out / "task_stone_pickaxe" / "task_summary.csv").read_text().splitlines():
        print("  " + line)

    print("== robustness grid (insert x delete) to stone_pickaxe ==")
    spec = ExperimentSpec(
        experiment="robustness",
        hypothesis="truth",
        goal="stone_pickaxe",
        insert_rates=(0.0, 0.1, 0.2),
        delete_rates=(0.0, 0.1, 0.2),
        max_iterations=900,
        **base,
    )
    run_experiment(spec, out / "robustness")
    for line in (out / "robustness" / "robustness_summary.csv").read_text().splitlines():
        print("  " + line)

    print("== random-explorer baseline ==")
    spec = ExperimentSpec(experiment="baseline", hypothesis="empty", max_iterations=900, **base)
    run_experiment(spec, out / "baseline")
    for line in (out / "baseline" / "baseline_summary.csv").read_text().splitlines():
        print("  " + line)

    print(f"\nall outputs under {out}/")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
