#!/usr/bin/env python3
"""Throughput experiment: run the batch-1 and batch-8 protocols on a
graph config with seeded random weights and print both reports.

Usage:
    python3 scripts/run_benchmark.py [configs/vinet_a_tiny.json] [--iters N]
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from salengine.graph import GraphConfig  # noqa: E402
from salengine.pipeline import bench  # noqa: E402
from salengine.weights import bind, random_init  # noqa: E402


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "config",
        nargs="?",
        default=str(Path(__file__).resolve().parents[1] / "configs" / "vinet_a_tiny.json"),
    )
    parser.add_argument("--iters", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    graph = GraphConfig.load(args.config)
    model = bind(graph, random_init(graph, seed=args.seed))
    print(f"model: {graph.name}, input {list(graph.input_shape)}")
    for batch in (1, 8):
        report = bench(model, batch=batch, iters=args.iters)
        print(json.dumps(report.as_dict(), indent=2))


if __name__ == "__main__":
    main()
