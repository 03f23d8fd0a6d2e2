#!/usr/bin/env python3
"""Regenerate the reference graph configs under configs/.

Full-scale graphs are used for shape/parameter audits; the /8-width tiny
graphs (at 32x64 input) keep forward-pass tests fast on a laptop CPU.
"""

from __future__ import annotations

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from salengine.models import (  # noqa: E402
    build_s3d_encoder,
    build_slowfast_encoder,
    build_vinet_a,
    build_vinet_s,
)


def main() -> None:
    out_dir = Path(__file__).resolve().parents[1] / "configs"
    out_dir.mkdir(exist_ok=True)
    graphs = {
        "slowfast_r50.json": build_slowfast_encoder(),
        "s3d.json": build_s3d_encoder(),
        "vinet_a.json": build_vinet_a(),
        "vinet_s.json": build_vinet_s(),
        "vinet_a_tiny.json": build_vinet_a(input_hw=(32, 64), width_div=8, name="vinet_a_tiny"),
        "vinet_s_tiny.json": build_vinet_s(input_hw=(32, 64), width_div=8, name="vinet_s_tiny"),
    }
    for fname, graph in graphs.items():
        graph.save(out_dir / fname)
        counts = graph.count_parameters()
        print(f"{fname}: {len(graph.layers)} layers, {counts.total / 1e6:.3f}M params")


if __name__ == "__main__":
    main()
