#!/usr/bin/env python3
"""End-to-end demo on synthetic data: renders a clip with a moving
bright blob, predicts saliency with seeded random weights for both model
variants plus their ensemble, and scores the ensemble against a
synthetic ground truth via the CLI.

Everything lands under --workdir (default: ./demo_run).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from salengine.cli import main as cli  # noqa: E402
from salengine.graph import GraphConfig  # noqa: E402
from salengine.imageio import write_pgm, write_ppm  # noqa: E402
from salengine.weights import random_init, write_container  # noqa: E402

REPO = Path(__file__).resolve().parents[1]


def render_clip(work: Path, n_frames: int, h: int, w: int):
    rng = np.random.default_rng(0)
    frames_dir = work / "frames"
    gt_dir = work / "gt"
    frames_dir.mkdir(parents=True, exist_ok=True)
    gt_dir.mkdir(parents=True, exist_ok=True)
    ys, xs = np.mgrid[0:h, 0:w]
    frame_files, map_files, fix_files = [], [], []
    for i in range(n_frames):
        cy = h * (0.3 + 0.4 * np.sin(i / 5.0)) / 1.0
        cx = w * (i + 1) / (n_frames + 1)
        blob = np.exp(-(((ys - cy) ** 2) + ((xs - cx) ** 2)) / (2 * (h / 6) ** 2))
        rgb = np.stack([blob, 0.5 * blob, 1 - blob]) * 0.8 + 0.1 * rng.random((3, h, w))
        fp = frames_dir / f"f{i:03d}.ppm"
        write_ppm(fp, np.clip(rgb, 0, 1))
        mp = gt_dir / f"f{i:03d}_map.pgm"
        write_pgm(mp, blob / blob.max())
        fx = gt_dir / f"f{i:03d}_fix.pgm"
        fix = np.zeros((h, w))
        fix[int(cy) % h, int(cx) % w] = 1.0
        write_pgm(fx, fix)
        frame_files.append(fp)
        map_files.append(mp)
        fix_files.append(fx)
    manifest = work / "clip.json"
    manifest.write_text(
        json.dumps(
            {
                "video": "demo",
                "frames": [str(p.relative_to(work)) for p in frame_files],
                "maps": [str(p.relative_to(work)) for p in map_files],
                "fixations": [str(p.relative_to(work)) for p in fix_files],
            },
            indent=2,
        )
    )
    return manifest


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--workdir", default="demo_run")
    parser.add_argument("--frames", type=int, default=6)
    args = parser.parse_args()
    work = Path(args.workdir)
    work.mkdir(parents=True, exist_ok=True)

    manifest = render_clip(work, args.frames, 32, 64)
    cfg_s = REPO / "configs" / "vinet_s_tiny.json"
    cfg_a = REPO / "configs" / "vinet_a_tiny.json"
    wts = {}
    for tag, cfg in (("s", cfg_s), ("a", cfg_a)):
        graph = GraphConfig.load(cfg)
        path = work / f"weights_{tag}.vnwt"
        write_container(random_init(graph, seed=42), path)
        wts[tag] = path

    pred = work / "pred_e"
    rc = cli(
        [
            "predict", str(manifest), "--out", str(pred), "--variant", "e",
            "--config", str(cfg_s), "--config", str(cfg_a),
            "--weights", str(wts["s"]), "--weights", str(wts["a"]),
        ]
    )
    if rc:
        sys.exit(rc)
    sys.exit(
        cli(
            [
                "eval", "--pred", str(pred), "--manifest", str(manifest),
                "--out", str(work / "report.json"),
            ]
        )
    )


if __name__ == "__main__":
    main()
