"""Operator commands: predict, eval, params, bench.

Exit codes: 0 success, 1 runtime failure, 2 usage error. Frame images
are binary PPM, maps and fixations binary PGM; manifests are JSON with
paths resolved relative to the manifest file.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import imageio, metrics, pipeline
from .errors import EngineError, UsageError
from .graph import GraphConfig
from .models import Variant
from .ops import trilinear_upsample
from .tensor import Tensor, write_tensor
from .weights import BoundModel, bind, read_container


@dataclass(frozen=True)
class RunManifest:
    """One video's frame files plus optional ground-truth files."""

    video: str
    frames: tuple[Path, ...]
    maps: tuple[Path, ...] | None
    fixations: tuple[Path, ...] | None

    @staticmethod
    def load(path: str | Path) -> "RunManifest":
        path = Path(path)
        try:
            obj = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read manifest {path}: {exc}") from exc
        frames = [path.parent / f for f in obj.get("frames", [])]
        if not frames:
            raise UsageError(f"manifest {path} lists no frames")

        def aligned(key):
            items = obj.get(key)
            if items is None:
                return None
            if len(items) != len(frames):
                raise UsageError(
                    f"manifest {path}: {key} has {len(items)} entries for "
                    f"{len(frames)} frames"
                )
            return tuple(path.parent / f for f in items)

        return RunManifest(
            video=obj.get("video", path.stem),
            frames=tuple(frames),
            maps=aligned("maps"),
            fixations=aligned("fixations"),
        )


def _load_model(config: str, weights: str) -> BoundModel:
    return bind(GraphConfig.load(config), read_container(weights))


def _resize_frame(frame: np.ndarray, hw: tuple[int, int]) -> np.ndarray:
    c, h, w = frame.shape
    if (h, w) == hw:
        return frame
    t = trilinear_upsample(Tensor(frame.reshape(c, 1, h, w)), size=(1, *hw))
    return t.data.reshape(c, *hw)


class _FrameCache:
    """Loads frames once, resized to one model's input resolution."""

    def __init__(self, paths, hw):
        self.paths = paths
        self.hw = hw
        self._cache: dict[int, np.ndarray] = {}

    def __call__(self, index: int) -> np.ndarray:
        if index not in self._cache:
            self._cache[index] = _resize_frame(imageio.read_ppm(self.paths[index]), self.hw)
        return self._cache[index]


def _predict_video(model: BoundModel, manifest: RunManifest, threads: int, batch: int):
    variant = Variant(model.graph.meta.get("variant", "a"))
    plans = pipeline.make_windows(len(manifest.frames), variant)
    cache = _FrameCache(manifest.frames, model.input_shape[2:])

    def one(plan):
        window = pipeline.assemble_window(plan, cache, variant)
        return pipeline.predict(model, window)

    results: list[pipeline.SaliencyMap] = []
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for start in range(0, len(plans), max(batch, 1)):
                chunk = plans[start : start + max(batch, 1)]
                results.extend(pool.map(one, chunk))
    else:
        results.extend(one(p) for p in plans)
    return results


def cmd_predict(args) -> int:
    n_cfg, n_w = len(args.config), len(args.weights)
    if args.variant == "e":
        if n_cfg != 2 or n_w != 2:
            raise UsageError("--variant e needs two --config and two --weights (s then a)")
    elif n_cfg != 1 or n_w != 1:
        raise UsageError(f"--variant {args.variant} needs one --config and one --weights")

    manifest = RunManifest.load(args.manifest)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    threads = args.threads or pipeline.default_threads()

    if args.variant == "e":
        model_s = _load_model(args.config[0], args.weights[0])
        model_a = _load_model(args.config[1], args.weights[1])
        maps_s = _predict_video(model_s, manifest, threads, args.batch)
        maps_a = _predict_video(model_a, manifest, threads, args.batch)
        maps = [pipeline.ensemble(ms, ma) for ms, ma in zip(maps_s, maps_a)]
    else:
        model = _load_model(args.config[0], args.weights[0])
        declared = model.graph.meta.get("variant")
        if declared and declared != args.variant:
            raise UsageError(
                f"config declares variant '{declared}' but --variant {args.variant} given"
            )
        maps = _predict_video(model, manifest, threads, args.batch)

    for sal in maps:
        stem = manifest.frames[sal.frame_index].stem
        imageio.write_pgm(out_dir / f"{stem}_sal.pgm", sal.plane())
        if args.raw:
            write_tensor(sal.values, out_dir / f"{stem}_sal.vnts")
    print(f"wrote {len(maps)} saliency maps to {out_dir}")
    return 0


def _format_row(cells, widths):
    return "  ".join(str(c).ljust(w) for c, w in zip(cells, widths))


def cmd_eval(args) -> int:
    if args.average:
        reports = []
        for rp in args.average:
            obj = json.loads(Path(rp).read_text())
            frames = tuple(
                metrics.FrameScores(
                    frame=f["frame"], cc=f["cc"], sim=f["sim"], kldiv=f["kldiv"],
                    nss=f.get("nss"), auc_j=f.get("auc_j"),
                )
                for f in obj["frames"]
            )
            reports.append(metrics.MetricReport(frames=frames, skipped=tuple(obj.get("skipped", ()))))
        averaged = metrics.average_reports(reports)
        print("split-averaged means over", len(reports), "reports")
        _print_means(averaged)
        if args.out:
            Path(args.out).write_text(json.dumps({"mean": averaged, "reports": len(reports)}, indent=2))
        return 0

    if not args.pred or not args.manifest:
        raise UsageError("eval needs --pred and --manifest (or --average)")
    manifest = RunManifest.load(args.manifest)
    if manifest.maps is None:
        raise UsageError(f"manifest {args.manifest} carries no ground-truth maps")
    pred_dir = Path(args.pred)
    missing = [
        str(pred_dir / f"{p.stem}_sal.pgm")
        for p in manifest.frames
        if not (pred_dir / f"{p.stem}_sal.pgm").exists()
    ]
    if missing:
        print("missing predictions:", file=sys.stderr)
        for m in missing:
            print(f"  {m}", file=sys.stderr)
        return 1

    have_fix = manifest.fixations is not None
    skipped = () if have_fix else ("nss", "auc_j")
    if not have_fix:
        print("warning: no fixation maps; skipping NSS and AUC-J", file=sys.stderr)

    def score(i: int) -> metrics.FrameScores:
        stem = manifest.frames[i].stem
        pred = imageio.read_pgm(pred_dir / f"{stem}_sal.pgm")
        gt = imageio.read_pgm(manifest.maps[i])
        if pred.shape != gt.shape:
            t = trilinear_upsample(
                Tensor(pred.reshape(1, 1, *pred.shape)), size=(1, *gt.shape)
            )
            pred = t.data.reshape(gt.shape)
        fix = (
            metrics.FixationMap(imageio.read_pgm_mask(manifest.fixations[i]))
            if have_fix
            else None
        )
        return metrics.score_frame(stem, pred, gt, fix)

    threads = args.threads or pipeline.default_threads()
    indices = range(len(manifest.frames))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            frames = tuple(pool.map(score, indices))
    else:
        frames = tuple(score(i) for i in indices)
    report = metrics.MetricReport(frames=frames, skipped=skipped)

    _print_report(report)
    if args.out:
        Path(args.out).write_text(json.dumps(report.as_dict(), indent=2))
    return 0


def _print_means(means: dict) -> None:
    cols = ["CC", "NSS", "AUC-J", "SIM", "KLDIV"]
    keys = ["cc", "nss", "auc_j", "sim", "kldiv"]
    vals = ["-" if means.get(k) is None else f"{means[k]:.4f}" for k in keys]
    widths = [max(len(c), len(v)) for c, v in zip(cols, vals)]
    print(_format_row(cols, widths))
    print(_format_row(vals, widths))


def _print_report(report: metrics.MetricReport) -> None:
    header = ["frame", "CC", "NSS", "AUC-J", "SIM", "KLDIV"]
    rows = []
    for f in report.frames:
        rows.append(
            [
                f.frame,
                f"{f.cc:.4f}",
                "-" if f.nss is None else f"{f.nss:.4f}",
                "-" if f.auc_j is None else f"{f.auc_j:.4f}",
                f"{f.sim:.4f}",
                f"{f.kldiv:.4f}",
            ]
        )
    means = report.means()
    rows.append(
        [
            "mean",
            f"{means['cc']:.4f}",
            "-" if means["nss"] is None else f"{means['nss']:.4f}",
            "-" if means["auc_j"] is None else f"{means['auc_j']:.4f}",
            f"{means['sim']:.4f}",
            f"{means['kldiv']:.4f}",
        ]
    )
    widths = [max(len(r[i]) for r in [header] + rows) for i in range(len(header))]
    print(_format_row(header, widths))
    for r in rows:
        print(_format_row(r, widths))


def cmd_params(args) -> int:
    graph = GraphConfig.load(args.config)
    counts = graph.count_parameters()
    scopes = list(counts.by_scope.items())
    if args.json:
        obj = {
            "config": graph.name,
            "by_scope": dict(counts.by_scope),
            "total": counts.total,
            "total_mb": counts.total * 4 / 1e6,
        }
        print(json.dumps(obj, indent=2))
        return 0
    print(f"model: {graph.name}")
    header = ["subgraph", "params", "params (M)", "size (MB)"]
    rows = [
        [scope, str(n), f"{n / 1e6:.3f}", f"{n * 4 / 1e6:.2f}"]
        for scope, n in scopes
    ]
    rows.append(
        [
            "total",
            str(counts.total),
            f"{counts.total / 1e6:.3f}",
            f"{counts.total * 4 / 1e6:.2f}",
        ]
    )
    widths = [max(len(r[i]) for r in [header] + rows) for i in range(len(header))]
    print(_format_row(header, widths))
    for r in rows:
        print(_format_row(r, widths))
    return 0


def cmd_bench(args) -> int:
    if args.iters < 1:
        raise UsageError(f"--iters must be >= 1, got {args.iters}")
    model = _load_model(args.config, args.weights)
    report = pipeline.bench(
        model,
        batch=args.batch,
        iters=args.iters,
        threads=args.threads,
    )
    if args.json:
        print(json.dumps(report.as_dict(), indent=2))
    else:
        print(
            f"batch={report.batch} iters={report.iters} warmup={report.warmup}  "
            f"fps {report.fps_mean:.2f} +/- {report.fps_std:.2f}"
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="salengine",
        description="Video saliency inference and evaluation toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("predict", help="run a model over a frame manifest")
    p.add_argument("manifest")
    p.add_argument("--out", required=True)
    p.add_argument("--variant", choices=("s", "a", "e"), default="a")
    p.add_argument("--config", action="append", default=[], help="graph config JSON (twice for -e: s then a)")
    p.add_argument("--weights", action="append", default=[], help="VNWT weight container (twice for -e)")
    p.add_argument("--batch", type=int, default=8)
    p.add_argument("--threads", type=int, default=0)
    p.add_argument("--raw", action="store_true", help="also write raw VNTS tensors")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="score predictions against ground truth")
    p.add_argument("--pred", help="directory of predicted *_sal.pgm maps")
    p.add_argument("--manifest", help="manifest with ground-truth map paths")
    p.add_argument("--average", nargs="+", help="average mode: per-split report JSONs")
    p.add_argument("--out", help="write machine-readable report JSON here")
    p.add_argument("--threads", type=int, default=0)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("params", help="analytic parameter/size audit of a config")
    p.add_argument("--config", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_params)

    p = sub.add_parser("bench", help="forward-pass throughput measurement")
    p.add_argument("--config", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--batch", type=int, default=1)
    p.add_argument("--iters", type=int, default=10)
    p.add_argument("--threads", type=int, default=0)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except EngineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
