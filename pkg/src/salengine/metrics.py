"""Saliency evaluation metrics (CC, NSS, AUC-Judd, SIM, KLDiv) and the
KLDiv-minus-CC training loss.

Conventions frozen here: KLDiv uses eps=1e-7 in the denominator and
normalizes both maps to sum 1; CC and NSS return 0 for a zero-variance
prediction; AUC-Judd thresholds at the prediction values found at
fixations with >= tie handling. Internals run in float64.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DegenerateMapError, DimensionError

KLDIV_EPS = 1e-7

_trapezoid = getattr(np, "trapezoid", None) or np.trapz

METRIC_ORDER = ("cc", "nss", "auc_j", "sim", "kldiv")


def _flat_pair(p, q) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise DimensionError(f"map dims differ: {p.shape} vs {q.shape}")
    return p.ravel(), q.ravel()


def _distribution(arr: np.ndarray, label: str) -> np.ndarray:
    total = arr.sum()
    if total <= 0.0:
        raise DegenerateMapError(f"{label} map sums to {total}, cannot normalize")
    return arr / total


@dataclass(frozen=True)
class FixationMap:
    """Binary ground-truth fixation locations."""

    points: np.ndarray

    def __post_init__(self):
        mask = np.asarray(self.points)
        if mask.dtype != bool:
            mask = mask > 0.5
        object.__setattr__(self, "points", mask)

    @property
    def count(self) -> int:
        return int(self.points.sum())


def cc(p, q) -> float:
    """Pearson correlation of the flattened maps; 0 if either is constant."""
    pf, qf = _flat_pair(p, q)
    pf = pf - pf.mean()
    qf = qf - qf.mean()
    denom = np.sqrt((pf * pf).sum() * (qf * qf).sum())
    if denom == 0.0:
        return 0.0
    return float((pf * qf).sum() / denom)


def kldiv(p, q, eps: float = KLDIV_EPS) -> float:
    """KL divergence of ground truth q from prediction p, both
    normalized to sum 1; bins with q=0 contribute nothing."""
    pf, qf = _flat_pair(p, q)
    pn = _distribution(pf, "prediction")
    qn = _distribution(qf, "ground-truth")
    mask = qn > 0.0
    return float(np.sum(qn[mask] * np.log(qn[mask] / (pn[mask] + eps))))


def sim(p, q) -> float:
    """Histogram intersection of the sum-normalized maps."""
    pf, qf = _flat_pair(p, q)
    pn = _distribution(pf, "prediction")
    qn = _distribution(qf, "ground-truth")
    return float(np.minimum(pn, qn).sum())


def _fixation_mask(p: np.ndarray, fixations: FixationMap | np.ndarray) -> np.ndarray:
    mask = fixations.points if isinstance(fixations, FixationMap) else np.asarray(fixations) > 0.5
    if mask.shape != np.asarray(p).shape:
        raise DimensionError(
            f"fixation dims {mask.shape} differ from map dims {np.asarray(p).shape}"
        )
    if not mask.any():
        raise DegenerateMapError("fixation map holds no fixations")
    return mask


def nss(p, fixations) -> float:
    """Mean of the z-scored prediction at fixated pixels; 0 if the
    prediction has zero variance."""
    pa = np.asarray(p, dtype=np.float64)
    mask = _fixation_mask(pa, fixations)
    flat = pa.ravel()
    std = flat.std()
    if std == 0.0:
        return 0.0
    z = (flat - flat.mean()) / std
    return float(z[mask.ravel()].mean())


def auc_judd(p, fixations) -> float:
    """ROC area with thresholds at the fixated prediction values (>= at
    each threshold), curve closed at (0,0) and (1,1), trapezoidal rule."""
    pa = np.asarray(p, dtype=np.float64)
    mask = _fixation_mask(pa, fixations).ravel()
    flat = pa.ravel()
    at_fix = np.sort(flat[mask])
    others = np.sort(flat[~mask])
    n_fix = at_fix.size
    n_other = others.size
    thresholds = np.unique(at_fix)[::-1]
    tpr = (n_fix - np.searchsorted(at_fix, thresholds, side="left")) / n_fix
    if n_other:
        fpr = (n_other - np.searchsorted(others, thresholds, side="left")) / n_other
    else:
        fpr = np.zeros_like(tpr)
    xs = np.concatenate(([0.0], fpr, [1.0]))
    ys = np.concatenate(([0.0], tpr, [1.0]))
    return float(_trapezoid(ys, xs))


def loss(p, q) -> float:
    """Training objective: kldiv(p, q) - cc(p, q)."""
    return kldiv(p, q) - cc(p, q)


@dataclass(frozen=True)
class FrameScores:
    """Per-frame metric values; fixation metrics are None when skipped."""

    frame: str
    cc: float
    sim: float
    kldiv: float
    nss: float | None = None
    auc_j: float | None = None

    def as_dict(self) -> dict:
        return {
            "frame": self.frame,
            "cc": self.cc,
            "nss": self.nss,
            "auc_j": self.auc_j,
            "sim": self.sim,
            "kldiv": self.kldiv,
        }


@dataclass(frozen=True)
class MetricReport:
    """Per-frame scores plus their unweighted mean."""

    frames: tuple[FrameScores, ...]
    skipped: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        object.__setattr__(self, "skipped", tuple(self.skipped))

    def mean(self, metric: str) -> float | None:
        vals = [getattr(f, metric) for f in self.frames]
        if not vals or any(v is None for v in vals):
            return None
        return float(np.mean(vals))

    def means(self) -> dict[str, float | None]:
        return {m: self.mean(m) for m in METRIC_ORDER}

    def as_dict(self) -> dict:
        return {
            "frames": [f.as_dict() for f in self.frames],
            "mean": self.means(),
            "skipped": list(self.skipped),
        }


def score_frame(
    frame: str,
    prediction: np.ndarray,
    gt_map: np.ndarray,
    fixations: FixationMap | None = None,
) -> FrameScores:
    """All applicable metrics for one frame."""
    scores = FrameScores(
        frame=frame,
        cc=cc(prediction, gt_map),
        sim=sim(prediction, gt_map),
        kldiv=kldiv(prediction, gt_map),
        nss=nss(prediction, fixations) if fixations is not None else None,
        auc_j=auc_judd(prediction, fixations) if fixations is not None else None,
    )
    return scores


def average_reports(reports: Sequence[MetricReport]) -> dict[str, float | None]:
    """Mean of per-report means (cross-validation split averaging)."""
    out: dict[str, float | None] = {}
    for m in METRIC_ORDER:
        vals = [r.mean(m) for r in reports]
        out[m] = None if any(v is None for v in vals) else float(np.mean(vals))
    return out
