"""Robust homography estimation from point correspondences.

Pipeline order mirrors the stabilization stage: exclusion-mask filtering,
ratio-test (SNN) filtering, then RANSAC around a Hartley-normalized DLT,
with optional handling of estimates computed on downscaled coordinates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    DegenerateConfiguration,
    InsufficientPoints,
    MissingDistances,
    NoModelFound,
    SingularTransform,
)
from .geometry import BBox, Homography, Point2

# Minimal sample whose smallest triangle area falls below this fraction of
# the sample bounding-box area is rejected as quasi-collinear.
SAMPLE_AREA_FLOOR = 1e-9


@dataclass(frozen=True)
class Correspondence:
    """A matched point pair, optionally with descriptor distances d1 <= d2."""

    src: Point2
    dst: Point2
    d1: float | None = None
    d2: float | None = None


@dataclass(frozen=True)
class RansacConfig:
    confidence: float = 0.999999
    max_iterations: int = 5000
    reproj_threshold: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.confidence < 1.0:
            raise ValueError("confidence must be in (0, 1)")
        if self.max_iterations <= 0:
            raise ValueError("max_iterations must be positive")
        if self.reproj_threshold <= 0.0:
            raise ValueError("reproj_threshold must be positive")


@dataclass(frozen=True)
class EstimateReport:
    homography: Homography
    inlier_flags: np.ndarray
    iterations_run: int
    mean_reproj_error: float

    @property
    def inlier_count(self) -> int:
        return int(np.count_nonzero(self.inlier_flags))


def snn_filter(matches: Sequence[Correspondence], ratio: float) -> list[Correspondence]:
    """Keep matches whose best distance is at most ``ratio`` times the second best."""
    if not 0.0 < ratio <= 1.0:
        raise ValueError("ratio must be in (0, 1]")
    kept = []
    for i, m in enumerate(matches):
        if m.d1 is None or m.d2 is None:
            raise MissingDistances(f"match {i} lacks descriptor distances")
        if m.d1 <= ratio * m.d2:
            kept.append(m)
    return kept


def mask_keep_flags(
    points: Sequence[Point2], masks: Sequence[BBox], margin: float
) -> np.ndarray:
    """Per-point flags: False when a point lies strictly inside an enlarged mask.

    Each mask is grown about its center to w*(1+margin) x h*(1+margin).
    """
    keep = np.ones(len(points), dtype=bool)
    if not masks or not len(points):
        return keep
    pts = np.asarray([(p.x, p.y) for p in points], dtype=float)
    for b in masks:
        hw = b.w * (1.0 + margin) / 2.0
        hh = b.h * (1.0 + margin) / 2.0
        inside = (
            (np.abs(pts[:, 0] - b.cx) < hw) & (np.abs(pts[:, 1] - b.cy) < hh)
        )
        keep &= ~inside
    return keep


def mask_filter(
    points: Sequence[Point2], masks: Sequence[BBox], margin: float
) -> list[Point2]:
    """Drop points that fall strictly inside any enlarged exclusion box."""
    if margin < 0:
        raise ValueError("margin must be >= 0")
    flags = mask_keep_flags(points, masks, margin)
    return [p for p, k in zip(points, flags) if k]


def _normalization(pts: np.ndarray) -> np.ndarray:
    """Hartley similarity: centroid to origin, mean distance sqrt(2)."""
    centroid = pts.mean(axis=0)
    dists = np.sqrt(((pts - centroid) ** 2).sum(axis=1))
    mean_dist = dists.mean()
    if mean_dist <= 0.0:
        raise DegenerateConfiguration("all points coincide")
    s = math.sqrt(2.0) / mean_dist
    return np.array(
        [[s, 0.0, -s * centroid[0]], [0.0, s, -s * centroid[1]], [0.0, 0.0, 1.0]]
    )


def _collinear(pts: np.ndarray) -> bool:
    centered = pts - pts.mean(axis=0)
    sv = np.linalg.svd(centered, compute_uv=False)
    return sv[1] <= 1e-9 * max(sv[0], 1e-30)


def _apply_h33(t: np.ndarray, pts: np.ndarray) -> np.ndarray:
    z = t[2, 0] * pts[:, 0] + t[2, 1] * pts[:, 1] + t[2, 2]
    return np.stack(
        [
            (t[0, 0] * pts[:, 0] + t[0, 1] * pts[:, 1] + t[0, 2]) / z,
            (t[1, 0] * pts[:, 0] + t[1, 1] * pts[:, 1] + t[1, 2]) / z,
        ],
        axis=1,
    )


def _dlt(src: np.ndarray, dst: np.ndarray, check_collinear: bool = True) -> Homography:
    n = len(src)
    if n < 4:
        raise InsufficientPoints(f"need >= 4 correspondences, got {n}")
    if check_collinear and (_collinear(src) or _collinear(dst)):
        raise DegenerateConfiguration("correspondence points are collinear")
    t_src = _normalization(src)
    t_dst = _normalization(dst)
    sn = _apply_h33(t_src, src)
    dn = _apply_h33(t_dst, dst)

    a = np.zeros((2 * n, 9))
    x, y = sn[:, 0], sn[:, 1]
    u, v = dn[:, 0], dn[:, 1]
    ones = np.ones(n)
    a[0::2, 0] = x
    a[0::2, 1] = y
    a[0::2, 2] = ones
    a[0::2, 6] = -u * x
    a[0::2, 7] = -u * y
    a[0::2, 8] = -u
    a[1::2, 3] = x
    a[1::2, 4] = y
    a[1::2, 5] = ones
    a[1::2, 6] = -v * x
    a[1::2, 7] = -v * y
    a[1::2, 8] = -v

    _, _, vt = np.linalg.svd(a)
    hn = vt[-1].reshape(3, 3)
    h = np.linalg.inv(t_dst) @ hn @ t_src
    try:
        return Homography.from_matrix(h)
    except SingularTransform as exc:
        raise DegenerateConfiguration(str(exc)) from exc


def dlt_homography(corrs: Sequence[Correspondence]) -> Homography:
    """Least-squares homography via the normalized direct linear transform."""
    src = np.asarray([(c.src.x, c.src.y) for c in corrs], dtype=float)
    dst = np.asarray([(c.dst.x, c.dst.y) for c in corrs], dtype=float)
    if len(corrs) < 4:
        raise InsufficientPoints(f"need >= 4 correspondences, got {len(corrs)}")
    return _dlt(src, dst)


def symmetric_errors(h: Homography, src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Per-pair symmetric transfer error: mean of forward and backward residuals.

    Pairs whose projection degenerates get +inf instead of raising.
    """
    m = h.m
    mi = np.linalg.inv(m)
    out = np.full(len(src), np.inf)
    zf = m[2, 0] * src[:, 0] + m[2, 1] * src[:, 1] + m[2, 2]
    zb = mi[2, 0] * dst[:, 0] + mi[2, 1] * dst[:, 1] + mi[2, 2]
    ok = (np.abs(zf) > 1e-12) & (np.abs(zb) > 1e-12)
    if not np.any(ok):
        return out
    s, d = src[ok], dst[ok]
    zf, zb = zf[ok], zb[ok]
    fx = (m[0, 0] * s[:, 0] + m[0, 1] * s[:, 1] + m[0, 2]) / zf
    fy = (m[1, 0] * s[:, 0] + m[1, 1] * s[:, 1] + m[1, 2]) / zf
    bx = (mi[0, 0] * d[:, 0] + mi[0, 1] * d[:, 1] + mi[0, 2]) / zb
    by = (mi[1, 0] * d[:, 0] + mi[1, 1] * d[:, 1] + mi[1, 2]) / zb
    fwd = np.hypot(fx - d[:, 0], fy - d[:, 1])
    bwd = np.hypot(bx - s[:, 0], by - s[:, 1])
    out[ok] = (fwd + bwd) / 2.0
    return out


def _sample_degenerate(pts: np.ndarray) -> bool:
    """True when any three of the four sample points are quasi-collinear."""
    x0, y0 = pts[0]
    x1, y1 = pts[1]
    x2, y2 = pts[2]
    x3, y3 = pts[3]
    area_box = (max(x0, x1, x2, x3) - min(x0, x1, x2, x3)) * (
        max(y0, y1, y2, y3) - min(y0, y1, y2, y3)
    )
    if area_box <= 0.0:
        return True
    floor = SAMPLE_AREA_FLOOR * area_box
    crosses = (
        abs((x2 - x1) * (y3 - y1) - (y2 - y1) * (x3 - x1)),  # 1,2,3
        abs((x2 - x0) * (y3 - y0) - (y2 - y0) * (x3 - x0)),  # 0,2,3
        abs((x1 - x0) * (y3 - y0) - (y1 - y0) * (x3 - x0)),  # 0,1,3
        abs((x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)),  # 0,1,2
    )
    return min(crosses) < floor


def _sample4(rng: np.random.Generator, pool: np.ndarray) -> np.ndarray:
    # Partial Fisher-Yates shuffle; pool stays a permutation across calls.
    n = len(pool)
    for i in range(4):
        j = int(rng.integers(i, n))
        pool[i], pool[j] = pool[j], pool[i]
    return pool[:4].copy()


def ransac_homography(
    corrs: Sequence[Correspondence], cfg: RansacConfig
) -> EstimateReport:
    """RANSAC over minimal 4-point DLT fits with adaptive termination.

    Inliers are pairs whose symmetric transfer error is at most the
    configured threshold. The search stops once the standard confidence
    bound says a pure-inlier sample has been drawn with probability
    ``confidence``, capped at ``max_iterations``. The final model is
    refit on the full best consensus set. Deterministic per seed.
    """
    n = len(corrs)
    if n < 4:
        raise InsufficientPoints(f"need >= 4 correspondences, got {n}")
    src = np.asarray([(c.src.x, c.src.y) for c in corrs], dtype=float)
    dst = np.asarray([(c.dst.x, c.dst.y) for c in corrs], dtype=float)

    rng = np.random.default_rng(cfg.seed)
    pool = np.arange(n)
    eta = cfg.reproj_threshold
    log_fail = math.log(max(1e-300, 1.0 - cfg.confidence))

    best_count = 0
    best_flags: np.ndarray | None = None
    best_h: Homography | None = None
    needed = cfg.max_iterations
    it = 0
    while it < min(cfg.max_iterations, needed):
        it += 1
        idx = _sample4(rng, pool)
        s4, d4 = src[idx], dst[idx]
        if _sample_degenerate(s4) or _sample_degenerate(d4):
            continue
        try:
            # collinearity was already screened by the sample check
            h = _dlt(s4, d4, check_collinear=False)
        except DegenerateConfiguration:
            continue
        errs = symmetric_errors(h, src, dst)
        flags = errs <= eta
        count = int(np.count_nonzero(flags))
        if count >= 4 and count > best_count:
            best_count, best_flags, best_h = count, flags, h
            w4 = (count / n) ** 4
            if w4 >= 1.0:
                needed = it
            else:
                needed = math.ceil(log_fail / math.log1p(-w4))

    if best_flags is None or best_h is None:
        raise NoModelFound(f"no consensus of >= 4 inliers in {it} iterations")

    try:
        refit = _dlt(src[best_flags], dst[best_flags])
        errs = symmetric_errors(refit, src, dst)
        flags = errs <= eta
        if np.count_nonzero(flags) < 4:
            raise DegenerateConfiguration("refit lost the consensus")
        final_h, final_flags = refit, flags
    except DegenerateConfiguration:
        final_h = best_h
        errs = symmetric_errors(best_h, src, dst)
        final_flags = best_flags
    mean_err = float(errs[final_flags].mean())
    return EstimateReport(final_h, final_flags, it, mean_err)


def upscale_homography(h_scaled: Homography, factor: float) -> Homography:
    """Lift a homography estimated on coordinates premultiplied by ``factor``
    back to full-resolution coordinates: S^-1 * H * S with S = diag(f, f, 1)."""
    if factor <= 0.0:
        raise ValueError("scale factor must be positive")
    s = np.diag([factor, factor, 1.0])
    s_inv = np.diag([1.0 / factor, 1.0 / factor, 1.0])
    return Homography.from_matrix(s_inv @ h_scaled.m @ s)
