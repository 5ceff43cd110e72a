"""Planar projective and affine geometry primitives.

Points, 3x3 homographies, 2x3 affine geotransforms, axis-aligned boxes,
corner quads, and exact convex-polygon IoU via Sutherland-Hodgman
clipping. Everything here is a pure function on immutable values.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import (
    DegenerateProjection,
    InvalidGeometry,
    NonConvexInput,
    SingularResult,
    SingularTransform,
)

# Homogeneous scale below this magnitude counts as projective infinity.
Z_TOL = 1e-12
# |det| must exceed this fraction of the Frobenius norm cubed.
DET_FLOOR = 1e-12


class Point2(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True, eq=False)
class Homography:
    """Invertible 3x3 projective map between pixel planes.

    The matrix is stored scaled so that m[2,2] == 1 whenever that entry
    is usably nonzero; otherwise it is kept as-is and ``normalized`` is
    False.
    """

    m: np.ndarray
    normalized: bool = True

    @staticmethod
    def from_matrix(m) -> "Homography":
        a = np.array(m, dtype=float).reshape(3, 3)
        if not np.all(np.isfinite(a)):
            raise InvalidGeometry("homography entries must be finite")
        det = np.linalg.det(a)
        fro = float(np.linalg.norm(a))
        if abs(det) < DET_FLOOR * fro**3:
            raise SingularTransform(
                f"matrix below invertibility floor (|det|={abs(det):.3e})"
            )
        if abs(a[2, 2]) > Z_TOL:
            a = a / a[2, 2]
            norm = True
        else:
            norm = False
        a.setflags(write=False)
        return Homography(a, norm)

    @staticmethod
    def identity() -> "Homography":
        return Homography.from_matrix(np.eye(3))

    @staticmethod
    def translation(tx: float, ty: float) -> "Homography":
        return Homography.from_matrix([[1, 0, tx], [0, 1, ty], [0, 0, 1]])

    @staticmethod
    def scaling(sx: float, sy: float | None = None) -> "Homography":
        sy = sx if sy is None else sy
        return Homography.from_matrix([[sx, 0, 0], [0, sy, 0], [0, 0, 1]])

    @staticmethod
    def rotation(angle_rad: float, center: Point2 | None = None) -> "Homography":
        c, s = math.cos(angle_rad), math.sin(angle_rad)
        r = Homography.from_matrix([[c, -s, 0], [s, c, 0], [0, 0, 1]])
        if center is None:
            return r
        fwd = Homography.translation(center.x, center.y)
        back = Homography.translation(-center.x, -center.y)
        return compose(fwd, compose(r, back))

    def inverse(self) -> "Homography":
        return Homography.from_matrix(np.linalg.inv(self.m))

    def __call__(self, p: Point2) -> Point2:
        return apply_homography(self, p)


@dataclass(frozen=True)
class GeoTransform:
    """2x3 affine map from image pixels to world coordinates.

    x' = a*x + b*y + tx, y' = c*x + d*y + ty. The 2x2 linear part must
    be nonsingular.
    """

    a: float
    b: float
    c: float
    d: float
    tx: float
    ty: float

    def __post_init__(self):
        vals = (self.a, self.b, self.c, self.d, self.tx, self.ty)
        if not all(math.isfinite(v) for v in vals):
            raise InvalidGeometry("geotransform coefficients must be finite")
        det = self.a * self.d - self.b * self.c
        scale = self.a**2 + self.b**2 + self.c**2 + self.d**2
        if abs(det) <= 1e-15 * max(1.0, scale):
            raise SingularTransform("geotransform linear part is singular")

    @staticmethod
    def identity() -> "GeoTransform":
        return GeoTransform(1.0, 0.0, 0.0, 1.0, 0.0, 0.0)

    def __call__(self, p: Point2) -> Point2:
        return pixel_to_world(self, p)


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box encoded as center + size; units depend on context."""

    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self):
        for name in ("cx", "cy", "w", "h"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if self.w < 0 or self.h < 0:
            raise InvalidGeometry(f"box size must be >= 0, got {self.w}x{self.h}")

    @property
    def xmin(self) -> float:
        return self.cx - self.w / 2

    @property
    def xmax(self) -> float:
        return self.cx + self.w / 2

    @property
    def ymin(self) -> float:
        return self.cy - self.h / 2

    @property
    def ymax(self) -> float:
        return self.cy + self.h / 2

    def corners(self) -> "Quad":
        return Quad(
            Point2(self.xmin, self.ymin),
            Point2(self.xmax, self.ymin),
            Point2(self.xmax, self.ymax),
            Point2(self.xmin, self.ymax),
        )

    @staticmethod
    def from_corners(xs: Sequence[float], ys: Sequence[float]) -> "BBox":
        xmin, xmax = min(xs), max(xs)
        ymin, ymax = min(ys), max(ys)
        return BBox((xmin + xmax) / 2, (ymin + ymax) / 2, xmax - xmin, ymax - ymin)


@dataclass(frozen=True)
class Quad:
    """Four-corner polygon, vertices in order (either winding)."""

    p1: Point2
    p2: Point2
    p3: Point2
    p4: Point2

    def points(self) -> tuple[Point2, Point2, Point2, Point2]:
        return (self.p1, self.p2, self.p3, self.p4)


def apply_homography(h: Homography, p: Point2) -> Point2:
    """Map a point through ``h`` in homogeneous coordinates."""
    m = h.m
    x, y = p
    z = m[2, 0] * x + m[2, 1] * y + m[2, 2]
    if abs(z) < Z_TOL:
        raise DegenerateProjection(f"point {p} maps to projective infinity")
    return Point2(
        float((m[0, 0] * x + m[0, 1] * y + m[0, 2]) / z),
        float((m[1, 0] * x + m[1, 1] * y + m[1, 2]) / z),
    )


def apply_homography_array(h: Homography, pts: np.ndarray) -> np.ndarray:
    """Vectorized `apply_homography` for an (N, 2) array."""
    pts = np.asarray(pts, dtype=float)
    m = h.m
    z = m[2, 0] * pts[:, 0] + m[2, 1] * pts[:, 1] + m[2, 2]
    if np.any(np.abs(z) < Z_TOL):
        raise DegenerateProjection("some points map to projective infinity")
    out = np.empty_like(pts)
    out[:, 0] = (m[0, 0] * pts[:, 0] + m[0, 1] * pts[:, 1] + m[0, 2]) / z
    out[:, 1] = (m[1, 0] * pts[:, 0] + m[1, 1] * pts[:, 1] + m[1, 2]) / z
    return out


def compose(h2: Homography, h1: Homography) -> Homography:
    """Return the map equivalent to applying ``h1`` first, then ``h2``."""
    try:
        return Homography.from_matrix(h2.m @ h1.m)
    except SingularTransform as exc:
        raise SingularResult(str(exc)) from exc


def transform_bbox(h: Homography, b: BBox) -> BBox:
    """Transform the four corners and refit the minimal axis-aligned box.

    Pure translations shift the center directly so box size is preserved
    exactly (the corner path would lose low bits to cancellation).
    """
    m = h.m
    if (
        m[0, 0] == 1.0 and m[0, 1] == 0.0
        and m[1, 0] == 0.0 and m[1, 1] == 1.0
        and m[2, 0] == 0.0 and m[2, 1] == 0.0 and m[2, 2] == 1.0
    ):
        return BBox(b.cx + m[0, 2], b.cy + m[1, 2], b.w, b.h)
    pts = [apply_homography(h, p) for p in b.corners().points()]
    return BBox.from_corners([p.x for p in pts], [p.y for p in pts])


def pixel_to_world(t: GeoTransform, p: Point2) -> Point2:
    return Point2(t.a * p.x + t.b * p.y + t.tx, t.c * p.x + t.d * p.y + t.ty)


def _shoelace(pts: Sequence[tuple[float, float]]) -> float:
    """Absolute polygon area."""
    n = len(pts)
    if n < 3:
        return 0.0
    acc = 0.0
    for i in range(n):
        x0, y0 = pts[i]
        x1, y1 = pts[(i + 1) % n]
        acc += x0 * y1 - x1 * y0
    return abs(acc) / 2.0


def _signed_area(pts: Sequence[tuple[float, float]]) -> float:
    acc = 0.0
    n = len(pts)
    for i in range(n):
        x0, y0 = pts[i]
        x1, y1 = pts[(i + 1) % n]
        acc += x0 * y1 - x1 * y0
    return acc / 2.0


def _require_convex(pts: Sequence[tuple[float, float]]) -> None:
    # Edge-pair cross products must not carry strictly opposite signs;
    # tolerance scales with the squared extent of the polygon.
    n = len(pts)
    span = max(
        max(p[0] for p in pts) - min(p[0] for p in pts),
        max(p[1] for p in pts) - min(p[1] for p in pts),
        1e-30,
    )
    tol = 1e-9 * span * span
    pos = neg = False
    for i in range(n):
        ax, ay = pts[i]
        bx, by = pts[(i + 1) % n]
        cx, cy = pts[(i + 2) % n]
        cross = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
        if cross > tol:
            pos = True
        elif cross < -tol:
            neg = True
    if pos and neg:
        raise NonConvexInput("quadrilateral is not convex")


def _clip_convex(subject, clip):
    """Sutherland-Hodgman: clip ``subject`` against convex CCW ``clip``."""
    output = list(subject)
    n = len(clip)
    for i in range(n):
        if not output:
            return []
        ax, ay = clip[i]
        bx, by = clip[(i + 1) % n]
        ex, ey = bx - ax, by - ay

        def inside(p):
            return ex * (p[1] - ay) - ey * (p[0] - ax) >= 0.0

        input_list = output
        output = []
        s = input_list[-1]
        s_in = inside(s)
        for e in input_list:
            e_in = inside(e)
            if e_in != s_in:
                # intersection of segment s-e with the clip edge line
                dx, dy = e[0] - s[0], e[1] - s[1]
                denom = ex * dy - ey * dx
                if denom != 0.0:
                    fs = ex * (s[1] - ay) - ey * (s[0] - ax)
                    t = -fs / denom
                    output.append((s[0] + t * dx, s[1] + t * dy))
            if e_in:
                output.append(e)
            s, s_in = e, e_in
    return output


def quad_iou(q1: Quad, q2: Quad) -> float:
    """Exact intersection-over-union of two convex quadrilaterals."""
    a = [(p.x, p.y) for p in q1.points()]
    b = [(p.x, p.y) for p in q2.points()]
    _require_convex(a)
    _require_convex(b)
    if _signed_area(b) < 0:
        b = b[::-1]
    area1 = _shoelace(a)
    area2 = _shoelace(b)
    inter = _shoelace(_clip_convex(a, b))
    union = area1 + area2 - inter
    if union <= 0.0:
        return 0.0
    return min(max(inter / union, 0.0), 1.0)
