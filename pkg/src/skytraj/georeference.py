"""Reference-frame to world-coordinate chain and lane lookup.

Each intersection owns one master->orthophoto homography plus two affine
geotransforms (ortho pixels -> local planar meters, ortho pixels ->
WGS84 degrees); each video owns a reference->master homography. Road
section / lane labels come from point-in-polygon lookup on the ortho
cut-out segmentation.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from .errors import UnknownIntersection, UnknownVideo
from .geometry import (
    GeoTransform,
    Homography,
    Point2,
    apply_homography,
    compose,
    pixel_to_world,
)


@dataclass(frozen=True)
class IntersectionEntry:
    master_to_ortho: Homography
    geo_local: GeoTransform  # ortho px -> planar meters
    geo_wgs: GeoTransform  # ortho px -> (lat, lon) degrees


@dataclass(frozen=True)
class VideoEntry:
    intersection: str
    ref_to_master: Homography


@dataclass(frozen=True)
class GeoRegistry:
    intersections: Mapping[str, IntersectionEntry]
    videos: Mapping[str, VideoEntry]

    def video(self, video_id: str) -> VideoEntry:
        try:
            return self.videos[video_id]
        except KeyError:
            raise UnknownVideo(f"video {video_id!r} not in registry") from None

    def intersection(self, label: str) -> IntersectionEntry:
        try:
            return self.intersections[label]
        except KeyError:
            raise UnknownIntersection(
                f"intersection {label!r} not in registry"
            ) from None

    def intersection_for(self, video_id: str) -> IntersectionEntry:
        return self.intersection(self.video(video_id).intersection)


@dataclass(frozen=True)
class GeoPoint:
    ortho: Point2  # ortho cut-out pixels
    local: Point2  # planar meters
    lat: float
    lon: float


@dataclass(frozen=True)
class LanePolygon:
    section: str
    lane: int
    polygon: tuple[Point2, ...]


@dataclass(frozen=True)
class SegmentationMap:
    lanes: tuple[LanePolygon, ...]


def compose_ref_to_ortho(registry: GeoRegistry, video_id: str) -> Homography:
    """Composite map: reference frame -> master frame -> orthophoto."""
    video = registry.video(video_id)
    inter = registry.intersection(video.intersection)
    return compose(inter.master_to_ortho, video.ref_to_master)


def georeference_point(
    registry: GeoRegistry,
    video_id: str,
    p_ref: Point2,
    geo_local: GeoTransform | None = None,
    geo_wgs: GeoTransform | None = None,
) -> GeoPoint:
    """Carry a reference-frame pixel into ortho px, local meters, and WGS84.

    Both affine maps are applied independently to the same ortho pixel.
    When omitted they are taken from the video's intersection entry.
    """
    if geo_local is None or geo_wgs is None:
        inter = registry.intersection_for(video_id)
        geo_local = geo_local or inter.geo_local
        geo_wgs = geo_wgs or inter.geo_wgs
    h = compose_ref_to_ortho(registry, video_id)
    ortho = apply_homography(h, p_ref)
    local = pixel_to_world(geo_local, ortho)
    wgs = pixel_to_world(geo_wgs, ortho)
    return GeoPoint(ortho=ortho, local=local, lat=wgs.x, lon=wgs.y)


def _on_segment(p: Point2, a: Point2, b: Point2, tol: float = 1e-9) -> bool:
    abx, aby = b.x - a.x, b.y - a.y
    apx, apy = p.x - a.x, p.y - a.y
    seg2 = abx * abx + aby * aby
    if seg2 == 0.0:
        return (apx * apx + apy * apy) <= tol * tol
    t = (apx * abx + apy * aby) / seg2
    t = min(max(t, 0.0), 1.0)
    dx = apx - t * abx
    dy = apy - t * aby
    return (dx * dx + dy * dy) <= tol * tol


def point_in_polygon(p: Point2, polygon: Sequence[Point2]) -> bool:
    """Even-odd containment with boundary points counted as inside."""
    n = len(polygon)
    if n < 3:
        return False
    for i in range(n):
        if _on_segment(p, polygon[i], polygon[(i + 1) % n]):
            return True
    inside = False
    for i in range(n):
        a = polygon[i]
        b = polygon[(i + 1) % n]
        if (a.y > p.y) != (b.y > p.y):
            x_cross = (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x
            if p.x < x_cross:
                inside = not inside
    return inside


def assign_segment(
    seg: SegmentationMap, ortho_p: Point2
) -> Optional[tuple[str, int]]:
    """First lane polygon (document order) containing the ortho-pixel point."""
    for lane in seg.lanes:
        if point_in_polygon(ortho_p, lane.polygon):
            return (lane.section, lane.lane)
    return None
