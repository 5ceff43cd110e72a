"""Detection/track data model and per-track processing.

Detections are stored frame-normalized (0..1); pixel-space work happens
behind the operations. Tracks are immutable; every operation returns a
new VideoTracks.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Iterator, Mapping, Sequence

from .errors import MissingHomography
from .geometry import BBox, Homography, transform_bbox

DEFAULT_FPS = Fraction(30000, 1001)


@dataclass(frozen=True)
class Detection:
    bbox: BBox  # normalized to frame size
    cls: int
    score: float


@dataclass(frozen=True)
class TrackPoint:
    frame: int
    track_id: int
    detection: Detection
    visible: bool = False


@dataclass(frozen=True)
class VideoTracks:
    frame_width: int
    frame_height: int
    fps: Fraction
    points: tuple[TrackPoint, ...]  # sorted by (track_id, frame)
    n_frames: int

    @property
    def frame_size(self) -> tuple[int, int]:
        return (self.frame_width, self.frame_height)

    def by_id(self) -> dict[int, list[TrackPoint]]:
        groups: dict[int, list[TrackPoint]] = {}
        for p in self.points:
            groups.setdefault(p.track_id, []).append(p)
        return groups

    def by_frame(self) -> dict[int, list[TrackPoint]]:
        groups: dict[int, list[TrackPoint]] = {}
        for p in self.points:
            groups.setdefault(p.frame, []).append(p)
        return groups

    def tracks(self) -> Iterator[tuple[int, list[TrackPoint]]]:
        yield from sorted(self.by_id().items())


def bbox_iou(a: BBox, b: BBox) -> float:
    """Intersection over union of two axis-aligned boxes."""
    ix = min(a.xmax, b.xmax) - max(a.xmin, b.xmin)
    iy = min(a.ymax, b.ymax) - max(a.ymin, b.ymin)
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    union = a.w * a.h + b.w * b.h - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def ingest_keep_indices(
    dets: Sequence[Detection], score_min: float, nms_iou: float
) -> list[int]:
    """Indices surviving the confidence cut and greedy class-agnostic NMS.

    Boxes are visited by descending score (input order on ties); a box is
    dropped when its IoU with an already kept box exceeds ``nms_iou``.
    Returned indices preserve input order.
    """
    if not 0.0 < score_min < 1.0:
        raise ValueError("score_min must be in (0, 1)")
    if not 0.0 < nms_iou < 1.0:
        raise ValueError("nms_iou must be in (0, 1)")
    candidates = [i for i, d in enumerate(dets) if d.score >= score_min]
    order = sorted(candidates, key=lambda i: -dets[i].score)
    kept: list[int] = []
    for i in order:
        if all(bbox_iou(dets[i].bbox, dets[j].bbox) <= nms_iou for j in kept):
            kept.append(i)
    return sorted(kept)


def ingest_filter(
    dets: Sequence[Detection], score_min: float, nms_iou: float
) -> list[Detection]:
    """Apply the confidence threshold plus class-agnostic NMS to one frame."""
    return [dets[i] for i in ingest_keep_indices(dets, score_min, nms_iou)]


def refine_classes(tracks: VideoTracks) -> VideoTracks:
    """Give every point of a track the class with the largest score mass.

    For each id the winning class maximizes the sum of confidence scores
    over the frames where the id carried that class; ties go to the
    lowest class index. Scores and geometry are untouched.
    """
    sums: dict[int, dict[int, float]] = {}
    for p in tracks.points:
        per_cls = sums.setdefault(p.track_id, {})
        per_cls[p.detection.cls] = per_cls.get(p.detection.cls, 0.0) + p.detection.score

    winner: dict[int, int] = {}
    for tid, per_cls in sums.items():
        best = max(per_cls.values())
        winner[tid] = min(c for c, s in per_cls.items() if s == best)

    new_points = tuple(
        p
        if p.detection.cls == winner[p.track_id]
        else replace(p, detection=replace(p.detection, cls=winner[p.track_id]))
        for p in tracks.points
    )
    return replace(tracks, points=new_points)


def bbox_visible_px(
    box: BBox, frame_size: tuple[int, int], margin: float
) -> bool:
    """Strict interior test for a pixel-space box against frame borders."""
    w_img, h_img = frame_size
    return (
        box.cx - box.w / 2 > margin
        and box.cx + box.w / 2 < w_img - (margin + 1)
        and box.cy - box.h / 2 > margin
        and box.cy + box.h / 2 < h_img - (margin + 1)
    )


def denormalize_bbox(box: BBox, frame_size: tuple[int, int]) -> BBox:
    w_img, h_img = frame_size
    return BBox(box.cx * w_img, box.cy * h_img, box.w * w_img, box.h * h_img)


def normalize_bbox(box: BBox, frame_size: tuple[int, int]) -> BBox:
    w_img, h_img = frame_size
    return BBox(box.cx / w_img, box.cy / h_img, box.w / w_img, box.h / h_img)


def visibility_flag(
    p: TrackPoint, frame_size: tuple[int, int], margin: float
) -> bool:
    """True when the point's box sits strictly inside the frame margins."""
    return bbox_visible_px(
        denormalize_bbox(p.detection.bbox, frame_size), frame_size, margin
    )


def stabilize_tracks(
    tracks: VideoTracks,
    per_frame_h: Mapping[int, Homography],
    visibility_margin: float = 4.0,
) -> VideoTracks:
    """Map every box into the reference frame of the video's first frame.

    ``per_frame_h`` must cover every frame >= 2 that carries points; frame 1
    defaults to the identity. Output boxes are re-normalized by the frame
    size (centers may leave [0, 1] when motion exits the reference extent).
    Visibility flags are recomputed on the un-stabilized boxes, since frame
    borders are physical only in the original footage.
    """
    identity = Homography.identity()
    new_points = []
    for p in tracks.points:
        h = per_frame_h.get(p.frame)
        if h is None:
            if p.frame == 1:
                h = identity
            else:
                raise MissingHomography(p.frame)
        box_px = denormalize_bbox(p.detection.bbox, tracks.frame_size)
        stab_px = transform_bbox(h, box_px)
        visible = bbox_visible_px(box_px, tracks.frame_size, visibility_margin)
        new_points.append(
            replace(
                p,
                detection=replace(
                    p.detection, bbox=normalize_bbox(stab_px, tracks.frame_size)
                ),
                visible=visible,
            )
        )
    return replace(tracks, points=tuple(new_points))
