"""Shared fixture builders for unit, CLI, and acceptance tests."""
from __future__ import annotations

import csv
import json
from fractions import Fraction
from pathlib import Path

import pytest

from skytraj.geometry import BBox, Homography
from skytraj.trackmodel import Detection, TrackPoint, VideoTracks

FRAME_W, FRAME_H = 3840, 2160
FPS = Fraction(30000, 1001)

# Camera drift of frame k relative to the reference frame, in pixels.
def drift(frame: int) -> tuple[float, float]:
    return (2.0 * (frame - 1), -1.0 * (frame - 1))


def make_point(
    frame: int,
    track_id: int,
    cx_px: float,
    cy_px: float,
    w_px: float,
    h_px: float,
    cls: int = 0,
    score: float = 0.9,
    frame_size=(FRAME_W, FRAME_H),
) -> TrackPoint:
    w_img, h_img = frame_size
    return TrackPoint(
        frame=frame,
        track_id=track_id,
        detection=Detection(
            BBox(cx_px / w_img, cy_px / h_img, w_px / w_img, h_px / h_img),
            cls,
            score,
        ),
    )


def make_tracks(points, frame_size=(FRAME_W, FRAME_H), fps=FPS, n_frames=None):
    pts = tuple(sorted(points, key=lambda p: (p.track_id, p.frame)))
    if n_frames is None:
        n_frames = max((p.frame for p in pts), default=0)
    return VideoTracks(
        frame_width=frame_size[0],
        frame_height=frame_size[1],
        fps=fps,
        points=pts,
        n_frames=n_frames,
    )


def scenario_points() -> list[TrackPoint]:
    """Deterministic multi-vehicle scenario in raw (drifting camera) pixels.

    Vehicle 1: 20 frames, moves +x by 25 px/frame in the reference frame,
               constant 180x80 box, fully visible -> azimuth-path dims.
    Vehicle 2: 15 frames (excluded by the export length filter).
    Vehicle 3: 18 frames, parked at (1000, 500) ref px, 160x80 box,
               one misclassified frame -> ratio-path dims, zero speed.
    Vehicle 4: 16 frames with score 0.2 -> removed by the ingest filter.
    """
    pts: list[TrackPoint] = []
    for k in range(1, 21):
        dx, dy = drift(k)
        ref_x = 600.0 + 25.0 * (k - 1)
        pts.append(make_point(k, 1, ref_x - dx, 1080.0 - dy, 180.0, 80.0, cls=0))
    for k in range(1, 16):
        dx, dy = drift(k)
        pts.append(
            make_point(k, 2, 3000.0 - dx, (200.0 + 30.0 * k) - dy, 100.0, 60.0, cls=2)
        )
    for k in range(1, 19):
        dx, dy = drift(k)
        cls, score = (2, 0.9) if k == 5 else (0, 0.8)
        pts.append(
            make_point(k, 3, 1000.0 - dx, 500.0 - dy, 160.0, 80.0, cls=cls, score=score)
        )
    for k in range(1, 17):
        dx, dy = drift(k)
        pts.append(
            make_point(k, 4, 2500.0 - dx, 1500.0 - dy, 120.0, 60.0, cls=1, score=0.2)
        )
    return pts


def write_tracks_csv(path: Path, points) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["frame", "id", "cx", "cy", "w", "h", "class", "score"])
        for p in sorted(points, key=lambda q: (q.track_id, q.frame)):
            b = p.detection.bbox
            writer.writerow(
                [p.frame, p.track_id, repr(b.cx), repr(b.cy), repr(b.w), repr(b.h),
                 p.detection.cls, repr(p.detection.score)]
            )


def write_sidecar(path: Path, n_frames=20) -> None:
    path.write_text(
        f"frame_width: {FRAME_W}\nframe_height: {FRAME_H}\n"
        f"fps: 30000/1001\nn_frames: {n_frames}\n"
    )


def write_homography_log_for_drift(path: Path, frames) -> None:
    from skytraj.dataio import write_homography_log

    write_homography_log(
        {k: Homography.translation(*drift(k)) for k in frames}, path
    )


def write_registry(path: Path) -> None:
    path.write_text(
        "# test registry\n"
        "intersection L\n"
        "master_to_ortho 1 0 100 0 1 200 0 0 1\n"
        "geo_local 0.02725 0 0 0.02725 300 400\n"
        "geo_wgs 1e-06 0 0 1e-06 37.38 126.64\n"
        "\n"
        "video L1 L\n"
        "ref_to_master 1 0 50 0 1 -30 0 0 1\n"
    )


def write_segmentation(path: Path) -> None:
    data = [
        {
            "section": "2_1",
            "lane": 1,
            "polygon": [[700, 1200], [1000, 1200], [1000, 1300], [700, 1300]],
        },
        {
            "section": "2_1",
            "lane": 2,
            "polygon": [[1000, 1200], [1800, 1200], [1800, 1300], [1000, 1300]],
        },
    ]
    path.write_text(json.dumps(data))


def build_pipeline_fixture(root: Path) -> dict[str, Path]:
    """Write the full scenario to disk; returns the path map for the CLI."""
    root.mkdir(parents=True, exist_ok=True)
    paths = {
        "tracks": root / "tracks.csv",
        "sidecar": root / "video.yaml",
        "homographies": root / "homographies.txt",
        "registry": root / "registry.txt",
        "segmentation": root / "segments.json",
        "output": root / "out.csv",
    }
    write_tracks_csv(paths["tracks"], scenario_points())
    write_sidecar(paths["sidecar"])
    write_homography_log_for_drift(paths["homographies"], range(2, 21))
    write_registry(paths["registry"])
    write_segmentation(paths["segmentation"])
    return paths


PIPELINE_ARGS = [
    "--video-id", "L1",
    "--drone-id", "7",
    "--start-time", "08:00:00.000",
    "--date", "2022-10-04",
    "--intersection", "L",
    "--session", "AM1",
]


@pytest.fixture
def pipeline_fixture(tmp_path):
    return build_pipeline_fixture(tmp_path / "fixture")
