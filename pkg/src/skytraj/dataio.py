"""File formats: track CSVs, correspondence CSVs, homography and
geotransform text files, the georeference registry, lane segmentation
JSON, YAML configs, and the final trajectory CSV export.

Conventions: CSVs are comma-separated UTF-8 with Unix newlines and a
header row. Homographies serialize as 9 whitespace-separated numbers
(row-major), geotransforms as 6 numbers ``a b c d tx ty`` meaning
x' = a*x + b*y + tx, y' = c*x + d*y + ty. A 6-line ESRI-style world
file is also accepted for geotransforms; its line order is a, c, b, d,
tx, ty (x-scale, y-shear, x-shear, y-scale, then the offsets).
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import yaml

from .campaign import CellResult
from .errors import InvariantViolation, IoFailure, ParseError
from .geometry import GeoTransform, Homography, Point2, BBox
from .georeference import (
    GeoRegistry,
    IntersectionEntry,
    LanePolygon,
    SegmentationMap,
    VideoEntry,
)
from .metrics import GroupReport
from .registration import Correspondence
from .trackmodel import DEFAULT_FPS, Detection, TrackPoint, VideoTracks

TRACK_COLUMNS = ["frame", "id", "cx", "cy", "w", "h", "class", "score"]

EXPORT_COLUMNS = [
    "Vehicle_ID",
    "Local_Time",
    "Drone_ID",
    "Ortho_X",
    "Ortho_Y",
    "Local_X",
    "Local_Y",
    "Latitude",
    "Longitude",
    "Vehicle_Length",
    "Vehicle_Width",
    "Vehicle_Class",
    "Vehicle_Speed",
    "Vehicle_Acceleration",
    "Road_Section",
    "Lane_Number",
    "Visibility",
]

# Vehicles need more than this many points to be exported.
MIN_EXPORT_POINTS = 15


def parse_fps(value) -> Fraction:
    """Accept '30000/1001', integers, or decimal strings/floats."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(str(value))
    text = str(value).strip()
    if "/" in text:
        num, den = text.split("/", 1)
        return Fraction(int(num), int(den))
    return Fraction(text)


def load_yaml(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ParseError(f"invalid YAML in {path}: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ParseError(f"{path}: top level must be a mapping")
    return data


@dataclass(frozen=True)
class VideoSidecar:
    frame_width: int
    frame_height: int
    fps: Fraction
    n_frames: int | None = None
    n_classes: int = 4


def load_sidecar(path) -> VideoSidecar:
    data = load_yaml(path)
    try:
        return VideoSidecar(
            frame_width=int(data["frame_width"]),
            frame_height=int(data["frame_height"]),
            fps=parse_fps(data.get("fps", DEFAULT_FPS)),
            n_frames=int(data["n_frames"]) if "n_frames" in data else None,
            n_classes=int(data.get("n_classes", 4)),
        )
    except KeyError as exc:
        raise ParseError(f"{path}: missing sidecar key {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{path}: bad sidecar value: {exc}") from exc


def _open_reader(path):
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    return fh


def load_tracks(
    path, sidecar: VideoSidecar | str | Path, *, require_unit_range: bool = True
) -> VideoTracks:
    """Read a per-video track CSV, validating every row.

    Columns: frame,id,cx,cy,w,h,class,score (normalized floats), plus an
    optional 0/1 ``visible`` column as written by the stabilize stage.
    Malformed rows raise ParseError, out-of-range values
    InvariantViolation; both carry the 1-based line number. Stabilized
    tracks may leave the unit square, so their consumers pass
    ``require_unit_range=False``.
    """
    if not isinstance(sidecar, VideoSidecar):
        sidecar = load_sidecar(sidecar)
    points: list[TrackPoint] = []
    seen: set[tuple[int, int]] = set()
    with _open_reader(path) as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in TRACK_COLUMNS if c not in header]
        if missing:
            raise ParseError(f"{path}: missing columns {missing}", line=1)
        has_visible = "visible" in header
        for row in reader:
            line = reader.line_num
            try:
                frame = int(row["frame"])
                track_id = int(row["id"])
                cx = float(row["cx"])
                cy = float(row["cy"])
                w = float(row["w"])
                h = float(row["h"])
                cls = int(row["class"])
                score = float(row["score"])
                visible = bool(int(row["visible"])) if has_visible else False
            except (TypeError, ValueError, KeyError) as exc:
                raise ParseError(f"malformed row: {exc}", line=line) from exc
            if frame < 1:
                raise InvariantViolation("frame must be >= 1", line=line)
            if sidecar.n_frames is not None and frame > sidecar.n_frames:
                raise InvariantViolation(
                    f"frame {frame} exceeds n_frames {sidecar.n_frames}", line=line
                )
            if track_id < 1:
                raise InvariantViolation("id must be >= 1", line=line)
            if require_unit_range:
                for name, v in (("cx", cx), ("cy", cy), ("w", w), ("h", h)):
                    if not 0.0 <= v <= 1.0:
                        raise InvariantViolation(
                            f"{name}={v} outside [0, 1]", line=line
                        )
            elif w < 0 or h < 0:
                raise InvariantViolation("box size must be >= 0", line=line)
            if not 0 <= cls < sidecar.n_classes:
                raise InvariantViolation(
                    f"class {cls} outside 0..{sidecar.n_classes - 1}", line=line
                )
            if not 0.0 < score <= 1.0:
                raise InvariantViolation(f"score {score} outside (0, 1]", line=line)
            if (track_id, frame) in seen:
                raise InvariantViolation(
                    f"duplicate point for id {track_id} frame {frame}", line=line
                )
            seen.add((track_id, frame))
            points.append(
                TrackPoint(
                    frame=frame,
                    track_id=track_id,
                    detection=Detection(BBox(cx, cy, w, h), cls, score),
                    visible=visible,
                )
            )
    points.sort(key=lambda p: (p.track_id, p.frame))
    n_frames = sidecar.n_frames
    if n_frames is None:
        n_frames = max((p.frame for p in points), default=0)
    return VideoTracks(
        frame_width=sidecar.frame_width,
        frame_height=sidecar.frame_height,
        fps=sidecar.fps,
        points=tuple(points),
        n_frames=n_frames,
    )


def write_tracks(tracks: VideoTracks, path) -> None:
    """Write tracks at full float precision, including the visible flag."""
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(TRACK_COLUMNS + ["visible"])
            for p in tracks.points:
                b = p.detection.bbox
                writer.writerow(
                    [
                        p.frame,
                        p.track_id,
                        repr(b.cx),
                        repr(b.cy),
                        repr(b.w),
                        repr(b.h),
                        p.detection.cls,
                        repr(p.detection.score),
                        int(p.visible),
                    ]
                )
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def load_correspondences(path) -> list[Correspondence]:
    """CSV with columns src_x,src_y,dst_x,dst_y and optional d1,d2."""
    out: list[Correspondence] = []
    with _open_reader(path) as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        required = ["src_x", "src_y", "dst_x", "dst_y"]
        missing = [c for c in required if c not in header]
        if missing:
            raise ParseError(f"{path}: missing columns {missing}", line=1)
        has_dist = "d1" in header and "d2" in header
        for row in reader:
            line = reader.line_num
            try:
                src = Point2(float(row["src_x"]), float(row["src_y"]))
                dst = Point2(float(row["dst_x"]), float(row["dst_y"]))
                d1 = d2 = None
                if has_dist and row["d1"] not in (None, "") and row["d2"] not in (None, ""):
                    d1, d2 = float(row["d1"]), float(row["d2"])
            except (TypeError, ValueError) as exc:
                raise ParseError(f"malformed row: {exc}", line=line) from exc
            if d1 is not None:
                if d1 < 0 or d2 < 0:
                    raise InvariantViolation("distances must be >= 0", line=line)
                if d1 > d2:
                    raise InvariantViolation("d1 must be <= d2", line=line)
            out.append(Correspondence(src, dst, d1, d2))
    return out


def _parse_floats(tokens: Sequence[str], n: int, line: int, what: str) -> list[float]:
    if len(tokens) != n:
        raise ParseError(f"{what} needs {n} numbers, got {len(tokens)}", line=line)
    try:
        return [float(t) for t in tokens]
    except ValueError as exc:
        raise ParseError(f"bad number in {what}: {exc}", line=line) from exc


def homography_from_row(values: Sequence[float]) -> Homography:
    return Homography.from_matrix([values[0:3], values[3:6], values[6:9]])


def homography_to_row(h: Homography) -> list[float]:
    return [float(v) for v in h.m.reshape(-1)]


def geotransform_from_row(values: Sequence[float]) -> GeoTransform:
    a, b, c, d, tx, ty = values
    return GeoTransform(a, b, c, d, tx, ty)


def load_world_file(path) -> GeoTransform:
    """Six-line world file; lines are a, c, b, d, tx, ty."""
    with _open_reader(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    vals = _parse_floats(lines, 6, 1, "world file")
    a, c, b, d, tx, ty = vals
    return GeoTransform(a, b, c, d, tx, ty)


def load_homography_log(path) -> dict[int, Homography]:
    """Per-frame homographies: each line is a frame index plus 9 numbers."""
    out: dict[int, Homography] = {}
    with _open_reader(path) as fh:
        for i, raw in enumerate(fh, start=1):
            text = raw.split("#", 1)[0].strip()
            if not text:
                continue
            tokens = text.split()
            try:
                frame = int(tokens[0])
            except ValueError as exc:
                raise ParseError(f"bad frame index: {exc}", line=i) from exc
            vals = _parse_floats(tokens[1:], 9, i, "homography row")
            if frame in out:
                raise InvariantViolation(f"duplicate frame {frame}", line=i)
            out[frame] = homography_from_row(vals)
    return out


def write_homography_log(homs: Mapping[int, Homography], path) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            for frame in sorted(homs):
                row = " ".join(repr(v) for v in homography_to_row(homs[frame]))
                fh.write(f"{frame} {row}\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def load_registry(path) -> GeoRegistry:
    """Plain-text registry of per-intersection and per-video transforms.

    Blocks:
        intersection <label>
        master_to_ortho <9 numbers>
        geo_local <6 numbers>
        geo_wgs <6 numbers>

        video <video_id> <intersection_label>
        ref_to_master <9 numbers>

    Lines starting with '#' and blank lines are ignored.
    """
    intersections: dict[str, IntersectionEntry] = {}
    videos: dict[str, VideoEntry] = {}
    pending_kind: str | None = None
    pending: dict = {}

    def flush(line: int):
        nonlocal pending_kind, pending
        if pending_kind is None:
            return
        if pending_kind == "intersection":
            needed = ("master_to_ortho", "geo_local", "geo_wgs")
            if any(k not in pending for k in needed):
                raise ParseError(
                    f"intersection {pending.get('label')!r} incomplete", line=line
                )
            intersections[pending["label"]] = IntersectionEntry(
                master_to_ortho=pending["master_to_ortho"],
                geo_local=pending["geo_local"],
                geo_wgs=pending["geo_wgs"],
            )
        else:
            if "ref_to_master" not in pending:
                raise ParseError(f"video {pending.get('label')!r} incomplete", line=line)
            videos[pending["label"]] = VideoEntry(
                intersection=pending["intersection"],
                ref_to_master=pending["ref_to_master"],
            )
        pending_kind, pending = None, {}

    with _open_reader(path) as fh:
        line_no = 0
        for line_no, raw in enumerate(fh, start=1):
            text = raw.split("#", 1)[0].strip()
            if not text:
                continue
            tokens = text.split()
            key = tokens[0]
            if key == "intersection":
                flush(line_no)
                if len(tokens) != 2:
                    raise ParseError("intersection needs a label", line=line_no)
                pending_kind, pending = "intersection", {"label": tokens[1]}
            elif key == "video":
                flush(line_no)
                if len(tokens) != 3:
                    raise ParseError(
                        "video needs an id and an intersection label", line=line_no
                    )
                pending_kind = "video"
                pending = {"label": tokens[1], "intersection": tokens[2]}
            elif key == "master_to_ortho" and pending_kind == "intersection":
                pending["master_to_ortho"] = homography_from_row(
                    _parse_floats(tokens[1:], 9, line_no, key)
                )
            elif key in ("geo_local", "geo_wgs") and pending_kind == "intersection":
                pending[key] = geotransform_from_row(
                    _parse_floats(tokens[1:], 6, line_no, key)
                )
            elif key == "ref_to_master" and pending_kind == "video":
                pending["ref_to_master"] = homography_from_row(
                    _parse_floats(tokens[1:], 9, line_no, key)
                )
            else:
                raise ParseError(f"unexpected directive {key!r}", line=line_no)
        flush(line_no)

    for vid, entry in videos.items():
        if entry.intersection not in intersections:
            raise ParseError(
                f"video {vid!r} references unknown intersection {entry.intersection!r}"
            )
    return GeoRegistry(intersections=intersections, videos=videos)


def load_segmentation(path) -> SegmentationMap:
    """JSON list of {section, lane, polygon: [[x, y], ...]} in ortho pixels."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(data, list):
        raise ParseError(f"{path}: segmentation must be a JSON list")
    lanes = []
    for i, item in enumerate(data):
        try:
            section = str(item["section"])
            lane = int(item["lane"])
            polygon = tuple(Point2(float(x), float(y)) for x, y in item["polygon"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"{path}: bad segmentation entry {i}: {exc}") from exc
        if lane < 1:
            raise InvariantViolation(f"{path}: lane numbers start at 1 (entry {i})")
        if len(polygon) < 3:
            raise InvariantViolation(f"{path}: polygon {i} needs >= 3 vertices")
        lanes.append(LanePolygon(section=section, lane=lane, polygon=polygon))
    return SegmentationMap(lanes=tuple(lanes))


@dataclass(frozen=True)
class SessionMeta:
    drone_id: int
    start_time: str  # 'HH:MM:SS.sss', optionally prefixed 'YYYY-MM-DDT'
    fps: Fraction
    intersection: str
    date: str = ""
    session: str = ""

    def __post_init__(self):
        if not 1 <= self.drone_id <= 10:
            raise ValueError("drone_id must be in 1..10")
        if self.fps <= 0:
            raise ValueError("fps must be positive")


def _parse_clock(text: str) -> Fraction:
    clock = text.split("T")[-1].split(" ")[-1]
    parts = clock.split(":")
    if len(parts) != 3:
        raise ValueError(f"bad clock string {text!r}")
    hours, minutes, seconds = Fraction(parts[0]), Fraction(parts[1]), Fraction(parts[2])
    return hours * 3600 + minutes * 60 + seconds


def frame_to_timestamp(frame: int, meta: SessionMeta) -> str:
    """Local wall-clock time of a frame, 'hh:mm:ss.sss'.

    Exact rational arithmetic in the frame rate; milliseconds truncate
    toward zero, and the clock wraps at midnight.
    """
    if frame < 1:
        raise ValueError("frame must be >= 1")
    total = _parse_clock(meta.start_time) + Fraction(frame - 1) / meta.fps
    total_ms = int(total * 1000) % (24 * 3600 * 1000)
    hours, rem = divmod(total_ms, 3_600_000)
    minutes, rem = divmod(rem, 60_000)
    seconds, millis = divmod(rem, 1000)
    return f"{hours:02d}:{minutes:02d}:{seconds:02d}.{millis:03d}"


def songdo_filename(meta: SessionMeta) -> str:
    return f"{meta.date}_{meta.intersection}_{meta.session}.csv"


@dataclass(frozen=True)
class ExportRow:
    """One exported trajectory point. ``frame`` orders rows, it is not a column."""

    vehicle_id: int
    frame: int
    local_time: str
    drone_id: int
    ortho_x: float
    ortho_y: float
    local_x: float
    local_y: float
    latitude: float
    longitude: float
    length_m: float | None
    width_m: float | None
    vehicle_class: int
    speed_kmh: float | None
    accel_ms2: float | None
    road_section: str | None
    lane_number: int | None
    visibility: bool


def format_fixed(value: float | None, places: int) -> str:
    """Fixed-point decimal string, ties rounded away from zero; '' for None."""
    if value is None:
        return ""
    quantum = Decimal(1).scaleb(-places)
    d = Decimal(repr(float(value))).quantize(quantum, rounding=ROUND_HALF_UP)
    if d == 0:
        d = abs(d)  # avoid '-0.00'
    return f"{d:.{places}f}"


def _export_cells(row: ExportRow) -> list[str]:
    return [
        str(row.vehicle_id),
        row.local_time,
        str(row.drone_id),
        format_fixed(row.ortho_x, 1),
        format_fixed(row.ortho_y, 1),
        format_fixed(row.local_x, 2),
        format_fixed(row.local_y, 2),
        format_fixed(row.latitude, 7),
        format_fixed(row.longitude, 7),
        format_fixed(row.length_m, 2),
        format_fixed(row.width_m, 2),
        str(row.vehicle_class),
        format_fixed(row.speed_kmh, 1),
        format_fixed(row.accel_ms2, 2),
        row.road_section or "",
        str(row.lane_number) if row.lane_number is not None else "",
        str(int(row.visibility)),
    ]


def export_songdo(rows: Iterable[ExportRow], destination) -> None:
    """Write the final trajectory CSV.

    Vehicles with 15 or fewer points are dropped; remaining rows are
    stable-sorted by (vehicle id, frame). Column rounding: ortho pixels
    1 d.p., local meters 2 d.p., lat/lon 7 d.p., dimensions 2 d.p.,
    speed (km/h) 1 d.p., acceleration 2 d.p. Optional values serialize
    as empty cells.
    """
    rows = list(rows)
    counts: dict[int, int] = {}
    for r in rows:
        counts[r.vehicle_id] = counts.get(r.vehicle_id, 0) + 1
    kept = [r for r in rows if counts[r.vehicle_id] > MIN_EXPORT_POINTS]
    kept.sort(key=lambda r: (r.vehicle_id, r.frame))
    try:
        with open(destination, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(EXPORT_COLUMNS)
            for r in kept:
                writer.writerow(_export_cells(r))
    except OSError as exc:
        raise IoFailure(f"cannot write {destination}: {exc}") from exc


CAMPAIGN_COLUMNS = [
    "snn_ratio",
    "downscale",
    "reproj_threshold",
    "n_points",
    "hea",
    "miou",
    "trials",
]


def write_campaign_results(
    results: Sequence[CellResult], path, timing_path=None
) -> None:
    """Results CSV holds only seed-determined values so reruns are
    byte-identical; per-cell mean estimator time goes to a sidecar file."""
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CAMPAIGN_COLUMNS)
            for r in results:
                writer.writerow(
                    [
                        "" if r.snn_ratio is None else repr(r.snn_ratio),
                        repr(r.downscale),
                        repr(r.reproj_threshold),
                        r.n_points,
                        repr(r.hea),
                        repr(r.miou),
                        r.trials,
                    ]
                )
        if timing_path is not None:
            with open(timing_path, "w", encoding="utf-8", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(CAMPAIGN_COLUMNS[:4] + ["mean_time_ms"])
                for r in results:
                    writer.writerow(
                        [
                            "" if r.snn_ratio is None else repr(r.snn_ratio),
                            repr(r.downscale),
                            repr(r.reproj_threshold),
                            r.n_points,
                            format_fixed(r.mean_time_ms, 3),
                        ]
                    )
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _read_csv_rows(path, required: list[str]):
    with _open_reader(path) as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in required if c not in header]
        if missing:
            raise ParseError(f"{path}: missing columns {missing}", line=1)
        for row in reader:
            yield reader.line_num, row


def load_probe_trajectory(path) -> list[tuple[float, Point2, float]]:
    """Probe CSV: t,x,y,speed (local meters, speed in km/h)."""
    out = []
    for line, row in _read_csv_rows(path, ["t", "x", "y", "speed"]):
        try:
            out.append(
                (
                    float(row["t"]),
                    Point2(float(row["x"]), float(row["y"])),
                    float(row["speed"]),
                )
            )
        except (TypeError, ValueError) as exc:
            raise ParseError(f"malformed row: {exc}", line=line) from exc
    return out


def load_candidate_trajectory(path) -> list[tuple[int, Point2, float]]:
    """Candidate CSV: frame,x,y,speed (local meters, smoothed speed km/h)."""
    out = []
    for line, row in _read_csv_rows(path, ["frame", "x", "y", "speed"]):
        try:
            out.append(
                (
                    int(row["frame"]),
                    Point2(float(row["x"]), float(row["y"])),
                    float(row["speed"]),
                )
            )
        except (TypeError, ValueError) as exc:
            raise ParseError(f"malformed row: {exc}", line=line) from exc
    out.sort(key=lambda item: item[0])
    return out


def load_local_trajectories(
    path,
) -> tuple[dict[int, dict[int, Point2]], dict[int, set[int]]]:
    """Local-coordinate trajectories CSV: id,frame,x,y with optional visible.

    Returns per-vehicle frame->point maps plus per-vehicle visible frame
    sets (all frames visible when the column is absent).
    """
    points: dict[int, dict[int, Point2]] = {}
    visible: dict[int, set[int]] = {}
    for line, row in _read_csv_rows(path, ["id", "frame", "x", "y"]):
        try:
            vid = int(row["id"])
            frame = int(row["frame"])
            pt = Point2(float(row["x"]), float(row["y"]))
            vis = int(row.get("visible") or 1)
        except (TypeError, ValueError) as exc:
            raise ParseError(f"malformed row: {exc}", line=line) from exc
        if frame in points.setdefault(vid, {}):
            raise InvariantViolation(
                f"duplicate frame {frame} for id {vid}", line=line
            )
        points[vid][frame] = pt
        if vis:
            visible.setdefault(vid, set()).add(frame)
        else:
            visible.setdefault(vid, set())
    return points, visible


COMPARISON_COLUMNS = [
    "group",
    "samples",
    "pos_dev_mean_m",
    "pos_dev_std_m",
    "speed_diff_mean_kmh",
    "speed_diff_std_kmh",
    "traj_length_m",
    "traj_duration_s",
    "skipped",
]


def write_comparison_report(reports: Sequence[GroupReport], path) -> None:
    """Mean +/- population sd per group, plus trajectory length/duration."""
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(COMPARISON_COLUMNS)
            for r in reports:
                writer.writerow(
                    [
                        r.key,
                        r.n_samples,
                        format_fixed(r.pos_dev_mean_m, 3),
                        format_fixed(r.pos_dev_std_m, 3),
                        format_fixed(r.speed_diff_mean_kmh, 3),
                        format_fixed(r.speed_diff_std_kmh, 3),
                        format_fixed(r.traj_length_m, 2),
                        format_fixed(r.traj_duration_s, 2),
                        r.skipped,
                    ]
                )
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
