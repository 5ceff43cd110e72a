"""Command-line front end.

Subcommands: stabilize, pipeline, bench, compare, dims, kinematics,
georef. Every scalar parameter can come from a YAML config file
(--config) and be overridden by a command-line flag; precedence is
flag > config > built-in default. Diagnostics go to stderr, data to
files; the exit code is 0 only when no stage failed.
"""
from __future__ import annotations

import argparse
import csv
import math
import sys
from fractions import Fraction
from pathlib import Path

from . import campaign as camp
from . import dataio
from .dimensions import DimConfig, estimate_dimensions
from .errors import SkytrajError
from .geometry import Point2, apply_homography, pixel_to_world
from .georeference import assign_segment, compose_ref_to_ortho
from .kinematics import KinematicsConfig, compute_profile, gate_by_visibility
from .metrics import aggregate_comparison
from .pipeline import (
    IngestParams,
    StabilizeParams,
    build_comparison_samples,
    estimate_frame_homographies,
    log,
    run_pipeline,
)
from .trackmodel import denormalize_bbox, stabilize_tracks


def _cfg_get(cfg: dict, dotted: str, cli_value, default):
    """Resolve one parameter: CLI flag > config entry > default."""
    if cli_value is not None:
        return cli_value
    node = cfg
    for part in dotted.split("."):
        if not isinstance(node, dict) or part not in node:
            return default
        node = node[part]
    return node if node is not None else default


def _paths_get(cfg: dict, key: str, cli_value, required: bool = True):
    value = _cfg_get(cfg, f"paths.{key}", cli_value, None)
    if value is None and required:
        raise SkytrajError(f"missing required path {key!r} (flag or config)")
    return value


def _load_config(args) -> dict:
    if getattr(args, "config", None):
        return dataio.load_yaml(args.config)
    return {}


def _stabilize_params(cfg: dict, args) -> StabilizeParams:
    return StabilizeParams(
        snn_ratio=_cfg_get(cfg, "stabilize.snn_ratio", args.snn_ratio, None),
        mask_margin=_cfg_get(cfg, "stabilize.mask_margin", args.mask_margin, 0.15),
        downscale=_cfg_get(cfg, "stabilize.downscale", args.downscale, 1.0),
        confidence=_cfg_get(cfg, "ransac.confidence", args.confidence, 0.999999),
        max_iterations=_cfg_get(cfg, "ransac.max_iterations", args.max_iterations, 5000),
        reproj_threshold=_cfg_get(
            cfg, "ransac.reproj_threshold", args.reproj_threshold, 2.0
        ),
    )


def _dims_config(cfg: dict, args) -> DimConfig:
    strict = bool(_cfg_get(cfg, "dimensions.strict", getattr(args, "strict", None), False))
    kwargs = dict(
        visibility_margin=_cfg_get(
            cfg, "dimensions.visibility_margin", getattr(args, "visibility_margin", None), 4.0
        ),
        min_travel_m=_cfg_get(
            cfg, "dimensions.min_travel_m", getattr(args, "min_travel_m", None), 1.25
        ),
        gsd=_cfg_get(cfg, "dimensions.gsd", getattr(args, "gsd", None), 0.02725),
    )
    if strict:
        tol = _cfg_get(
            cfg, "dimensions.azimuth_tolerance_deg", getattr(args, "azimuth_tolerance", None), 5.0
        )
        return DimConfig.strict(azimuth_tolerance_deg=tol, **kwargs)
    kwargs["azimuth_tolerance_deg"] = _cfg_get(
        cfg, "dimensions.azimuth_tolerance_deg", getattr(args, "azimuth_tolerance", None), 15.0
    )
    ratios = _cfg_get(cfg, "dimensions.ratio_thresholds", None, None)
    if ratios is not None:
        kwargs["ratio_thresholds"] = {
            int(k): float(v) for k, v in dict(ratios).items()
        }
    return DimConfig(**kwargs)


def _kin_config(cfg: dict, args, fps: Fraction) -> KinematicsConfig:
    return KinematicsConfig(
        sigma=_cfg_get(cfg, "kinematics.sigma", getattr(args, "sigma", None), 14.0),
        fps=fps,
        speed_floor_kmh=_cfg_get(
            cfg, "kinematics.speed_floor_kmh", getattr(args, "speed_floor", None), 1.0
        ),
    )


def _session_meta(cfg: dict, args, fps: Fraction) -> dataio.SessionMeta:
    return dataio.SessionMeta(
        drone_id=int(_cfg_get(cfg, "export.drone_id", args.drone_id, 1)),
        start_time=str(
            _cfg_get(cfg, "export.start_time", args.start_time, "00:00:00.000")
        ),
        fps=fps,
        intersection=str(_cfg_get(cfg, "export.intersection", args.intersection, "")),
        date=str(_cfg_get(cfg, "export.date", args.date, "")),
        session=str(_cfg_get(cfg, "export.session", args.session, "")),
    )


def _resolve_homographies(cfg, args, tracks, params, seed):
    hom_path = _paths_get(cfg, "homographies", args.homographies, required=False)
    corr_dir = _paths_get(cfg, "correspondences", args.correspondences, required=False)
    if hom_path is not None:
        return dataio.load_homography_log(hom_path), {}
    if corr_dir is not None:
        return estimate_frame_homographies(tracks, corr_dir, params, seed=seed)
    raise SkytrajError("need either a homography log or a correspondence directory")


def cmd_stabilize(args) -> int:
    cfg = _load_config(args)
    tracks = dataio.load_tracks(
        _paths_get(cfg, "tracks", args.tracks),
        _paths_get(cfg, "sidecar", args.sidecar),
    )
    params = _stabilize_params(cfg, args)
    seed = int(_cfg_get(cfg, "seed", args.seed, 0))
    homs, reports = _resolve_homographies(cfg, args, tracks, params, seed)
    for frame in sorted(reports):
        r = reports[frame]
        log(
            f"frame {frame}: {r.inlier_count}/{len(r.inlier_flags)} inliers, "
            f"mean error {r.mean_reproj_error:.4f} px, {r.iterations_run} iterations"
        )
    margin = _cfg_get(cfg, "dimensions.visibility_margin", args.visibility_margin, 4.0)
    stabilized = stabilize_tracks(tracks, homs, visibility_margin=margin)
    out = _paths_get(cfg, "output", args.output)
    dataio.write_tracks(stabilized, out)
    log_path = _cfg_get(cfg, "paths.homography_log", args.homography_log, None)
    if log_path is None and reports:
        # homographies were estimated here; keep them next to the output
        out_path = Path(out)
        log_path = out_path.with_name(out_path.stem + "_homographies.txt")
    if log_path:
        dataio.write_homography_log(homs, log_path)
        log(f"homography log written to {log_path}")
    return 0


def cmd_pipeline(args) -> int:
    cfg = _load_config(args)
    sidecar = dataio.load_sidecar(_paths_get(cfg, "sidecar", args.sidecar))
    tracks = dataio.load_tracks(_paths_get(cfg, "tracks", args.tracks), sidecar)
    registry = dataio.load_registry(_paths_get(cfg, "registry", args.registry))
    seg_path = _paths_get(cfg, "segmentation", args.segmentation, required=False)
    segmentation = dataio.load_segmentation(seg_path) if seg_path else None
    video_id = _cfg_get(cfg, "video_id", args.video_id, None)
    if video_id is None:
        raise SkytrajError("missing video_id (flag or config)")
    params = _stabilize_params(cfg, args)
    seed = int(_cfg_get(cfg, "seed", args.seed, 0))
    homs, _ = _resolve_homographies(cfg, args, tracks, params, seed)
    ingest = IngestParams(
        score_min=_cfg_get(cfg, "ingest.score_min", args.score_min, 0.25),
        nms_iou=_cfg_get(cfg, "ingest.nms_iou", args.nms_iou, 0.7),
    )
    rows = run_pipeline(
        tracks,
        homs,
        registry,
        str(video_id),
        segmentation,
        _session_meta(cfg, args, sidecar.fps),
        ingest,
        _dims_config(cfg, args),
        _kin_config(cfg, args, sidecar.fps),
        jobs=int(_cfg_get(cfg, "jobs", args.jobs, 1)),
    )
    dataio.export_songdo(rows, _paths_get(cfg, "output", args.output))
    log(f"exported {len(rows)} candidate rows")
    return 0


def cmd_bench(args) -> int:
    cfg = _load_config(args)
    bench = cfg.get("bench", {}) if isinstance(cfg.get("bench"), dict) else {}

    def opt(key, cli_value, default):
        return _cfg_get({"bench": bench}, f"bench.{key}", cli_value, default)

    scenes = camp.synthetic_scenes(
        int(opt("scenes", args.scenes, 29)), int(opt("scene_seed", None, 7))
    )
    ranges = camp.DistortionRanges(
        rot_max_deg=float(opt("rot_max_deg", None, 15.0)),
        trans_max_frac=float(opt("trans_max_frac", None, 0.10)),
        scale_max_frac=float(opt("scale_max_frac", None, 0.05)),
        persp_max=float(opt("persp_max", None, 5e-5)),
    )
    grid = camp.CampaignGrid(
        snn_ratios=tuple(opt("snn_ratios", None, [None])),
        downscales=tuple(opt("downscales", None, [1.0])),
        reproj_thresholds=tuple(opt("reproj_thresholds", None, [2.0])),
        point_counts=tuple(opt("point_counts", None, [100])),
        trials_per_scene=int(opt("trials_per_scene", args.trials, 100)),
    )
    results = camp.run_campaign(
        scenes,
        ranges,
        grid,
        confidence=float(opt("confidence", args.confidence, 0.999999)),
        max_iterations=int(opt("max_iterations", args.max_iterations, 5000)),
        noise_sigma=float(opt("noise_sigma", args.noise_sigma, 0.5)),
        outlier_fraction=float(opt("outlier_fraction", args.outlier_fraction, 0.3)),
        master_seed=int(_cfg_get(cfg, "seed", args.seed, 0)),
        hea_epsilon=float(opt("hea_epsilon", args.hea_epsilon, 3.0)),
        jobs=int(_cfg_get(cfg, "jobs", args.jobs, 1)),
    )
    out = Path(_paths_get(cfg, "output", args.output))
    timing = out.with_name(out.stem + "_timing" + out.suffix)
    dataio.write_campaign_results(results, out, timing_path=timing)
    log(f"wrote {len(results)} grid cells to {out} (timing in {timing})")
    return 0


def cmd_compare(args) -> int:
    cfg = _load_config(args)
    probe = dataio.load_probe_trajectory(_paths_get(cfg, "probe", args.probe))
    candidate_rows = dataio.load_candidate_trajectory(
        _paths_get(cfg, "candidate", args.candidate)
    )
    candidate = [(pt, speed) for _, pt, speed in candidate_rows]
    samples = build_comparison_samples(probe, candidate)
    fps = dataio.parse_fps(_cfg_get(cfg, "fps", args.fps, "30000/1001"))
    floor = float(_cfg_get(cfg, "kinematics.speed_floor_kmh", args.speed_floor, 1.0))
    group = str(_cfg_get(cfg, "compare.group", args.group, "all"))
    reports = aggregate_comparison({group: samples}, fps, speed_floor_kmh=floor)
    for r in reports:
        if r.skipped:
            log(f"group {r.key}: skipped {r.skipped} degenerate samples")
        if r.speed_diff_mean_kmh is None:
            log(
                f"group {r.key}: all probe speeds at or below {floor} km/h; "
                "speed-difference columns left empty"
            )
    dataio.write_comparison_report(reports, _paths_get(cfg, "output", args.output))
    return 0


def cmd_dims(args) -> int:
    cfg = _load_config(args)
    sidecar = dataio.load_sidecar(_paths_get(cfg, "sidecar", args.sidecar))
    raw = dataio.load_tracks(_paths_get(cfg, "tracks", args.tracks), sidecar)
    stab = dataio.load_tracks(
        _paths_get(cfg, "stabilized", args.stabilized),
        sidecar,
        require_unit_range=False,
    )
    registry = dataio.load_registry(_paths_get(cfg, "registry", args.registry))
    video_id = str(_cfg_get(cfg, "video_id", args.video_id, ""))
    dims_cfg = _dims_config(cfg, args)
    ref_to_ortho = compose_ref_to_ortho(registry, video_id)
    geo_local = registry.intersection_for(video_id).geo_local
    raw_by_id = raw.by_id()
    stab_by_id = stab.by_id()
    out = _paths_get(cfg, "output", args.output)
    with open(out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["id", "n_samples", "path", "length_px", "width_px", "length_m", "width_m"]
        )
        for tid in sorted(raw_by_id):
            est = estimate_dimensions(
                raw_by_id[tid],
                stab_by_id.get(tid, raw_by_id[tid]),
                dims_cfg,
                raw.frame_size,
                ref_to_ortho,
                geo_local,
            )
            if est is None:
                writer.writerow([tid, 0, "none", "", "", "", ""])
            else:
                writer.writerow(
                    [
                        tid,
                        est.n_samples,
                        est.path.value,
                        dataio.format_fixed(est.length_px, 2),
                        dataio.format_fixed(est.width_px, 2),
                        dataio.format_fixed(est.length_m, 2),
                        dataio.format_fixed(est.width_m, 2),
                    ]
                )
    return 0


def cmd_kinematics(args) -> int:
    cfg = _load_config(args)
    points, visible = dataio.load_local_trajectories(
        _paths_get(cfg, "input", args.input)
    )
    fps = dataio.parse_fps(_cfg_get(cfg, "fps", args.fps, "30000/1001"))
    kin = _kin_config(cfg, args, fps)
    out = _paths_get(cfg, "output", args.output)
    with open(out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "frame", "speed_ms", "speed_kmh", "accel_ms2"])
        for vid in sorted(points):
            if len(points[vid]) < 2:
                log(f"id {vid}: fewer than 2 points, skipped")
                continue
            profile = gate_by_visibility(
                compute_profile(points[vid], kin), visible[vid]
            )
            for i, frame in enumerate(profile.frames):
                if not profile.exported[i]:
                    continue
                smooth = profile.speed_smooth[i]
                accel = profile.accel[i]
                writer.writerow(
                    [
                        vid,
                        int(frame),
                        "" if math.isnan(smooth) else repr(float(smooth)),
                        dataio.format_fixed(
                            None if math.isnan(smooth) else float(smooth) * 3.6, 1
                        ),
                        dataio.format_fixed(
                            None if math.isnan(accel) else float(accel), 2
                        ),
                    ]
                )
    return 0


def cmd_georef(args) -> int:
    cfg = _load_config(args)
    sidecar = dataio.load_sidecar(_paths_get(cfg, "sidecar", args.sidecar))
    stab = dataio.load_tracks(
        _paths_get(cfg, "tracks", args.tracks), sidecar, require_unit_range=False
    )
    registry = dataio.load_registry(_paths_get(cfg, "registry", args.registry))
    seg_path = _paths_get(cfg, "segmentation", args.segmentation, required=False)
    segmentation = dataio.load_segmentation(seg_path) if seg_path else None
    video_id = str(_cfg_get(cfg, "video_id", args.video_id, ""))
    h = compose_ref_to_ortho(registry, video_id)
    inter = registry.intersection_for(video_id)
    out = _paths_get(cfg, "output", args.output)
    with open(out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["id", "frame", "ortho_x", "ortho_y", "local_x", "local_y",
             "latitude", "longitude", "section", "lane"]
        )
        for p in sorted(stab.points, key=lambda q: (q.track_id, q.frame)):
            box = denormalize_bbox(p.detection.bbox, stab.frame_size)
            ortho = apply_homography(h, Point2(box.cx, box.cy))
            local = pixel_to_world(inter.geo_local, ortho)
            wgs = pixel_to_world(inter.geo_wgs, ortho)
            seg = assign_segment(segmentation, ortho) if segmentation else None
            writer.writerow(
                [
                    p.track_id,
                    p.frame,
                    dataio.format_fixed(ortho.x, 1),
                    dataio.format_fixed(ortho.y, 1),
                    dataio.format_fixed(local.x, 2),
                    dataio.format_fixed(local.y, 2),
                    dataio.format_fixed(wgs.x, 7),
                    dataio.format_fixed(wgs.y, 7),
                    seg[0] if seg else "",
                    seg[1] if seg else "",
                ]
            )
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML config file")
    common.add_argument("--seed", type=int, help="master random seed")
    common.add_argument("--jobs", type=int, help="parallel workers (default 1)")
    common.add_argument("--output", help="output file path")

    parser = argparse.ArgumentParser(
        prog="skytraj",
        description="Drone-track stabilization, georeferencing, and benchmarking",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_ransac_flags(p):
        p.add_argument("--snn-ratio", type=float, dest="snn_ratio")
        p.add_argument("--mask-margin", type=float, dest="mask_margin")
        p.add_argument("--downscale", type=float)
        p.add_argument("--confidence", type=float)
        p.add_argument("--max-iterations", type=int, dest="max_iterations")
        p.add_argument("--reproj-threshold", type=float, dest="reproj_threshold")

    def add_dim_flags(p):
        p.add_argument("--visibility-margin", type=float, dest="visibility_margin")
        p.add_argument("--azimuth-tolerance", type=float, dest="azimuth_tolerance")
        p.add_argument("--min-travel-m", type=float, dest="min_travel_m")
        p.add_argument("--gsd", type=float)
        p.add_argument("--strict", action="store_const", const=True, default=None)

    p = sub.add_parser("stabilize", parents=[common], help="align tracks to frame 1")
    p.add_argument("--tracks")
    p.add_argument("--sidecar")
    p.add_argument("--correspondences", help="directory of per-frame <k>.csv files")
    p.add_argument("--homographies", help="precomputed per-frame homography log")
    p.add_argument("--homography-log", dest="homography_log",
                   help="write estimated homographies here")
    p.add_argument("--visibility-margin", type=float, dest="visibility_margin")
    add_ransac_flags(p)
    p.set_defaults(func=cmd_stabilize)

    p = sub.add_parser("pipeline", parents=[common], help="tracks to final CSV")
    p.add_argument("--tracks")
    p.add_argument("--sidecar")
    p.add_argument("--correspondences")
    p.add_argument("--homographies")
    p.add_argument("--registry")
    p.add_argument("--segmentation")
    p.add_argument("--video-id", dest="video_id")
    p.add_argument("--score-min", type=float, dest="score_min")
    p.add_argument("--nms-iou", type=float, dest="nms_iou")
    p.add_argument("--sigma", type=float)
    p.add_argument("--speed-floor", type=float, dest="speed_floor")
    p.add_argument("--drone-id", type=int, dest="drone_id")
    p.add_argument("--start-time", dest="start_time")
    p.add_argument("--date")
    p.add_argument("--intersection")
    p.add_argument("--session")
    add_ransac_flags(p)
    add_dim_flags(p)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("bench", parents=[common], help="synthetic registration benchmark")
    p.add_argument("--scenes", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--noise-sigma", type=float, dest="noise_sigma")
    p.add_argument("--outlier-fraction", type=float, dest="outlier_fraction")
    p.add_argument("--hea-epsilon", type=float, dest="hea_epsilon")
    p.add_argument("--confidence", type=float)
    p.add_argument("--max-iterations", type=int, dest="max_iterations")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("compare", parents=[common], help="probe vs extracted trajectory")
    p.add_argument("--probe")
    p.add_argument("--candidate")
    p.add_argument("--group")
    p.add_argument("--fps")
    p.add_argument("--speed-floor", type=float, dest="speed_floor")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("dims", parents=[common], help="per-vehicle dimension estimates")
    p.add_argument("--tracks", help="raw (un-stabilized) tracks")
    p.add_argument("--stabilized")
    p.add_argument("--sidecar")
    p.add_argument("--registry")
    p.add_argument("--video-id", dest="video_id")
    add_dim_flags(p)
    p.set_defaults(func=cmd_dims)

    p = sub.add_parser("kinematics", parents=[common], help="speed/acceleration profiles")
    p.add_argument("--input", help="CSV id,frame,x,y[,visible] in local meters")
    p.add_argument("--fps")
    p.add_argument("--sigma", type=float)
    p.add_argument("--speed-floor", type=float, dest="speed_floor")
    p.set_defaults(func=cmd_kinematics)

    p = sub.add_parser("georef", parents=[common], help="stabilized tracks to world CSV")
    p.add_argument("--tracks", help="stabilized tracks")
    p.add_argument("--sidecar")
    p.add_argument("--registry")
    p.add_argument("--segmentation")
    p.add_argument("--video-id", dest="video_id")
    p.set_defaults(func=cmd_georef)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SkytrajError as exc:
        print(f"error [{args.command}]: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error [{args.command}]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
