import math

import numpy as np
import pytest

from conftest import make_point, make_tracks
from skytraj.errors import MissingHomography
from skytraj.geometry import BBox, Homography
from skytraj.trackmodel import (
    Detection,
    bbox_iou,
    ingest_filter,
    ingest_keep_indices,
    refine_classes,
    stabilize_tracks,
    visibility_flag,
)


def det(cx, cy, w, h, cls=0, score=0.9):
    return Detection(BBox(cx, cy, w, h), cls, score)


class TestIngestFilter:
    def test_score_threshold_boundary(self):
        dets = [det(0.5, 0.5, 0.1, 0.1, score=0.24), det(0.2, 0.2, 0.1, 0.1, score=0.25)]
        kept = ingest_filter(dets, 0.25, 0.7)
        assert kept == [dets[1]]

    def test_identical_boxes_keep_best(self):
        dets = [det(0.5, 0.5, 0.1, 0.1, score=0.8), det(0.5, 0.5, 0.1, 0.1, score=0.9)]
        kept = ingest_filter(dets, 0.25, 0.7)
        assert kept == [dets[1]]

    def test_disjoint_boxes_kept(self):
        dets = [det(0.2, 0.2, 0.1, 0.1), det(0.8, 0.8, 0.1, 0.1, score=0.5)]
        assert ingest_filter(dets, 0.25, 0.7) == dets

    def test_class_agnostic(self):
        dets = [
            det(0.5, 0.5, 0.1, 0.1, cls=0, score=0.9),
            det(0.5, 0.5, 0.1, 0.1, cls=3, score=0.8),
        ]
        assert ingest_filter(dets, 0.25, 0.7) == [dets[0]]

    def test_score_tie_prefers_input_order(self):
        dets = [det(0.5, 0.5, 0.1, 0.1, score=0.9), det(0.5, 0.5, 0.1, 0.1, score=0.9)]
        assert ingest_keep_indices(dets, 0.25, 0.7) == [0]

    def test_kept_set_properties(self):
        rng = np.random.default_rng(1)
        for _ in range(30):
            dets = [
                det(*rng.uniform(0.2, 0.8, 2), *rng.uniform(0.05, 0.3, 2),
                    score=float(rng.uniform(0.05, 1.0)))
                for _ in range(rng.integers(1, 20))
            ]
            kept = ingest_filter(dets, 0.25, 0.5)
            assert all(d.score >= 0.25 for d in kept)
            for i, a in enumerate(kept):
                for b in kept[i + 1:]:
                    assert bbox_iou(a.bbox, b.bbox) <= 0.5


class TestRefineClasses:
    def test_score_mass_wins(self):
        pts = [
            make_point(1, 1, 100, 100, 10, 10, cls=0, score=0.9),
            make_point(2, 1, 100, 100, 10, 10, cls=0, score=0.8),
            make_point(3, 1, 100, 100, 10, 10, cls=2, score=0.95),
        ]
        out = refine_classes(make_tracks(pts))
        assert all(p.detection.cls == 0 for p in out.points)

    def test_single_point_unchanged(self):
        pts = [make_point(1, 1, 100, 100, 10, 10, cls=3, score=0.5)]
        out = refine_classes(make_tracks(pts))
        assert out.points[0].detection.cls == 3

    def test_exact_tie_lowest_class(self):
        pts = [
            make_point(1, 1, 100, 100, 10, 10, cls=3, score=0.9),
            make_point(2, 1, 100, 100, 10, 10, cls=1, score=0.9),
        ]
        out = refine_classes(make_tracks(pts))
        assert all(p.detection.cls == 1 for p in out.points)

    def test_idempotent_and_preserving(self):
        rng = np.random.default_rng(2)
        pts = [
            make_point(k, tid, 100 + 5 * k, 200, 20, 10,
                       cls=int(rng.integers(0, 4)),
                       score=float(rng.uniform(0.1, 1.0)))
            for tid in (1, 2, 3)
            for k in range(1, int(rng.integers(2, 7)))
        ]
        tracks = make_tracks(pts)
        once = refine_classes(tracks)
        twice = refine_classes(once)
        assert once.points == twice.points
        for before, after in zip(tracks.points, once.points):
            assert before.frame == after.frame
            assert before.track_id == after.track_id
            assert before.detection.score == after.detection.score
            assert before.detection.bbox == after.detection.bbox


class TestVisibilityFlag:
    frame_size = (3840, 2160)

    def test_central_box_visible(self):
        p = make_point(1, 1, 1920, 1080, 100, 50)
        assert visibility_flag(p, self.frame_size, 4.0) is True

    def test_left_edge_violation(self):
        # pixel-exact construction: 1024 frame keeps /1024 coords exact
        size = (1024, 1024)
        p = make_point(1, 1, 52, 512, 100, 50, frame_size=size)
        assert visibility_flag(p, size, 4.0) is False  # xmin = 2

    def test_boundary_is_strict(self):
        size = (1024, 1024)
        p = make_point(1, 1, 54, 512, 100, 50, frame_size=size)
        assert visibility_flag(p, size, 4.0) is False  # xmin = 4 exactly

    def test_just_inside(self):
        size = (1024, 1024)
        p = make_point(1, 1, 55, 512, 100, 50, frame_size=size)
        assert visibility_flag(p, size, 4.0) is True  # xmin = 5 > 4

    def test_right_margin_uses_plus_one(self):
        size = (1024, 1024)
        # xmax must be < 1024 - 5 = 1019; cx = 969, w = 100 -> xmax = 1019
        p = make_point(1, 1, 969, 512, 100, 50, frame_size=size)
        assert visibility_flag(p, size, 4.0) is False
        p = make_point(1, 1, 968, 512, 100, 50, frame_size=size)
        assert visibility_flag(p, size, 4.0) is True

    def test_monotone_in_margin(self):
        rng = np.random.default_rng(3)
        size = (1024, 1024)
        for _ in range(50):
            p = make_point(1, 1, *rng.uniform(60, 960, 2), *rng.uniform(10, 100, 2),
                           frame_size=size)
            margins = [0.0, 2.0, 4.0, 8.0, 16.0]
            flags = [visibility_flag(p, size, m) for m in margins]
            # once invisible at a margin, stays invisible for larger margins
            for a, b in zip(flags, flags[1:]):
                assert a or not b


class TestStabilizeTracks:
    def test_identity_unchanged(self):
        pts = [make_point(k, 1, 100 + k, 200, 20, 10) for k in range(1, 4)]
        tracks = make_tracks(pts)
        homs = {k: Homography.identity() for k in range(2, 4)}
        out = stabilize_tracks(tracks, homs)
        for before, after in zip(tracks.points, out.points):
            assert before.detection.bbox == after.detection.bbox

    def test_translation_shifts_normalized_center(self):
        tracks = make_tracks([make_point(2, 1, 100, 200, 20, 10)])
        out = stabilize_tracks(tracks, {2: Homography.translation(10, 0)})
        box = out.points[0].detection.bbox
        assert box.cx == pytest.approx((100 + 10) / 3840, abs=1e-12)
        assert box.cy == pytest.approx(200 / 2160, abs=1e-12)
        assert box.w == pytest.approx(20 / 3840, abs=1e-12)

    def test_rotation_swaps_box_sides(self):
        tracks = make_tracks([make_point(2, 1, 500, 500, 80, 40)])
        out = stabilize_tracks(tracks, {2: Homography.rotation(math.pi / 2)})
        box = out.points[0].detection.bbox
        assert box.w * 3840 == pytest.approx(40, abs=1e-9)
        assert box.h * 2160 == pytest.approx(80, abs=1e-9)

    def test_missing_homography(self):
        tracks = make_tracks([make_point(7, 1, 100, 100, 10, 10)])
        with pytest.raises(MissingHomography) as err:
            stabilize_tracks(tracks, {})
        assert err.value.frame == 7

    def test_frame_one_defaults_to_identity(self):
        tracks = make_tracks([make_point(1, 1, 100, 100, 10, 10)])
        out = stabilize_tracks(tracks, {})
        assert out.points[0].detection.bbox == tracks.points[0].detection.bbox

    def test_preserves_points_and_ids(self):
        pts = [make_point(k, tid, 300 + k, 400, 30, 15)
               for tid in (1, 2) for k in range(1, 6)]
        tracks = make_tracks(pts)
        homs = {k: Homography.translation(k, -k) for k in range(2, 6)}
        out = stabilize_tracks(tracks, homs)
        assert len(out.points) == len(tracks.points)
        assert [(p.track_id, p.frame) for p in out.points] == [
            (p.track_id, p.frame) for p in tracks.points
        ]

    def test_visibility_from_unstabilized_boxes(self):
        # box is central originally; the homography throws it out of frame
        tracks = make_tracks([make_point(2, 1, 1920, 1080, 100, 50)])
        out = stabilize_tracks(tracks, {2: Homography.translation(5000, 0)})
        assert out.points[0].detection.bbox.cx > 1.0
        assert out.points[0].visible is True
        # and the reverse: box near the border stays not-visible even if
        # stabilization recenters it
        tracks2 = make_tracks([make_point(2, 1, 30, 1080, 100, 50)])
        out2 = stabilize_tracks(tracks2, {2: Homography.translation(1000, 0)})
        assert out2.points[0].visible is False

    def test_normalized_coordinates_may_leave_unit_range(self):
        tracks = make_tracks([make_point(2, 1, 3800, 1080, 100, 50)])
        out = stabilize_tracks(tracks, {2: Homography.translation(500, 0)})
        assert out.points[0].detection.bbox.cx > 1.0
