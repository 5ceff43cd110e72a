import math

import numpy as np
import pytest

from skytraj.errors import (
    DegenerateConfiguration,
    InsufficientPoints,
    MissingDistances,
    NoModelFound,
)
from skytraj.geometry import BBox, Homography, Point2, apply_homography
from skytraj.registration import (
    Correspondence,
    RansacConfig,
    dlt_homography,
    mask_filter,
    ransac_homography,
    snn_filter,
    upscale_homography,
)


def corr(sx, sy, dx, dy, d1=None, d2=None):
    return Correspondence(Point2(sx, sy), Point2(dx, dy), d1, d2)


def exact_corrs(h: Homography, pts) -> list[Correspondence]:
    return [Correspondence(Point2(*p), apply_homography(h, Point2(*p))) for p in pts]


def point_action_error(h_a: Homography, h_b: Homography, pts) -> float:
    worst = 0.0
    for p in pts:
        a = apply_homography(h_a, Point2(*p))
        b = apply_homography(h_b, Point2(*p))
        worst = max(worst, math.hypot(a.x - b.x, a.y - b.y))
    return worst


class TestSnnFilter:
    def test_kept_and_dropped(self):
        matches = [corr(0, 0, 1, 1, 0.4, 1.0), corr(0, 0, 1, 1, 0.95, 1.0)]
        kept = snn_filter(matches, 0.9)
        assert kept == [matches[0]]

    def test_ratio_one_keeps_everything(self):
        matches = [corr(0, 0, 1, 1, d, 1.0) for d in (0.1, 0.5, 1.0)]
        assert snn_filter(matches, 1.0) == matches

    def test_order_preserved_and_idempotent(self):
        matches = [corr(i, 0, i, 1, 0.1 * i, 1.0) for i in range(1, 9)]
        kept = snn_filter(matches, 0.55)
        assert kept == [m for m in matches if m.d1 <= 0.55]
        assert snn_filter(kept, 0.55) == kept

    def test_missing_distances(self):
        with pytest.raises(MissingDistances):
            snn_filter([corr(0, 0, 1, 1)], 0.9)


class TestMaskFilter:
    def test_no_masks(self):
        pts = [Point2(1, 2), Point2(3, 4)]
        assert mask_filter(pts, [], 0.15) == pts

    def test_enlarged_mask_removes(self):
        # half-width grows from 5.0 to 5.75 with a 15% margin
        mask = BBox(100, 100, 10, 10)
        pts = [Point2(105.7, 100), Point2(106, 100)]
        assert mask_filter(pts, [mask], 0.15) == [Point2(106, 100)]

    def test_zero_margin_boundary(self):
        mask = BBox(100, 100, 10, 10)
        assert mask_filter([Point2(106, 100)], [mask], 0.0) == [Point2(106, 100)]
        # boundary itself is not strictly inside
        assert mask_filter([Point2(105, 100)], [mask], 0.0) == [Point2(105, 100)]
        assert mask_filter([Point2(104.9, 100)], [mask], 0.0) == []


class TestDlt:
    def test_identity_from_square(self):
        corrs = exact_corrs(
            Homography.identity(), [(0, 0), (1, 0), (1, 1), (0, 1)]
        )
        h = dlt_homography(corrs)
        assert np.allclose(h.m, np.eye(3), atol=1e-9)

    def test_translation_recovery(self):
        truth = Homography.translation(7, -2)
        corrs = exact_corrs(truth, [(0, 0), (10, 0), (10, 10), (0, 10)])
        h = dlt_homography(corrs)
        assert np.allclose(h.m, truth.m, atol=1e-9)

    def test_insufficient_points(self):
        corrs = exact_corrs(Homography.identity(), [(0, 0), (1, 0), (1, 1)])
        with pytest.raises(InsufficientPoints):
            dlt_homography(corrs)

    def test_collinear_rejected(self):
        corrs = exact_corrs(
            Homography.identity(), [(0, 0), (1, 1), (2, 2), (3, 3)]
        )
        with pytest.raises(DegenerateConfiguration):
            dlt_homography(corrs)

    def test_exact_on_many_noiseless_points(self):
        rng = np.random.default_rng(0)
        truth = Homography.from_matrix(
            [[1.1, 0.02, 40], [-0.03, 0.95, -25], [1e-5, -2e-5, 1]]
        )
        pts = rng.uniform(0, 2000, (40, 2))
        h = dlt_homography(exact_corrs(truth, pts))
        assert point_action_error(h, truth, pts) < 1e-8

    def test_similarity_invariance(self):
        # shifting/scaling all coordinates and conjugating back must not
        # change the fit (Hartley normalization property), even with noise
        rng = np.random.default_rng(1)
        truth = Homography.from_matrix(
            [[1.02, -0.05, 12], [0.04, 0.97, -8], [2e-5, 1e-5, 1]]
        )
        pts = rng.uniform(0, 1500, (30, 2))
        noise = rng.normal(0, 0.5, (30, 2))
        corrs = [
            Correspondence(
                Point2(*p), Point2(*(np.array(apply_homography(truth, Point2(*p))) + e))
            )
            for p, e in zip(pts, noise)
        ]
        h_base = dlt_homography(corrs)

        scale, off = 3.0, np.array([5000.0, -2500.0])
        sim = Homography.from_matrix([[scale, 0, off[0]], [0, scale, off[1]], [0, 0, 1]])
        moved = [
            Correspondence(
                apply_homography(sim, c.src), apply_homography(sim, c.dst)
            )
            for c in corrs
        ]
        h_moved = dlt_homography(moved)
        h_back = Homography.from_matrix(
            np.linalg.inv(sim.m) @ h_moved.m @ sim.m
        )
        assert point_action_error(h_base, h_back, pts) < 1e-7


def build_noisy_set(rng, truth, n_in=70, n_out=30, noise=0.0, extent=2000.0):
    pts = rng.uniform(0, extent, (n_in, 2))
    corrs = []
    for p in pts:
        d = np.array(apply_homography(truth, Point2(*p)))
        if noise > 0:
            d = d + rng.normal(0, noise, 2)
        corrs.append(Correspondence(Point2(*p), Point2(*d)))
    for _ in range(n_out):
        corrs.append(
            Correspondence(
                Point2(*rng.uniform(0, extent, 2)),
                Point2(*rng.uniform(0, extent, 2)),
            )
        )
    return corrs


class TestRansac:
    truth = Homography.from_matrix(
        [[1.05, 0.01, 30], [-0.02, 0.98, -12], [1e-5, 2e-5, 1]]
    )

    def test_all_inliers_exact(self):
        rng = np.random.default_rng(7)
        corrs = build_noisy_set(rng, self.truth, n_in=100, n_out=0)
        report = ransac_homography(corrs, RansacConfig(seed=1))
        assert report.inlier_flags.all()
        pts = [(c.src.x, c.src.y) for c in corrs]
        assert point_action_error(report.homography, self.truth, pts) < 1e-6
        assert report.mean_reproj_error <= 1e-6

    def test_outliers_rejected_exactly(self):
        rng = np.random.default_rng(8)
        corrs = build_noisy_set(rng, self.truth, n_in=70, n_out=30)
        report = ransac_homography(corrs, RansacConfig(seed=2))
        assert report.inlier_flags[:70].all()
        assert not report.inlier_flags[70:].any()
        pts = [(c.src.x, c.src.y) for c in corrs[:70]]
        assert point_action_error(report.homography, self.truth, pts) < 1e-4

    def test_insufficient(self):
        with pytest.raises(InsufficientPoints):
            ransac_homography(
                [corr(0, 0, 0, 0), corr(1, 0, 1, 0), corr(0, 1, 0, 1)],
                RansacConfig(),
            )

    def test_deterministic(self):
        rng = np.random.default_rng(9)
        corrs = build_noisy_set(rng, self.truth, noise=0.5)
        a = ransac_homography(corrs, RansacConfig(seed=42))
        b = ransac_homography(corrs, RansacConfig(seed=42))
        assert np.array_equal(a.inlier_flags, b.inlier_flags)
        assert np.array_equal(a.homography.m, b.homography.m)
        assert a.iterations_run == b.iterations_run
        assert a.mean_reproj_error == b.mean_reproj_error

    def test_threshold_monotonicity(self):
        rng = np.random.default_rng(10)
        corrs = build_noisy_set(rng, self.truth, n_in=80, n_out=20, noise=1.0)
        counts = []
        for eta in (0.5, 1.0, 2.0, 4.0, 8.0):
            report = ransac_homography(
                corrs, RansacConfig(reproj_threshold=eta, seed=5)
            )
            counts.append(report.inlier_count)
        assert counts == sorted(counts)

    def test_no_model_found(self):
        # every 4-point sample is collinear
        corrs = [corr(i, i, i, i) for i in range(10)]
        with pytest.raises(NoModelFound):
            ransac_homography(corrs, RansacConfig(max_iterations=50, seed=0))

    def test_inlier_count_at_least_four(self):
        rng = np.random.default_rng(11)
        corrs = build_noisy_set(rng, self.truth, n_in=8, n_out=2, noise=0.1)
        report = ransac_homography(corrs, RansacConfig(seed=3))
        assert report.inlier_count >= 4

    def test_minimal_four_point_input(self):
        corrs = exact_corrs(self.truth, [(0, 0), (1000, 0), (1000, 800), (0, 800)])
        report = ransac_homography(corrs, RansacConfig(seed=0))
        assert report.inlier_flags.all()
        assert report.mean_reproj_error < 1e-8


class TestUpscale:
    def test_factor_one(self):
        h = Homography.translation(5, 0)
        assert np.allclose(upscale_homography(h, 1.0).m, h.m)

    def test_translation_doubles(self):
        up = upscale_homography(Homography.translation(5, 0), 0.5)
        assert np.allclose(up.m, Homography.translation(10, 0).m)

    def test_identity_fixed_point(self):
        up = upscale_homography(Homography.identity(), 0.25)
        assert np.allclose(up.m, np.eye(3))

    def test_conjugation_oracle(self):
        rng = np.random.default_rng(12)
        h = Homography.from_matrix(
            [[1.04, -0.02, 7], [0.01, 0.99, -3], [1e-5, -1e-5, 1]]
        )
        rho = 0.5
        up = upscale_homography(h, rho)
        for _ in range(20):
            p = Point2(*rng.uniform(0, 4000, 2))
            scaled = apply_homography(h, Point2(p.x * rho, p.y * rho))
            expected = Point2(scaled.x / rho, scaled.y / rho)
            got = apply_homography(up, p)
            assert math.hypot(got.x - expected.x, got.y - expected.y) < 1e-8
