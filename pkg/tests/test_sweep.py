import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from slantsweep.geometry import CameraIntrinsics, RelativePose, induce_homography
from slantsweep.hypotheses import AxisRange, build_grid, default_grid
from slantsweep.sweep import (
    CostVolume,
    ImageRaster,
    PlaneParamMap,
    ProbabilityVolume,
    SweepConfig,
    aggregate_cost,
    bilinear_weights,
    box_sum,
    build_cost_volume,
    convex_upsample,
    cost_to_probability,
    downsample,
    matching_cost,
    nearest_weights,
    soft_argmax,
    sweep,
    warp_source,
)
from slantsweep.synth import render, single_plane_scene

K100 = CameraIntrinsics(100.0, 100.0, 64.0, 48.0, 128, 96)


def texture(rng, shape=(24, 32)):
    return rng.uniform(0, 1, shape)


class TestImageRaster:
    def test_colour_rejected(self):
        with pytest.raises(ValueError, match="to_gray"):
            ImageRaster(np.zeros((4, 4, 3)))

    def test_nan_invalid(self):
        r = ImageRaster(np.array([[np.nan, 0.5]]))
        np.testing.assert_array_equal(r.valid, [[False, True]])

    def test_downsample_block_mean(self):
        v = np.arange(16.0).reshape(4, 4)
        valid = np.ones((4, 4), bool)
        valid[0, 0] = False
        d = downsample(ImageRaster(v, valid), 2)
        np.testing.assert_array_equal(d.valid, [[False, True], [True, True]])
        assert d.values[1, 1] == pytest.approx(np.mean([10, 11, 14, 15]))


class TestWarp:
    def test_identity(self, rng):
        src = ImageRaster(texture(rng))
        out = warp_source(src, np.eye(3))
        np.testing.assert_array_equal(out.values, src.values)
        assert out.valid.all()

    def test_five_pixel_shift(self, rng):
        src = ImageRaster(rng.uniform(0, 1, (96, 128)))
        H = induce_homography([0, 0, -0.5], RelativePose(np.eye(3), [0.1, 0, 0]), K100)
        out = warp_source(src, H)
        np.testing.assert_allclose(out.values[:, :-5], src.values[:, 5:], atol=1e-9)
        assert out.valid[:, :-5].all()
        assert not out.valid[:, -5:].any()

    def test_matches_pointwise_oracle(self, rng):
        img = texture(rng)
        H = np.array([[1.02, 0.03, 1.3], [-0.02, 0.98, -0.7], [1e-4, -2e-4, 1.0]])
        out = warp_source(ImageRaster(img), H)
        for v in range(img.shape[0]):
            for u in range(img.shape[1]):
                m = H @ [u, v, 1.0]
                ref = oracles.bilinear_at(img, m[0] / m[2], m[1] / m[2])
                if ref is None:
                    assert not out.valid[v, u]
                else:
                    assert out.valid[v, u]
                    assert out.values[v, u] == pytest.approx(ref, abs=1e-12)

    def test_invalid_source_pixels_propagate(self, rng):
        valid = np.ones((24, 32), bool)
        valid[10, 10] = False
        out = warp_source(ImageRaster(texture(rng), valid), np.eye(3))
        assert not out.valid[10, 10]
        assert out.valid.sum() == valid.sum()

    def test_gt_homography_reproduces_target(self):
        spec = single_plane_scene(3)
        pair = render(spec)
        H = induce_homography(spec.planes[0].p, spec.pose, spec.intrinsics)
        w = warp_source(pair.source, H)
        assert w.valid.mean() > 0.5
        assert np.abs(w.values - pair.target.values)[w.valid].mean() < 0.02


class TestMatchingCost:
    def test_perfect_match(self, rng):
        t = ImageRaster(texture(rng))
        cost, valid = matching_cost(t, t, 7)
        assert valid.all()
        assert np.abs(cost).max() < 1e-9

    def test_inverted(self, rng):
        t = ImageRaster(texture(rng))
        cost, _ = matching_cost(t, ImageRaster(1 - t.values), 7)
        np.testing.assert_allclose(cost, 2.0, atol=1e-9)

    def test_textureless_neutral(self, rng):
        t = ImageRaster(texture(rng))
        cost, valid = matching_cost(t, ImageRaster(np.full(t.shape, 0.4)), 5)
        assert valid.all()
        np.testing.assert_array_equal(cost, 1.0)

    def test_invalid_window(self, rng):
        valid = np.ones((24, 32), bool)
        valid[12, 16] = False
        t = ImageRaster(texture(rng))
        _, ok = matching_cost(t, ImageRaster(texture(rng), valid), 5)
        assert not ok[10:15, 14:19].any()
        assert ok.sum() == ok.size - 25

    def test_dimension_mismatch(self, rng):
        with pytest.raises(ValueError, match="dimension"):
            matching_cost(ImageRaster(texture(rng)), ImageRaster(texture(rng, (24, 31))))

    @pytest.mark.parametrize("window", [1, 3, 7])
    def test_matches_oracle(self, rng, window):
        a, b = texture(rng, (11, 13)), texture(rng, (11, 13))
        cost, valid = matching_cost(ImageRaster(a), ImageRaster(b), window)
        assert valid.all()
        for i in range(11):
            for j in range(13):
                assert cost[i, j] == pytest.approx(oracles.zncc_cost(a, b, window // 2, i, j), abs=1e-9)

    @given(arrays(np.float64, (9, 9), elements=st.floats(0, 1)), arrays(np.float64, (9, 9), elements=st.floats(0, 1)))
    def test_range(self, a, b):
        cost, _ = matching_cost(ImageRaster(a), ImageRaster(b), 3)
        assert np.all((cost >= 0) & (cost <= 2))


class TestCostVolume:
    def test_shape(self, rng):
        k = CameraIntrinsics(40.0, 40.0, 15.5, 11.5, 32, 24)
        img = ImageRaster(texture(rng))
        pose = RelativePose(np.eye(3), [0.1, 0, 0])
        vol = build_cost_volume(img, img, default_grid(), pose, k, scale=2)
        assert vol.cost.shape == (512, 12, 16) == vol.valid.shape

    def test_zero_baseline_slices_identical(self, rng):
        k = CameraIntrinsics(40.0, 40.0, 15.5, 11.5, 32, 24)
        img = ImageRaster(texture(rng))
        vol = build_cost_volume(img, ImageRaster(texture(rng)), default_grid(), RelativePose.identity(), k)
        assert np.all(vol.cost == vol.cost[0])
        assert np.all(vol.valid == vol.valid[0])

    def test_threads_equal_serial(self, rng):
        k = CameraIntrinsics(40.0, 40.0, 15.5, 11.5, 32, 24)
        a, b = ImageRaster(texture(rng)), ImageRaster(texture(rng))
        pose = RelativePose(np.eye(3), [0.1, 0.02, 0])
        v1 = build_cost_volume(a, b, default_grid(), pose, k, threads=1)
        v3 = build_cost_volume(a, b, default_grid(), pose, k, threads=3)
        np.testing.assert_array_equal(v1.cost, v3.cost)

    def test_gt_slice_is_minimal(self):
        spec = single_plane_scene(0)
        pair = render(spec)
        hyps = np.vstack([default_grid().hypotheses, spec.planes[0].p])
        vol = build_cost_volume(pair.target, pair.source, hyps, spec.pose, spec.intrinsics, window=7, scale=1)
        inside = vol.valid[-1]
        best = np.where(vol.valid, vol.cost, np.inf).min(axis=0)
        # bilinear resampling noise lets a near-coincident hypothesis win a few pixels
        assert (vol.cost[-1] <= best)[inside].mean() >= 0.9
        assert (vol.cost[-1] - best)[inside].max() <= 0.025

    def test_size_mismatch(self, rng):
        with pytest.raises(ValueError):
            build_cost_volume(ImageRaster(texture(rng)), ImageRaster(texture(rng)), default_grid(), RelativePose.identity(), K100)


def random_volume(rng, n=4, h=7, w=9, p_invalid=0.2):
    return CostVolume(rng.uniform(0, 2, (n, h, w)), rng.uniform(size=(n, h, w)) > p_invalid)


class TestAggregate:
    def test_radius_zero_identity(self, rng):
        vol = random_volume(rng)
        out = aggregate_cost(vol, 0)
        np.testing.assert_array_equal(out.cost, vol.cost)

    def test_constant_slice(self):
        vol = CostVolume(np.full((2, 6, 6), 0.7), np.ones((2, 6, 6), bool))
        np.testing.assert_allclose(aggregate_cost(vol, 2).cost, 0.7, atol=1e-15)

    def test_oracle_100_instances(self, rng):
        for _ in range(100):
            r = int(rng.integers(1, 4))
            vol = random_volume(rng, 2, int(rng.integers(1, 9)), int(rng.integers(1, 9)))
            out = aggregate_cost(vol, r)
            np.testing.assert_array_equal(out.valid, vol.valid)
            for n in range(2):
                ref = oracles.masked_box_mean(vol.cost[n], vol.valid[n], r)
                np.testing.assert_allclose(out.cost[n], ref, rtol=0, atol=1e-12)

    def test_box_sum_truncates(self):
        np.testing.assert_array_equal(box_sum(np.ones((3, 4)), 1), [[4, 6, 6, 4], [6, 9, 9, 6], [4, 6, 6, 4]])


class TestProbability:
    def test_equal_costs_uniform(self):
        U = cost_to_probability(CostVolume(np.full((5, 3, 3), 0.3), np.ones((5, 3, 3), bool)), 0.05)
        np.testing.assert_allclose(U.prob, 0.2, atol=1e-15)

    def test_sharp_slice(self):
        c = np.full((4, 1, 1), 2.0)
        c[2] = 0.0
        U = cost_to_probability(CostVolume(c, np.ones_like(c, bool)), 0.01)
        # closed form: 1 / (1 + 3 exp(-200))
        assert U.prob[2, 0, 0] == pytest.approx(1 / (1 + 3 * np.exp(-200)), abs=1e-6)

    def test_closed_form(self):
        c = np.array([0.1, 0.3, 0.2]).reshape(3, 1, 1)
        valid = np.array([True, True, False]).reshape(3, 1, 1)
        U = cost_to_probability(CostVolume(c, valid), 0.1)
        e = np.exp(-np.array([1.0, 3.0]))
        np.testing.assert_allclose(U.prob[:, 0, 0], [e[0] / e.sum(), e[1] / e.sum(), 0.0], atol=1e-15)

    def test_all_invalid_pixel(self):
        valid = np.ones((3, 2, 2), bool)
        valid[:, 0, 0] = False
        U = cost_to_probability(CostVolume(np.zeros((3, 2, 2)), valid), 0.05)
        assert not U.valid[0, 0] and U.valid[1, 1]
        np.testing.assert_allclose(U.prob[:, 0, 0], 1 / 3)

    @given(st.integers(0, 2**32 - 1), st.floats(1e-3, 10))
    def test_normalised(self, seed, temperature):
        rng = np.random.default_rng(seed)
        U = cost_to_probability(random_volume(rng, 6), temperature)
        np.testing.assert_allclose(U.prob.sum(axis=0), 1.0, atol=1e-6)
        assert U.prob.min() >= 0

    def test_rejects_temperature(self, rng):
        with pytest.raises(ValueError):
            cost_to_probability(random_volume(rng), 0.0)


class TestSoftArgmax:
    def test_uniform_is_centroid(self):
        g = default_grid()
        U = ProbabilityVolume(np.full((512, 3, 4), 1 / 512), np.ones((3, 4), bool))
        np.testing.assert_allclose(soft_argmax(U, g).params, np.broadcast_to([0, 0, -0.75], (3, 4, 3)), atol=1e-12)

    def test_one_hot(self):
        g = default_grid()
        prob = np.zeros((512, 2, 2))
        prob[137] = 1.0
        out = soft_argmax(ProbabilityVolume(prob, np.ones((2, 2), bool)), g)
        np.testing.assert_array_equal(out.params[1, 1], g[137])

    @given(st.integers(0, 2**32 - 1))
    def test_range_property(self, seed):
        rng = np.random.default_rng(seed)
        g = build_grid([AxisRange(-1, 2, 3), AxisRange(-0.5, 0.5, 2), AxisRange(-3, -1, 4)])
        U = cost_to_probability(random_volume(rng, len(g), 4, 5), rng.uniform(0.01, 1))
        p = soft_argmax(U, g).params
        assert np.all(p >= g.lower - 1e-12) and np.all(p <= g.upper + 1e-12)

    def test_low_temperature_is_argmin(self, rng):
        g = default_grid()
        c = rng.uniform(0.1, 2, (512, 5, 6))
        # plant a strict minimum per pixel, separated by at least 0.05
        j = rng.integers(0, 512, (5, 6))
        np.put_along_axis(c, j[None], c.min(axis=0, keepdims=True) - 0.05, axis=0)
        vol = CostVolume(c, np.ones_like(c, bool))
        p = soft_argmax(cost_to_probability(vol, 1e-3), g).params
        np.testing.assert_allclose(p, g.hypotheses[j], atol=1e-6)


class TestConvexUpsample:
    def test_nearest(self, rng):
        coarse = PlaneParamMap(rng.normal(size=(3, 4, 3)), np.ones((3, 4), bool))
        fine = convex_upsample(coarse, nearest_weights(3, 4, 2), 2)
        np.testing.assert_array_equal(fine.params, coarse.params.repeat(2, 0).repeat(2, 1))

    def test_uniform_on_constant(self):
        coarse = PlaneParamMap(np.full((3, 3, 3), -0.4), np.ones((3, 3), bool))
        fine = convex_upsample(coarse, np.full((3, 3, 4, 4, 3, 3), 1 / 9), 4)
        np.testing.assert_allclose(fine.params, -0.4, atol=1e-15)

    @pytest.mark.parametrize("factor", [2, 4, 8])
    def test_bilinear_on_ramp(self, factor):
        h, w = 5, 7
        yy, xx = np.mgrid[0:h, 0:w].astype(float)
        ramp = np.stack([0.3 * xx - 0.1 * yy, yy, 2 * xx + 1], axis=-1)
        fine = convex_upsample(PlaneParamMap(ramp, np.ones((h, w), bool)), bilinear_weights(h, w, factor), factor)
        # analytic bilinear: fine centre u maps to coarse (u + 0.5) / s - 0.5, clamped at the border
        fy = np.clip((np.arange(h * factor) + 0.5) / factor - 0.5, 0, h - 1)
        fx = np.clip((np.arange(w * factor) + 0.5) / factor - 0.5, 0, w - 1)
        Y, X = np.meshgrid(fy, fx, indexing="ij")
        ref = np.stack([0.3 * X - 0.1 * Y, Y, 2 * X + 1], axis=-1)
        np.testing.assert_allclose(fine.params, ref, atol=1e-9)

    def test_rejects_unnormalised(self):
        wts = nearest_weights(2, 2, 2) * 1.01
        with pytest.raises(ValueError):
            convex_upsample(PlaneParamMap(np.zeros((2, 2, 3)), np.ones((2, 2), bool)), wts, 2)

    def test_rejects_negative(self):
        wts = nearest_weights(2, 2, 2)
        wts[..., 0, 0] = -0.5
        wts[..., 1, 1] = 1.5
        with pytest.raises(ValueError):
            convex_upsample(PlaneParamMap(np.zeros((2, 2, 3)), np.ones((2, 2), bool)), wts, 2)

    @given(st.integers(0, 2**32 - 1))
    def test_no_overshoot(self, seed):
        rng = np.random.default_rng(seed)
        h, w, s = 4, 5, 2
        coarse = PlaneParamMap(rng.normal(size=(h, w, 3)), np.ones((h, w), bool))
        wts = rng.uniform(size=(h, w, s, s, 3, 3)) * (rng.uniform(size=(h, w, s, s, 3, 3)) > 0.3)
        wts[..., 1, 1] += 1e-3
        wts /= wts.sum(axis=(-2, -1), keepdims=True)
        fine = convex_upsample(coarse, wts, s).params
        pad = np.pad(coarse.params, ((1, 1), (1, 1), (0, 0)), mode="edge")
        for i in range(h):
            for j in range(w):
                nb = pad[i : i + 3, j : j + 3].reshape(9, 3)
                block = fine[i * s : (i + 1) * s, j * s : (j + 1) * s].reshape(-1, 3)
                assert np.all(block >= nb.min(0) - 1e-12) and np.all(block <= nb.max(0) + 1e-12)

    def test_invalid_neighbour_propagates(self):
        valid = np.ones((3, 3), bool)
        valid[1, 1] = False
        fine = convex_upsample(PlaneParamMap(np.zeros((3, 3, 3)), valid), bilinear_weights(3, 3, 2), 2)
        # every fine pixel of the 3x3 coarse block around the centre leans on it
        assert not fine.valid[1:5, 1:5].any()
        assert fine.valid[0, 0]


class TestSweepConfig:
    @pytest.mark.parametrize("kw", [{"window": 4}, {"radius": -1}, {"temperature": 0}, {"scale": 3}])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            SweepConfig(**kw)


def test_zero_baseline_pipeline(rng):
    k = CameraIntrinsics(40.0, 40.0, 15.5, 11.5, 32, 24)
    res = sweep(ImageRaster(texture(rng)), ImageRaster(texture(rng)), RelativePose.identity(), k, config=SweepConfig(scale=2))
    assert res.params.params.shape == (24, 32, 3)
    assert np.abs(res.prob.prob - 1 / 512).max() <= 1e-9
    np.testing.assert_allclose(res.params.params[res.params.valid], np.broadcast_to([0, 0, -0.75], (res.params.valid.sum(), 3)), atol=1e-9)
