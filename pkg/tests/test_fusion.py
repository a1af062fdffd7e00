import numpy as np
import pytest

from sheetfuse import fusion
from sheetfuse.boundary import BoundaryCurve
from sheetfuse.config import RunConfig
from sheetfuse.fusion import baseline_fuse, compose, fuse_slice, fuse_volume
from sheetfuse.stack_io import ViewPair, Volume

from conftest import random_slice


class TestCompose:
    def test_identical_inputs_any_boundary(self):
        x = random_slice(0)
        omega = np.random.default_rng(1).integers(0, 64, 64)
        for fw in (0, 1, 5):
            assert np.array_equal(compose(x, x, omega, fw), x)

    def test_hard_cut_all_a(self):
        a, b = random_slice(2), random_slice(3)
        omega = np.full(64, 63)
        assert np.array_equal(compose(a, b, omega, 0), a)

    def test_hard_cut_split(self):
        a = np.ones((10, 4))
        b = np.zeros((10, 4))
        out = compose(a, b, np.array([2, 5, 0, 9]), 0)
        assert np.array_equal(out[:, 0], [1, 1, 1, 0, 0, 0, 0, 0, 0, 0])
        assert np.array_equal(out[:, 1], [1, 1, 1, 1, 1, 1, 0, 0, 0, 0])
        assert np.array_equal(out[:, 2], [1, 0, 0, 0, 0, 0, 0, 0, 0, 0])
        assert np.array_equal(out[:, 3], np.ones(10))

    def test_feather_ramp(self):
        a = np.ones((12, 3))
        b = np.zeros((12, 3))
        out = compose(a, b, np.full(3, 5), feather_w=1)
        assert np.array_equal(out[:5, 0], np.ones(5))
        assert out[5, 0] == 0.5
        assert np.array_equal(out[6:, 0], np.zeros(6))

    def test_feather_matches_hard_cut_outside_band(self):
        a, b = random_slice(4, (32, 16)), random_slice(5, (32, 16))
        omega = np.full(16, 15)
        hard = compose(a, b, omega, 0)
        soft = compose(a, b, omega, 3)
        assert np.array_equal(hard[:12], soft[:12])
        assert np.array_equal(hard[20:], soft[20:])

    def test_output_bounded_by_inputs(self):
        a, b = random_slice(6, (40, 20)), random_slice(7, (40, 20))
        omega = np.random.default_rng(8).integers(0, 40, 20)
        out = compose(a, b, omega, feather_w=4)
        assert (out >= np.minimum(a, b) - 1e-15).all()
        assert (out <= np.maximum(a, b) + 1e-15).all()

    def test_accepts_boundary_curve(self):
        a, b = random_slice(9, (16, 8)), random_slice(10, (16, 8))
        curve = BoundaryCurve(omega=np.full(8, 7), valid=np.ones(8, dtype=bool))
        assert np.array_equal(compose(a, b, curve, 0),
                              compose(a, b, np.full(8, 7), 0))

    def test_validation(self):
        a = np.zeros((8, 8))
        with pytest.raises(ValueError, match="shapes differ"):
            compose(a, np.zeros((8, 9)), np.zeros(8), 0)
        with pytest.raises(ValueError, match="columns"):
            compose(a, a, np.zeros(5), 0)
        with pytest.raises(ValueError, match="feather"):
            compose(a, a, np.zeros(8), -1)


class TestBaselineFuse:
    def test_average_identity(self):
        x = random_slice(11)
        assert np.array_equal(baseline_fuse(x, x, "average"), x)

    def test_average_constants(self):
        a = np.full((8, 8), 0.2)
        b = np.full((8, 8), 0.6)
        assert np.allclose(baseline_fuse(a, b, "average"), 0.4)

    def test_max_focus_prefers_sharp_side(self, small_pair):
        gt, va, vb, prof = small_pair
        fused = baseline_fuse(va, vb, "max_focus")
        p_u = int(prof.p_u[prof.valid][0])
        p_l = int(prof.p_l[prof.valid][0])
        mid = (p_u + p_l) // 2
        top = slice(p_u, mid)
        bot = slice(mid, p_l + 1)
        from_a_top = np.mean(fused[top] == va[top])
        from_a_bot = np.mean(fused[bot] == va[bot])
        assert from_a_top > from_a_bot

    def test_unknown_mode(self):
        x = random_slice(12)
        with pytest.raises(ValueError, match="unknown baseline mode"):
            baseline_fuse(x, x, "median")


class TestFuseSlice:
    def test_identical_inputs_passthrough(self, synth_pair):
        gt, _, _, _ = synth_pair(seed=13, shape=(128, 96), band=(20, 108))
        fused, curve = fuse_slice(gt, gt)
        assert np.array_equal(fused, gt)
        assert curve.valid.any()

    def test_recovers_sharp_regions(self, small_pair):
        gt, va, vb, prof = small_pair
        fused, curve = fuse_slice(va, vb)
        sel = curve.valid
        assert sel.mean() > 0.5
        p_u = prof.p_u[sel]
        p_l = prof.p_l[sel]
        inside = (curve.omega[sel] >= p_u) & (curve.omega[sel] <= p_l)
        assert inside.mean() > 0.9

    def test_no_sample_falls_back_to_average(self):
        a = np.full((32, 32), 0.3)
        b = np.full((32, 32), 0.5)
        fused, curve = fuse_slice(a, b)
        assert np.allclose(fused, 0.4)
        assert not curve.valid.any()
        assert curve.diagnostics["fallback"] == "average"
        assert "warning" in curve.diagnostics

    def test_timings_recorded(self, small_pair):
        _, va, vb, _ = small_pair
        _, curve = fuse_slice(va, vb)
        timings = curve.diagnostics["timings"]
        for stage in ("focus", "geometry", "boundary", "compose"):
            assert timings[stage] >= 0.0

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="shapes differ"):
            fuse_slice(np.zeros((32, 32)), np.zeros((32, 16)))

    def test_too_small_for_transform(self):
        x = np.full((8, 8), 0.5)
        with pytest.raises(ValueError, match="too small"):
            fuse_slice(x, x)


def _pair_volume(synth_pair, depth, seed0=20, shape=(96, 64), band=(16, 80)):
    slabs_a, slabs_b = [], []
    for k in range(depth):
        _, va, vb, _ = synth_pair(seed=seed0 + k, shape=shape, band=band,
                                  sigma_max=3.0)
        slabs_a.append(np.clip(va, 0, 1))
        slabs_b.append(np.clip(vb, 0, 1))
    return ViewPair(view_a=Volume(data=np.stack(slabs_a)),
                    view_b=Volume(data=np.stack(slabs_b)))


class TestFuseVolume:
    def test_single_slice_matches_fuse_slice(self, synth_pair):
        pair = _pair_volume(synth_pair, 1)
        result = fuse_volume(pair)
        direct, curve = fuse_slice(pair.view_a.data[0], pair.view_b.data[0])
        assert np.array_equal(result.fused.data[0], np.clip(direct, 0, 1))
        assert np.array_equal(result.boundaries[0].omega, curve.omega)

    def test_worker_count_never_changes_output(self, synth_pair):
        pair = _pair_volume(synth_pair, 4)
        res1 = fuse_volume(pair, RunConfig(workers=1))
        res4 = fuse_volume(pair, RunConfig(workers=4))
        assert np.array_equal(res1.fused.data, res4.fused.data)
        for c1, c4 in zip(res1.boundaries, res4.boundaries):
            assert np.array_equal(c1.omega, c4.omega)

    def test_axis_disagreement_rejected(self, synth_pair):
        pair = _pair_volume(synth_pair, 1)
        bad = ViewPair(view_a=pair.view_a,
                       view_b=Volume(data=pair.view_b.data, axis="cols"))
        with pytest.raises(ValueError, match="disagree"):
            fuse_volume(bad)

    def test_column_frame_round_trip(self, synth_pair):
        pair = _pair_volume(synth_pair, 2)
        rot_a = Volume(data=pair.view_a.data.transpose(0, 2, 1), axis="cols")
        rot_b = Volume(data=pair.view_b.data.transpose(0, 2, 1), axis="cols")
        base = fuse_volume(pair, RunConfig(workers=1))
        rot = fuse_volume(ViewPair(view_a=rot_a, view_b=rot_b),
                          RunConfig(workers=1))
        assert np.array_equal(rot.fused.data, base.fused.data.transpose(0, 2, 1))

    def test_partial_failure_recorded(self, synth_pair, monkeypatch):
        pair = _pair_volume(synth_pair, 2)
        marked = pair.view_a.data.copy()
        marked[1, 0, 0] = 0.123456789
        pair = ViewPair(view_a=Volume(data=marked), view_b=pair.view_b)

        real = fusion.fuse_slice

        def flaky(a, b, cfg=None):
            if a[0, 0] == 0.123456789:
                raise RuntimeError("injected failure")
            return real(a, b, cfg)

        monkeypatch.setattr(fusion, "fuse_slice", flaky)
        result = fuse_volume(pair, RunConfig(workers=1))
        assert [z for z, _ in result.errors] == [1]
        expected = 0.5 * (pair.view_a.data[1] + pair.view_b.data[1])
        assert np.allclose(result.fused.data[1], np.clip(expected, 0, 1))
        assert result.boundaries[1].diagnostics["warning"].startswith("failed:")

    def test_all_slices_failing_raises(self):
        tiny = Volume(data=np.full((2, 8, 8), 0.5))
        with pytest.raises(RuntimeError, match="all 2 slices failed"):
            fuse_volume(ViewPair(view_a=tiny, view_b=tiny))

    def test_timing_and_echo(self, synth_pair):
        pair = _pair_volume(synth_pair, 2)
        result = fuse_volume(pair, RunConfig(workers=2))
        assert result.timing["total"] > 0
        assert result.timing["focus"] > 0
        assert result.config_echo["workers"] == 2
        assert result.config_echo["nsct.directions"] == [2, 3, 3]
