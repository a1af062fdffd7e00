import numpy as np
import pytest

from sheetfuse.geometry import (bounding_polygon, foreground_mask,
                                incident_profile, otsu_from_histogram,
                                otsu_threshold, sample_geometry)


def exhaustive_otsu(counts, edges):
    """Independent oracle: scan every split, maximize between-class
    variance, lowest threshold on ties."""
    centers = 0.5 * (edges[:-1] + edges[1:])
    total = counts.sum()
    best_k, best_v = None, -1.0
    for k in range(len(counts) - 1):
        w0 = counts[:k + 1].sum()
        w1 = total - w0
        if w0 == 0 or w1 == 0:
            continue
        m0 = (counts[:k + 1] * centers[:k + 1]).sum() / w0
        m1 = (counts[k + 1:] * centers[k + 1:]).sum() / w1
        v = w0 * w1 * (m0 - m1) ** 2
        if v > best_v:
            best_v, best_k = v, k
    return float(edges[best_k + 1])


class TestOtsu:
    @pytest.mark.parametrize("seed", range(8))
    def test_matches_exhaustive_oracle(self, seed):
        rng = np.random.default_rng(seed)
        img = np.clip(np.concatenate([rng.normal(0.25, 0.08, 2000),
                                      rng.normal(0.7, 0.1, 1500)]), 0, 1)
        t = otsu_threshold(img.reshape(50, 70), bins=256)
        counts, edges = np.histogram(img, bins=256, range=(0.0, 1.0))
        assert t == exhaustive_otsu(counts, edges)

    def test_two_level_image(self):
        img = np.zeros((10, 10))
        img[:, 5:] = 0.9
        img[:, :5] = 0.1
        t = otsu_threshold(img)
        assert 0.1 < t <= 0.9
        assert ((img >= t) == (img == 0.9)).all()

    def test_well_separated_clusters(self):
        # the variance plateau spans the whole empty gap and ties break
        # toward the lowest edge, so assert separation, not placement
        rng = np.random.default_rng(42)
        low = rng.normal(0.2, 0.01, 10000)
        high = rng.normal(0.8, 0.01, 10000)
        img = np.clip(np.concatenate([low, high]), 0, 1)
        t = otsu_threshold(img.reshape(200, 100))
        assert low.max() < t <= high.min()

    def test_constant_image_raises(self):
        with pytest.raises(ValueError, match="no foreground separation"):
            otsu_threshold(np.full((8, 8), 0.5))

    def test_histogram_entry_point(self):
        counts = np.array([100, 0, 0, 0, 100])
        edges = np.linspace(0.0, 1.0, 6)
        t = otsu_from_histogram(counts, edges)
        assert t == exhaustive_otsu(counts, edges)

    def test_tie_break_lowest_threshold(self):
        # symmetric histogram: several splits tie; lowest edge must win
        counts = np.array([10, 0, 10])
        edges = np.linspace(0.0, 1.0, 4)
        t = otsu_from_histogram(counts, edges)
        assert t == edges[1]


class TestForegroundMask:
    def test_threshold_split(self):
        img = np.zeros((30, 30))
        img[5:25, 5:25] = 0.9
        mask = foreground_mask(img, 0.5, min_component_px=0)
        expected = np.zeros((30, 30), bool)
        expected[5:25, 5:25] = True
        assert (mask == expected).all()

    def test_speckle_removed(self):
        img = np.zeros((20, 20))
        img[10:13, 10] = 0.9        # 3-px speckle
        img[2:8, 2:8] = 0.9         # real component
        mask = foreground_mask(img, 0.5, min_component_px=10)
        assert not mask[10:13, 10].any()
        assert mask[2:8, 2:8].all()

    def test_all_below_threshold(self):
        mask = foreground_mask(np.zeros((8, 8)), 0.5, min_component_px=0)
        assert not mask.any()


class TestBoundingPolygon:
    def test_filled_square_idempotent(self):
        mask = np.zeros((40, 40), bool)
        mask[10:30, 12:32] = True
        assert (bounding_polygon(mask, alpha=8.0) == mask).all()

    def test_filled_disk_idempotent(self):
        yy, xx = np.mgrid[:41, :41]
        disk = (yy - 20) ** 2 + (xx - 20) ** 2 <= 12 ** 2
        assert (bounding_polygon(disk, alpha=25.0) == disk).all()

    def test_two_distant_squares_stay_separate(self):
        mask = np.zeros((60, 60), bool)
        mask[5:10, 5:10] = True
        mask[45:50, 45:50] = True
        out = bounding_polygon(mask, alpha=4.0)
        assert (out == mask).all()     # per-component hulls of convex squares

    def test_large_alpha_bridges_gap(self):
        mask = np.zeros((60, 60), bool)
        mask[5:10, 5:10] = True
        mask[45:50, 45:50] = True
        out = bounding_polygon(mask, alpha=1000.0)
        assert out[25:30, 25:30].any()

    def test_concave_indentation_filled_at_large_alpha(self):
        mask = np.zeros((40, 40), bool)
        mask[10:30, 10:30] = True
        mask[10:20, 18:22] = False   # notch
        out = bounding_polygon(mask, alpha=100.0)
        assert out[12:18, 19:21].all()

    def test_output_superset_of_input(self):
        rng = np.random.default_rng(5)
        mask = rng.random((30, 30)) > 0.7
        out = bounding_polygon(mask, alpha=5.0)
        assert (out | mask == out).all()

    def test_monotone_in_alpha(self):
        rng = np.random.default_rng(6)
        mask = rng.random((30, 30)) > 0.8
        small = bounding_polygon(mask, alpha=3.0)
        large = bounding_polygon(mask, alpha=30.0)
        assert (large | small == large).all()

    def test_too_few_pixels(self):
        mask = np.zeros((10, 10), bool)
        mask[3, 3] = True
        mask[7, 7] = True
        with pytest.raises(ValueError, match="fewer than 3 foreground pixels"):
            bounding_polygon(mask, alpha=5.0)


class TestIncidentProfile:
    def test_rectangle(self):
        mask = np.zeros((60, 30), bool)
        mask[10:51, 5:21] = True
        prof = incident_profile(mask)
        assert (prof.p_u[5:21] == 10).all()
        assert (prof.p_l[5:21] == 50).all()
        assert prof.valid[5:21].all()
        assert not prof.valid[:5].any() and not prof.valid[21:].any()

    def test_full_mask(self):
        prof = incident_profile(np.ones((12, 7), bool))
        assert (prof.p_u == 0).all() and (prof.p_l == 11).all()

    def test_profile_rows_are_foreground(self):
        rng = np.random.default_rng(7)
        mask = bounding_polygon(rng.random((25, 25) ) > 0.6, alpha=6.0)
        prof = incident_profile(mask)
        for i in np.flatnonzero(prof.valid):
            assert mask[prof.p_u[i], i]
            assert mask[prof.p_l[i], i]
            assert not mask[:prof.p_u[i], i].any()
            assert not mask[prof.p_l[i] + 1:, i].any()


class TestSampleGeometry:
    def test_band_phantom(self, synth_pair):
        gt, va, vb, _ = synth_pair(seed=1, shape=(128, 96), band=(20, 108),
                                   sigma_max=3.0)
        poly, prof = sample_geometry(va, vb)
        assert prof.valid.all()
        assert (prof.p_u == 20).all()
        assert (prof.p_l == 108).all()
        assert poly[20:109].all()

    def test_alpha_default_scales_with_image(self):
        # a 40-px gap stays open at the default alpha for a 256-row
        # image (12.8) but bridges when alpha is passed explicitly large
        img = np.zeros((256, 64))
        img[40:80, 16:48] = 0.9
        img[120:160, 16:48] = 0.9
        poly_default, prof = sample_geometry(img, img)
        poly_wide, _ = sample_geometry(img, img, alpha=500.0)
        assert not poly_default[90:110, 20:44].any()
        assert poly_wide[90:110, 20:44].all()
        # the incident window spans both blocks either way
        assert (prof.p_u[16:48] == 40).all()
        assert (prof.p_l[16:48] == 159).all()

    def test_constant_pair_raises_no_separation(self):
        img = np.full((32, 32), 0.3)
        with pytest.raises(ValueError, match="no foreground separation"):
            sample_geometry(img, img)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            sample_geometry(np.zeros((16, 16)), np.zeros((16, 18)))
