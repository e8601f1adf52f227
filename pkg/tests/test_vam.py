import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gazetrack.errors import InvalidParameter
from gazetrack.grid import FixationPoint, GazeRecord, GridShape
from gazetrack.vam import VamParams, accumulate_vam, build_vam, threshold_mask

from conftest import random_record

unit_maps = arrays(np.float64, st.tuples(st.integers(1, 8), st.integers(1, 8)),
                   elements=st.floats(0.0, 1.0))


def record(*fixes, shape=(64, 64)):
    return GazeRecord("r", GridShape(*shape), tuple(FixationPoint(*f) for f in fixes))


class TestBuildVam:
    def test_default_radius(self):
        assert VamParams(sigma=15).kernel_radius == 45
        assert VamParams(sigma=0.2).kernel_radius == 1

    def test_single_fixation_peak(self):
        vam = build_vam(record((20.3, 31.6, 120, 0)), VamParams(sigma=3))
        assert vam.max() == 1.0
        assert np.unravel_index(np.argmax(vam), vam.shape) == (32, 20)

    def test_two_far_fixations(self):
        rec = record((10, 10, 200, 0), (50, 50, 100, 300), shape=(64, 64))
        raw = accumulate_vam(rec, VamParams(sigma=2))
        # hand evaluation: each peak sees only its own splat, exp(0) = 1
        assert raw[10, 10] == 200.0 and raw[50, 50] == 100.0
        vam = build_vam(rec, VamParams(sigma=2))
        assert vam[10, 10] == 1.0 and vam[50, 50] == 0.5

    def test_gaussian_profile(self):
        raw = accumulate_vam(record((30, 30, 1.0, 0)), VamParams(sigma=4, kernel_radius=12))
        np.testing.assert_allclose(raw[30, 30 + 5], np.exp(-25 / 32), rtol=1e-15)
        assert raw[30, 30 + 13] == 0.0

    def test_translation_equivariance(self, rng):
        fixes = [(float(rng.uniform(20, 40)), float(rng.uniform(20, 40)), float(rng.uniform(50, 500)), 10.0 * i)
                 for i in range(6)]
        p = VamParams(sigma=3)
        a = accumulate_vam(record(*fixes, shape=(96, 96)), p)
        b = accumulate_vam(record(*[(x + 7, y + 5, d, t) for x, y, d, t in fixes], shape=(96, 96)), p)
        np.testing.assert_allclose(b[5 + 10:-10, 7 + 10:-10], a[10:-15, 10:-17], rtol=1e-12, atol=0)

    def test_permutation_invariance(self, rng):
        rec = random_record(rng, n=12)
        shuffled = GazeRecord(rec.image_id, rec.shape, tuple(rng.permutation(np.array(rec.fixations, dtype=object))))
        np.testing.assert_array_equal(build_vam(rec), build_vam(shuffled))

    def test_duration_scale_invariance(self, rng):
        rec = random_record(rng, n=8)
        scaled = GazeRecord(rec.image_id, rec.shape, tuple(
            FixationPoint(f.x, f.y, f.duration * 3.7, f.start_ts) for f in rec.fixations))
        np.testing.assert_allclose(build_vam(scaled), build_vam(rec), atol=1e-14)

    def test_bad_sigma(self):
        with pytest.raises(InvalidParameter):
            VamParams(sigma=0)


class TestThreshold:
    def test_boundary(self):
        m = threshold_mask(np.array([[0.71, 0.69, 0.7]]), 0.7)
        np.testing.assert_array_equal(m, [[True, False, False]])

    def test_all_zero(self):
        assert not threshold_mask(np.zeros((5, 5)), 0.7).any()

    @pytest.mark.parametrize("t", [0.0, 1.0, -0.2, 1.5])
    def test_threshold_domain(self, t):
        with pytest.raises(InvalidParameter):
            threshold_mask(np.zeros((2, 2)), t)

    def test_rejects_unnormalized(self):
        with pytest.raises(InvalidParameter):
            threshold_mask(np.full((2, 2), 1.5), 0.5)

    @settings(max_examples=200)
    @given(unit_maps, st.floats(0.01, 0.99), st.floats(0.01, 0.99))
    def test_nesting(self, vam, t1, t2):
        hi, lo = max(t1, t2), min(t1, t2)
        assert not (threshold_mask(vam, hi) & ~threshold_mask(vam, lo)).any()
