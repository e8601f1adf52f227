import numpy as np
import pytest

from gazetrack.errors import InvalidParameter, InvalidShape
from gazetrack.grid import GridShape
from gazetrack.synth import synth_gaze, synth_scene


class TestScene:
    def test_deterministic(self):
        a, b = synth_scene(GridShape(64, 48), seed=7), synth_scene(GridShape(64, 48), seed=7)
        assert a.lesion == b.lesion
        np.testing.assert_array_equal(a.intensity, b.intensity)

    def test_seeds_differ(self):
        lesions = {synth_scene(GridShape(64, 64), seed=s).lesion for s in range(100)}
        assert len(lesions) >= 99

    @pytest.mark.parametrize("seed", range(10))
    def test_lesion_geometry(self, seed):
        scene = synth_scene(GridShape(96, 80), seed=seed)
        cx, cy = round(scene.lesion.cx), round(scene.lesion.cy)
        assert scene.gt_mask[cy, cx]
        assert 0.05 <= scene.gt_mask.mean() <= 0.30
        assert scene.intensity.min() >= 0.0 and scene.intensity.max() <= 1.0
        assert scene.intensity[scene.gt_mask].mean() > scene.intensity[~scene.gt_mask].mean() + 0.2

    def test_image_id(self):
        assert synth_scene(GridShape(32, 32), seed=42).image_id == "synth_000042"

    def test_too_small(self):
        with pytest.raises(InvalidShape):
            synth_scene(GridShape(15, 64))


class TestGaze:
    def test_deterministic(self):
        scene = synth_scene(GridShape(64, 64), seed=3)
        assert synth_gaze(scene, 12, seed=1) == synth_gaze(scene, 12, seed=1)
        assert synth_gaze(scene, 12, seed=1) != synth_gaze(scene, 12, seed=2)

    def test_biased_toward_lesion(self):
        hits = 0
        for seed in range(100):
            scene = synth_scene(GridShape(64, 64), seed=seed)
            (f,) = synth_gaze(scene, 1, seed=seed).fixations
            hits += bool(scene.lesion.contains(f.x, f.y, scale=1.5))
        assert hits >= 70

    def test_timestamps_and_bounds(self):
        scene = synth_scene(GridShape(80, 60), seed=11)
        rec = synth_gaze(scene, 40, seed=5)
        starts = [f.start_ts for f in rec.fixations]
        assert all(a < b for a, b in zip(starts, starts[1:]))
        assert all(f.duration >= 1 for f in rec.fixations)
        assert all(0 <= f.x < 80 and 0 <= f.y < 60 for f in rec.fixations)

    def test_bad_count(self):
        with pytest.raises(InvalidParameter):
            synth_gaze(synth_scene(GridShape(32, 32)), 0)
