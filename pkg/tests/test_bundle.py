import json

import numpy as np
import pytest

from gazetrack.bundle import (
    MANIFEST_NAME,
    BundleParams,
    build_bundle,
    load_bundle,
    manifest_bytes,
    write_bundle,
)
from gazetrack.errors import FormatError, InvalidShape
from gazetrack.grid import GridShape
from gazetrack.synth import synth_gaze, synth_scene
from gazetrack.vam import build_vam, threshold_mask
from gazetrack.crf import refine_vam


def scene_bundle(seed=0, shape=GridShape(64, 64), n_fix=20, params=BundleParams()):
    scene = synth_scene(shape, seed=seed)
    return scene, build_bundle(synth_gaze(scene, n_fix, seed=seed), scene.intensity, params)


def precision(mask, gt):
    return 1.0 if not mask.any() else float((mask & gt).sum() / mask.sum())


class TestBuild:
    def test_three_nested_track_maps(self):
        _, b = scene_bundle(seed=4)
        assert sorted(b.track_maps) == [0.5, 0.75, 1.0]
        s50, s75, s100 = (b.track_maps[r].values > 0 for r in (0.5, 0.75, 1.0))
        assert not np.any(s50 & ~s75)
        assert not np.any(s75 & ~s100)

    def test_maps_share_grid(self):
        _, b = scene_bundle(shape=GridShape(48, 40))
        for arr in (b.vam, b.vam_refined, b.hard_mask, *(t.values for t in b.track_maps.values())):
            assert arr.shape == (40, 48)

    def test_conservative_mask_inside_liberal(self):
        _, b = scene_bundle(seed=2)
        loose = threshold_mask(b.vam_refined, 0.3)
        np.testing.assert_array_equal(b.hard_mask, threshold_mask(b.vam_refined, 0.7))
        assert not np.any(b.hard_mask & ~loose)

    def test_rebuild_hashes_identical(self):
        _, a = scene_bundle(seed=9)
        _, b = scene_bundle(seed=9)
        assert a.manifest() == b.manifest()

    def test_manifest_records_params(self):
        _, b = scene_bundle(params=BundleParams(threshold=0.6))
        m = b.manifest()
        assert m["format_version"] == 1
        assert m["params"]["threshold"] == 0.6
        assert m["params"]["decay"] == {"beta": 10.0, "tau": 0.25}
        assert set(m["files"]) == {"vam.pfm", "vam_refined.pfm", "hard_mask.pgm",
                                   "track_050.pfm", "track_075.pfm", "track_100.pfm"}
        json.loads(manifest_bytes(m))

    def test_shape_mismatch(self):
        scene = synth_scene(GridShape(32, 32), seed=1)
        with pytest.raises(InvalidShape):
            build_bundle(synth_gaze(scene, 5), np.zeros((30, 32)))

    def test_precision_trend(self):
        # 64x64 scenes refined at 32x32 keep the 200-scene sweep to a few seconds
        wins = 0
        for seed in range(200):
            scene = synth_scene(GridShape(64, 64), seed=seed)
            refined = refine_vam(build_vam(synth_gaze(scene, 20, seed=seed)), scene.intensity, max_side=32)
            tight, loose = threshold_mask(refined, 0.7), threshold_mask(refined, 0.3)
            wins += precision(tight, scene.gt_mask) >= precision(loose, scene.gt_mask)
        assert wins >= 180

    def test_raw_vam_precision_trend(self):
        wins = 0
        for seed in range(200):
            scene = synth_scene(GridShape(64, 64), seed=seed)
            vam = build_vam(synth_gaze(scene, 20, seed=seed))
            tight, loose = threshold_mask(vam, 0.7), threshold_mask(vam, 0.3)
            assert tight.any()
            wins += precision(tight, scene.gt_mask) >= precision(loose, scene.gt_mask)
        assert wins >= 180


class TestFiles:
    def test_write_and_load(self, tmp_path):
        _, b = scene_bundle(seed=3)
        root = write_bundle(b, tmp_path)
        assert root == tmp_path / b.image_id
        back = load_bundle(root)
        np.testing.assert_array_equal(back.vam, b.vam.astype(np.float32))
        np.testing.assert_array_equal(back.hard_mask, b.hard_mask)
        for r, tm in b.track_maps.items():
            np.testing.assert_array_equal(back.track_maps[r], tm.values.astype(np.float32))
        assert (root / MANIFEST_NAME).read_bytes() == manifest_bytes(b.manifest())

    def test_tampered_payload(self, tmp_path):
        _, b = scene_bundle(seed=3)
        root = write_bundle(b, tmp_path)
        data = bytearray((root / "vam.pfm").read_bytes())
        data[-1] ^= 1
        (root / "vam.pfm").write_bytes(bytes(data))
        with pytest.raises(FormatError):
            load_bundle(root)
        load_bundle(root, verify=False)

    def test_unknown_version(self, tmp_path):
        _, b = scene_bundle(seed=3)
        root = write_bundle(b, tmp_path)
        m = json.loads((root / MANIFEST_NAME).read_text())
        m["format_version"] = 2
        (root / MANIFEST_NAME).write_text(json.dumps(m))
        with pytest.raises(FormatError):
            load_bundle(root)
