import json
import math

import numpy as np
import pytest

from drcurate import features as f
from drcurate.core import RasterImage

from conftest import constant_image


class TestCrop:
    def test_block_bbox(self):
        px = np.zeros((100, 100, 3), dtype=np.uint8)
        px[30:70, 30:70] = 200
        cropped, box = f.crop_black_margins(RasterImage(px))
        assert (box.left, box.top, box.width, box.height) == (30, 30, 40, 40)
        assert not box.degenerate
        assert cropped.width == cropped.height == 40

    def test_all_bright_full_frame(self):
        img = constant_image(200, size=12)
        cropped, box = f.crop_black_margins(img)
        assert (box.left, box.top, box.width, box.height) == (0, 0, 12, 12)

    def test_all_black_degenerate(self):
        img = constant_image(0, size=10)
        cropped, box = f.crop_black_margins(img)
        assert box.degenerate
        assert cropped.width == 10 and cropped.height == 10

    def test_idempotent(self):
        rng = np.random.RandomState(5)
        px = np.zeros((40, 50, 3), dtype=np.uint8)
        px[7:30, 11:44] = rng.randint(40, 255, size=(23, 33, 3))
        once, box1 = f.crop_black_margins(RasterImage(px))
        twice, box2 = f.crop_black_margins(once)
        assert (twice.pixels == once.pixels).all()
        assert (box2.left, box2.top) == (0, 0)

    def test_threshold_boundary(self):
        px = np.full((5, 5), 15, dtype=np.uint8)  # == threshold: not bright
        _, box = f.crop_black_margins(RasterImage(px), dark_threshold=15)
        assert box.degenerate
        px2 = np.full((5, 5), 16, dtype=np.uint8)
        _, box2 = f.crop_black_margins(RasterImage(px2), dark_threshold=15)
        assert not box2.degenerate


class TestBrightness:
    def test_constant(self):
        assert f.brightness(constant_image(128)) == pytest.approx(128.0)

    def test_half_half(self):
        px = np.zeros((2, 2), dtype=np.uint8)
        px[0] = 255
        assert f.brightness(RasterImage(px)) == pytest.approx(127.5)

    def test_pure_red_luma(self):
        px = np.zeros((4, 4, 3), dtype=np.uint8)
        px[..., 0] = 255
        assert f.brightness(RasterImage(px)) == pytest.approx(76.245)


class TestExposure:
    def test_default_thresholds_classify_extremes(self):
        assert f.exposure_verdict(20) == "under"
        assert f.exposure_verdict(190) == "over"
        assert f.exposure_verdict(120) == "ok"

    def test_boundaries_exact(self):
        eps = 1e-9
        assert f.exposure_verdict(50 - eps) == "under"
        assert f.exposure_verdict(50) == "ok"
        assert f.exposure_verdict(180) == "ok"
        assert f.exposure_verdict(180 + eps) == "over"

    def test_threshold_order_enforced(self):
        with pytest.raises(ValueError):
            f.exposure_verdict(100, under=180, over=50)


class TestSharpness:
    def test_constant_zero(self):
        assert f.sharpness(constant_image(77)) == 0.0

    def test_step_positive_blur_lowers(self):
        from scipy.ndimage import gaussian_filter

        px = np.zeros((8, 8), dtype=np.uint8)
        px[:, 4:] = 255
        sharp = f.sharpness(RasterImage(px))
        blurred = gaussian_filter(px.astype(float), 2.0).clip(0, 255).astype(np.uint8)
        assert sharp > 0
        assert f.sharpness(RasterImage(blurred)) < sharp

    def test_checkerboard_exceeds_step(self):
        # 2-px blocks: a 1-px checkerboard sits exactly in Sobel's blind
        # spot (x-1 and x+1 neighbors are equal, so the kernel cancels)
        yy, xx = np.mgrid[0:8, 0:8]
        checker = ((((yy // 2) + (xx // 2)) % 2) * 255).astype(np.uint8)
        step = np.zeros((8, 8), dtype=np.uint8)
        step[:, 4:] = 255
        assert f.sharpness(RasterImage(checker)) > f.sharpness(RasterImage(step))

    def test_too_small(self):
        with pytest.raises(f.FeatureError):
            f.sharpness(constant_image(1, size=2))


class TestEntropy:
    def test_constant_zero(self):
        assert f.entropy(constant_image(200)) == 0.0

    def test_bimodal_one_bit(self):
        px = np.zeros((16, 16), dtype=np.uint8)
        px[:8] = 255
        assert f.entropy(RasterImage(px)) == pytest.approx(1.0, abs=1e-12)

    def test_uniform_eight_bits(self):
        px = np.arange(256, dtype=np.uint8).reshape(16, 16)
        assert f.entropy(RasterImage(px)) == pytest.approx(8.0, abs=1e-12)

    def test_permutation_invariant(self):
        rng = np.random.RandomState(6)
        px = rng.randint(0, 256, size=(16, 16), dtype=np.uint8)
        shuffled = px.ravel().copy()
        rng.shuffle(shuffled)
        assert f.entropy(RasterImage(px)) == pytest.approx(
            f.entropy(RasterImage(shuffled.reshape(16, 16))), abs=1e-12
        )


class TestPeakToMean:
    def test_constant_is_one(self):
        assert f.peak_to_mean(constant_image(90)) == pytest.approx(1.0)

    def test_single_peak_256(self):
        px = np.zeros((16, 16), dtype=np.uint8)
        px[0, 0] = 255
        assert f.peak_to_mean(RasterImage(px)) == 256.0

    def test_half_100_half_200(self):
        px = np.full((2, 2), 100, dtype=np.uint8)
        px[0] = 200
        assert f.peak_to_mean(RasterImage(px)) == pytest.approx(200 / 150)

    def test_all_zero_nan(self):
        assert math.isnan(f.peak_to_mean(constant_image(0)))

    def test_at_least_one_for_nonzero(self):
        rng = np.random.RandomState(7)
        for _ in range(25):
            px = rng.randint(0, 256, size=(8, 8), dtype=np.uint8)
            if px.max() == 0:
                continue
            assert f.peak_to_mean(RasterImage(px)) >= 1.0


class TestVlmScores:
    def test_verbatim(self, tmp_path):
        p = tmp_path / "vlm.json"
        p.write_text(json.dumps({"img1": {"blurry": 0.9, "artifacts": 0.8}}))
        assert f.ingest_vlm_scores(p) == {"img1": (0.9, 0.8)}

    def test_out_of_range(self, tmp_path):
        p = tmp_path / "vlm.json"
        p.write_text(json.dumps({"img1": {"blurry": 1.3, "artifacts": 0.5}}))
        with pytest.raises(f.FeatureError, match="outside"):
            f.ingest_vlm_scores(p)

    def test_missing_field(self, tmp_path):
        p = tmp_path / "vlm.json"
        p.write_text(json.dumps({"img1": {"blurry": 0.4}}))
        with pytest.raises(f.FeatureError, match="artifacts"):
            f.ingest_vlm_scores(p)

    def test_empty_file(self, tmp_path):
        p = tmp_path / "vlm.json"
        p.write_text("")
        assert f.ingest_vlm_scores(p) == {}


class TestExtract:
    def test_constant_128_vector(self):
        feats = f.extract_features(constant_image(128, size=32, rgb=True))
        assert feats.brightness == pytest.approx(128.0)
        assert feats.vesselness == 0.0
        assert feats.sharpness == 0.0
        assert feats.entropy == 0.0
        assert feats.peak_to_mean == pytest.approx(1.0)
        assert feats.blurry is None and feats.artifacts is None

    def test_sidecar_populates_vlm(self):
        feats = f.extract_features(constant_image(128, size=32, rgb=True), vlm=(0.5, 0.5))
        assert feats.blurry == 0.5 and feats.artifacts == 0.5

    def test_all_black_flags(self):
        feats = f.extract_features(constant_image(0, size=32, rgb=True))
        assert "degenerate_crop" in feats.flags
        assert "zero_mean" in feats.flags
        assert feats.peak_to_mean == 1.0

    def test_vlm_fields_travel_together(self):
        with pytest.raises(ValueError):
            f.QualityFeatures(1, 0, 0, 0, 1, blurry=0.5, artifacts=None)


class TestFeaturesCsv:
    def test_roundtrip(self, tmp_path):
        rows = [
            ("b", f.QualityFeatures(10.0, 0.1, 2.0, 3.0, 1.5, 0.2, 0.3), "bad"),
            ("a", f.QualityFeatures(20.0, 0.2, 4.0, 5.0, 2.5, 0.4, 0.6), "good"),
        ]
        path = tmp_path / "features.csv"
        f.write_features_csv(path, rows)
        ids, x, labels, schema = f.read_features_csv(path)
        assert ids == ["a", "b"]  # sorted by image_id
        assert labels == ["good", "bad"]
        assert schema == list(f.FEATURE_NAMES)
        assert x[0][0] == 20.0

    def test_absent_vlm_drops_columns(self, tmp_path):
        rows = [
            ("a", f.QualityFeatures(20.0, 0.2, 4.0, 5.0, 2.5, 0.4, 0.6), "good"),
            ("b", f.QualityFeatures(10.0, 0.1, 2.0, 3.0, 1.5), "bad"),
        ]
        path = tmp_path / "features.csv"
        f.write_features_csv(path, rows)
        ids, x, labels, schema = f.read_features_csv(path)
        assert schema == ["brightness", "vesselness", "sharpness", "entropy", "peak_to_mean"]
        assert x.shape == (2, 5)

    def test_empty_manifest_header_only(self, tmp_path):
        path = tmp_path / "features.csv"
        f.write_features_csv(path, [])
        assert path.read_text().strip() == ",".join(f.CSV_HEADER)
        ids, x, labels, schema = f.read_features_csv(path)
        assert ids == [] and x.shape[0] == 0
