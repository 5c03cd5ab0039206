import math

import numpy as np
import pytest

from drcurate import enhance as en
from drcurate.core import RasterImage
from drcurate.features import sharpness

from conftest import make_fundus


def ramp_image(size=256):
    return np.tile(np.arange(size, dtype=np.uint8), (size, 1))


class TestClahe:
    def test_clip1_identity_on_ramp(self):
        arr = ramp_image()
        out = en.clahe_array(arr, clip=1.0, grid=(8, 8))
        assert np.abs(out.astype(int) - arr.astype(int)).max() <= 1

    def test_constant_tile_plain_equalization_maps_to_zero(self):
        # no-clipping regime: cdf_min equals the tile mass, numerator 0
        arr = np.full((32, 32), 173, dtype=np.uint8)
        out = en.clahe_array(arr, clip=math.inf, grid=(1, 1))
        assert (out == 0).all()

    def test_output_range(self):
        rng = np.random.RandomState(9)
        arr = rng.randint(0, 256, size=(64, 64), dtype=np.uint8)
        out = en.clahe_array(arr, clip=3.0, grid=(8, 8))
        assert out.dtype == np.uint8

    def test_tile_mappings_nondecreasing(self):
        rng = np.random.RandomState(10)
        for _ in range(10):
            tile = rng.randint(0, 256, size=(16, 16), dtype=np.uint8)
            for clip in (1.0, 2.0, 3.0, math.inf):
                mapping = en._tile_mapping(tile, clip)
                assert (np.diff(mapping) >= 0).all()

    def test_plain_histeq_special_case(self):
        # clip=inf, grid=(1,1): classic global equalization of a two-level image
        arr = np.zeros((16, 16), dtype=np.uint8)
        arr[:, 8:] = 128
        out = en.clahe_array(arr, clip=math.inf, grid=(1, 1))
        assert set(np.unique(out)) == {0, 255}

    def test_grid_too_large_rejected(self):
        with pytest.raises(en.EnhanceError):
            en.clahe_array(np.zeros((4, 4), dtype=np.uint8), clip=2.0, grid=(8, 8))

    def test_degenerate_tiles_rejected(self):
        with pytest.raises(en.EnhanceError, match="fewer than 4"):
            en.clahe_array(np.zeros((8, 8), dtype=np.uint8), clip=2.0, grid=(8, 8))


class TestGamma:
    def test_identity(self):
        lut = en.gamma_lut(1.0)
        assert (lut == np.arange(256)).all()

    def test_documented_value(self):
        assert en.gamma_lut(0.5)[64] == 128  # round(255*sqrt(64/255))

    def test_fixed_points(self):
        for g in (0.3, 0.8, 1.0, 2.2):
            lut = en.gamma_lut(g)
            assert lut[0] == 0 and lut[255] == 255

    def test_monotone_all_levels(self):
        for g in (0.4, 0.8, 1.7):
            lut = en.gamma_lut(g).astype(int)
            assert (np.diff(lut) >= 0).all()

    def test_gamma_below_one_brightens(self):
        lut = en.gamma_lut(0.8).astype(int)
        mids = np.arange(1, 255)
        assert (lut[mids] >= mids).all()
        assert (lut[mids] > mids).any()

    def test_invalid_gamma(self):
        with pytest.raises(ValueError):
            en.gamma_lut(0.0)


class TestEnhance:
    def test_all_black_stays_black(self):
        img = RasterImage(np.zeros((32, 32, 3), dtype=np.uint8))
        out, box = en.enhance(img)
        assert box.degenerate
        assert (out.pixels == 0).all()

    def test_clahe_bypass_gamma1_is_colorspace_roundtrip(self):
        img = make_fundus(size=64)
        params = en.EnhancementParams(clahe_clip=None, gamma=1.0)
        out, box = en.enhance(img, params)
        from drcurate.features import crop_black_margins

        cropped, _ = crop_black_margins(img, params.dark_threshold)
        assert out.pixels.shape == cropped.pixels.shape
        assert np.abs(out.pixels.astype(int) - cropped.pixels.astype(int)).max() <= 1

    def test_low_contrast_fundus_gains_sharpness(self):
        img = make_fundus(size=96, vessel_boost=10)
        out, _ = en.enhance(img)
        assert sharpness(out) > sharpness(img)

    def test_output_dims_equal_crop_dims(self):
        img = make_fundus(size=80)
        out, box = en.enhance(img)
        assert (out.height, out.width) == (box.height, box.width)

    def test_deterministic_and_dimension_idempotent(self):
        img = make_fundus(size=80)
        out1, _ = en.enhance(img)
        out2, _ = en.enhance(img)
        assert (out1.pixels == out2.pixels).all()
        again, _ = en.enhance(out1)
        assert (again.height, again.width) == (out1.height, out1.width)

    def test_requires_rgb(self):
        with pytest.raises(en.EnhanceError):
            en.enhance(RasterImage(np.zeros((10, 10), dtype=np.uint8)))
