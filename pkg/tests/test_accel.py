"""Both kernel paths (numba loop vs vectorized numpy) must agree."""

import math
import os
import subprocess
import sys

import numpy as np
import pytest

from drcurate import accel
from drcurate import enhance as en
from drcurate import features as fe
from drcurate import forest as fo
from drcurate import morphology as m
from drcurate import vesselness as ve

pytestmark = pytest.mark.skipif(not accel.HAVE_NUMBA, reason="numba unavailable; single path only")


def test_binary_morphology_paths_identical():
    rng = np.random.RandomState(50)
    for _ in range(10):
        mask = rng.rand(30, 40) < 0.5
        for radius in (1, 2, 3):
            dys, dxs = m.disk_offsets(radius)
            assert (m._binary_erode_jit(mask, dys, dxs) == m._binary_erode_numpy(mask, dys, dxs)).all()
            assert (m._binary_dilate_jit(mask, dys, dxs) == m._binary_dilate_numpy(mask, dys, dxs)).all()


def test_gray_morphology_paths_identical():
    rng = np.random.RandomState(51)
    img = rng.randint(0, 256, size=(40, 50), dtype=np.uint8)
    for radius in (1, 3, 8):
        dys, dxs = m.disk_offsets(radius)
        assert (m._gray_morph_jit(img, dys, dxs, True) == m._gray_morph_numpy(img, dys, dxs, True)).all()
        assert (m._gray_morph_jit(img, dys, dxs, False) == m._gray_morph_numpy(img, dys, dxs, False)).all()


def test_component_removal_label_invariant():
    rng = np.random.RandomState(52)
    from scipy import ndimage

    for _ in range(10):
        mask = rng.rand(35, 35) < 0.45
        labels_jit, n_jit = m._label_jit(mask)
        labels_sp, n_sp = ndimage.label(mask, structure=np.ones((3, 3), dtype=bool))
        assert n_jit == n_sp
        for min_area in (2, 5):
            areas = np.bincount(labels_jit.ravel(), minlength=n_jit + 1)
            keep_jit = (areas >= min_area)[labels_jit] & mask
            areas_sp = np.bincount(labels_sp.ravel(), minlength=n_sp + 1)
            keep_sp = (areas_sp >= min_area)[labels_sp] & mask
            assert (keep_jit == keep_sp).all()


def test_window_sums_paths_bitwise_identical():
    rng = np.random.RandomState(53)
    vals = rng.rand(33, 27)
    r = 2
    padded = np.pad(vals, r, mode="edge")
    ii = m._integral(padded)
    assert (m._window_sums_jit(ii, 5) == m._window_sums_numpy(ii, 5)).all()


def test_clahe_apply_paths_identical():
    rng = np.random.RandomState(54)
    arr = rng.randint(0, 256, size=(48, 64), dtype=np.uint8)
    xb = en._tile_bounds(64, 8)
    yb = en._tile_bounds(48, 6)
    maps = np.empty((6, 8, 256))
    for r in range(6):
        for c in range(8):
            maps[r, c] = en._tile_mapping(arr[yb[r]:yb[r+1], xb[c]:xb[c+1]], 3.0)
    r0, r1, wy = en._interp_axis(48, yb)
    c0, c1, wx = en._interp_axis(64, xb)
    a = en._clahe_apply_jit(arr, maps, r0, r1, wy, c0, c1, wx)
    b = en._clahe_apply_numpy(arr, maps, r0, r1, wy, c0, c1, wx)
    assert (a == b).all()


def test_frangi_response_paths_close():
    rng = np.random.RandomState(55)
    img = rng.rand(40, 40) * 100
    hrr, hrc, hcc = ve._hessian(img, 2.0)
    c = 0.5 * math.sqrt(float((hrr * hrr + 2 * hrc * hrc + hcc * hcc).max()))
    a = ve._frangi_response_jit(hrr, hrc, hcc, 0.5, c)
    b = ve._frangi_response_numpy(hrr, hrc, hcc, 0.5, c)
    # libm vs SIMD exp may differ in the last ulp
    assert np.allclose(a, b, rtol=1e-12, atol=1e-15)


def test_sobel_paths_close():
    rng = np.random.RandomState(56)
    gray = rng.rand(30, 30) * 255
    a = fe._sobel_sum_jit(gray)
    b = fe._sobel_sum_numpy(gray)
    assert a == pytest.approx(b, rel=1e-12)


def test_best_split_paths_identical():
    rng = np.random.RandomState(57)
    for _ in range(50):
        n = rng.randint(4, 60)
        vals = np.sort(np.round(rng.randn(n), 2))
        labels = (rng.rand(n) > 0.5).astype(np.float64)
        weights = rng.rand(n) + 0.5
        for min_leaf in (1, 2, 3):
            s_jit, t_jit = fo._best_split_jit(vals, labels, weights, min_leaf)
            s_np, t_np = fo._best_split_on_feature_numpy(vals, labels, weights, min_leaf)
            if math.isinf(s_np):
                assert math.isinf(s_jit)
            else:
                assert s_jit == s_np
                assert t_jit == t_np


def test_env_flag_disables_numba_path():
    env = dict(os.environ, DRCURATE_NO_NUMBA="1")
    code = (
        "from drcurate import accel, morphology as m\n"
        "import numpy as np\n"
        "assert not accel.using_numba()\n"
        "mask = np.zeros((9, 9), dtype=bool); mask[3:6, 3:6] = True\n"
        "out = m.binary_open(mask, 1)\n"
        "print(int(out.sum()))\n"
    )
    result = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert result.returncode == 0, result.stderr
    # opening the 3x3 square with the radius-1 disk (a plus) leaves the plus
    assert result.stdout.strip() == "5"
