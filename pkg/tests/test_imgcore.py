import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ocular import imgcore as ic
from ocular.pgm import PgmError, decode_pgm, encode_pgm


def images(max_side=16, min_side=1):
    return st.tuples(st.integers(min_side, max_side), st.integers(min_side, max_side)).flatmap(
        lambda hw: arrays(np.uint8, hw))


def brute_integral(img):
    h, w = img.shape
    out = np.zeros((h, w), dtype=np.int64)
    for y in range(h):
        for x in range(w):
            out[y, x] = int(img[:y + 1, :x + 1].astype(np.int64).sum())
    return out


def test_integral_trivial():
    assert ic.integral_image(np.ones((3, 3), np.uint8))[2, 2] == 9
    img = np.zeros((4, 5), np.uint8)
    img[0, 0] = 5
    assert (ic.integral_image(img) == 5).all()


def test_integral_matches_double_sum():
    rng = np.random.default_rng(0)
    for _ in range(50):
        img = rng.integers(0, 256, (16, 16), dtype=np.uint8)
        assert np.array_equal(ic.integral_image(img), brute_integral(img))


def test_integral_no_overflow_on_large_saturated_image():
    img = np.full((2000, 3000), 255, np.uint8)
    assert ic.integral_image(img)[-1, -1] == 255 * 2000 * 3000


@given(images())
def test_integral_monotone(img):
    ii = ic.integral_image(img)
    assert (np.diff(ii, axis=0) >= 0).all()
    assert (np.diff(ii, axis=1) >= 0).all()


def test_rect_sum():
    ii = ic.integral_image(np.ones((4, 4), np.uint8))
    assert ic.rect_sum(ii, ic.Rect(0, 0, 4, 4)) == 16
    rng = np.random.default_rng(1)
    img = rng.integers(0, 256, (12, 15), dtype=np.uint8)
    ii = ic.integral_image(img)
    assert ic.rect_sum(ii, ic.Rect(7, 3, 1, 1)) == img[3, 7]
    for _ in range(200):
        x, y = rng.integers(0, 15), rng.integers(0, 12)
        w, h = rng.integers(1, 16 - x), rng.integers(1, 13 - y)
        expect = sum(int(img[yy, xx]) for yy in range(y, y + h) for xx in range(x, x + w))
        assert ic.rect_sum(ii, ic.Rect(int(x), int(y), int(w), int(h))) == expect
    with pytest.raises(ic.BoundsError):
        ic.rect_sum(ii, ic.Rect(10, 0, 6, 1))


def test_resample_bicubic():
    rng = np.random.default_rng(2)
    img = rng.integers(0, 256, (30, 40), dtype=np.uint8)
    assert np.array_equal(ic.resample_bicubic(img, 1), img)
    assert ic.resample_bicubic(np.zeros((480, 640), np.uint8), 5).shape == (96, 128)
    for sf in (1.3, 2, 3.7):
        out = ic.resample_bicubic(np.full((50, 60), 100, np.uint8), sf)
        assert (out == 100).all()
    with pytest.raises(ic.ImageSizeError):
        ic.resample_bicubic(np.zeros((20, 20), np.uint8), 3)


def test_resize_bicubic_identity_and_linear_ramp():
    ramp = np.tile(np.arange(0, 200, 2, dtype=np.uint8), (10, 1))
    up = ic.resize_bicubic(ramp, 200, 10)
    # Catmull-Rom reproduces linear functions away from the clamped border
    xs = (np.arange(200) + 0.5) * 0.5 - 0.5
    inner = slice(4, 196)
    assert np.abs(up[5, inner].astype(float) - 2 * xs[inner]).max() <= 0.5 + 1e-9


def test_rotate_identity_and_roundtrip():
    rng = np.random.default_rng(3)
    img = rng.integers(0, 256, (41, 41), dtype=np.uint8)
    assert np.array_equal(ic.affine_rotate(img, 0), img)
    smooth = np.zeros((61, 61), np.uint8)
    yy, xx = np.mgrid[0:61, 0:61]
    smooth[:] = (127 + 100 * np.sin(xx / 6.0) * np.cos(yy / 7.0)).astype(np.uint8)
    back = ic.affine_rotate(ic.affine_rotate(smooth, 30), -30)
    cx = cy = 30
    r = np.hypot(xx - cx, yy - cy)
    inner = r <= 30 - 5  # stays inside the image through both rotations
    assert np.abs(back[inner].astype(int) - smooth[inner].astype(int)).max() <= 3


def test_rotate_point_feature_90():
    img = np.zeros((41, 41), np.uint8)
    cx, cy = 20, 20
    img[cy - 1:cy + 2, cx + 10 - 1:cx + 10 + 2] = 255
    out = ic.affine_rotate(img, 90)
    ys, xs = np.nonzero(out > 128)
    assert abs(xs.mean() - cx) <= 1 and abs(ys.mean() - (cy + 10)) <= 1


def test_convolve_basics():
    rng = np.random.default_rng(4)
    img = rng.integers(0, 256, (20, 20), dtype=np.uint8)
    ident = np.zeros((3, 3))
    ident[1, 1] = 1
    assert np.array_equal(ic.convolve(img, ident), img.astype(np.int16))
    const = np.full((20, 20), 77, np.uint8)
    assert (ic.convolve(const, ic.LAPLACIAN_5x5) == 0).all()
    assert (ic.convolve(const, ic.GAUSSIAN_5x5) == 77).all()
    assert ic.GAUSSIAN_5x5.sum() * 159 == pytest.approx(159)
    with pytest.raises(ic.ImageSizeError):
        ic.convolve(np.zeros((3, 3), np.uint8), ic.GAUSSIAN_5x5)


def test_convolve_is_true_convolution():
    img = np.zeros((7, 7), np.uint8)
    img[3, 3] = 10
    k = np.arange(9, dtype=float).reshape(3, 3)
    out = ic.convolve(img, k)
    # an impulse reproduces the kernel unflipped
    assert np.array_equal(out[2:5, 2:5], (10 * k).astype(np.int16))


def test_laplacian_kernel_entries():
    assert ic.LAPLACIAN_5x5[2, 2] == 24 and ic.LAPLACIAN_5x5.sum() == 0
    assert (np.delete(ic.LAPLACIAN_5x5.ravel(), 12) == -1).all()


def test_morph_open_removes_speck():
    img = np.full((40, 40), 20, np.uint8)
    img[18:21, 18:21] = 250
    out = ic.morph(img, "open", 10)
    assert out.max() <= 21
    assert np.array_equal(ic.morph(np.full((15, 15), 9, np.uint8), "open", 3), np.full((15, 15), 9))


@settings(max_examples=30, deadline=None)
@given(images(max_side=14, min_side=3), st.integers(1, 3))
def test_morph_properties(img, r):
    opened = ic.morph(img, "open", r)
    assert np.array_equal(ic.morph(opened, "open", r), opened)
    assert (ic.erode(img, r) <= img).all() and (img <= ic.dilate(img, r)).all()
    assert (opened <= img).all()


def test_erode_matches_direct_min():
    rng = np.random.default_rng(5)
    img = rng.integers(0, 256, (9, 11), dtype=np.uint8)
    r = 2
    out = ic.erode(img, r)
    for y in range(9):
        for x in range(11):
            vals = [img[min(max(y + dy, 0), 8), min(max(x + dx, 0), 10)]
                    for dy in range(-r, r + 1) for dx in range(-r, r + 1) if dx * dx + dy * dy <= r * r]
            assert out[y, x] == min(vals)


def flood_fill_sizes(mask):
    mask = mask.copy()
    h, w = mask.shape
    sizes = []
    for y in range(h):
        for x in range(w):
            if mask[y, x]:
                stack, n = [(y, x)], 0
                mask[y, x] = False
                while stack:
                    cy, cx = stack.pop()
                    n += 1
                    for dy in (-1, 0, 1):
                        for dx in (-1, 0, 1):
                            ny, nx = cy + dy, cx + dx
                            if 0 <= ny < h and 0 <= nx < w and mask[ny, nx]:
                                mask[ny, nx] = False
                                stack.append((ny, nx))
                sizes.append(n)
    return sorted(sizes, reverse=True)


def test_connected_components():
    assert ic.connected_components(np.zeros((5, 5), bool)) == []
    m = np.zeros((10, 10), bool)
    m[1, 1:6] = True
    m[7, 6:9] = True
    comps = ic.connected_components(m, min_size=4)
    assert [c.pixel_count for c in comps] == [5]
    assert comps[0].rect == ic.Rect(1, 1, 5, 1)
    full = ic.connected_components(np.ones((4, 6), bool))
    assert len(full) == 1 and full[0].pixel_count == 24
    rng = np.random.default_rng(6)
    for _ in range(20):
        m = rng.random((15, 15)) < 0.35
        assert [c.pixel_count for c in ic.connected_components(m)] == flood_fill_sizes(m)


def test_components_tie_break():
    m = np.zeros((6, 6), bool)
    m[4, 0:3] = True
    m[0, 3:6] = True
    comps = ic.connected_components(m)
    assert comps[0].rect.y == 0 and comps[1].rect.y == 4


def exhaustive_distance(mask, metric):
    fy, fx = np.nonzero(mask)
    h, w = mask.shape
    out = np.zeros((h, w))
    for y in range(h):
        for x in range(w):
            out[y, x] = min(float(ic.point_distance(x - a, y - b, metric)) for b, a in zip(fy, fx))
    return out


def test_distance_transform_single_point():
    m = np.zeros((6, 6), bool)
    m[0, 0] = True
    expect = {"chessboard": 4, "cityblock": 7, "euclidean": 5, "quasi_euclidean": (math.sqrt(2) - 1) * 3 + 4}
    for metric, v in expect.items():
        assert ic.distance_transform(m, metric)[4, 3] == pytest.approx(v, abs=1e-12)
    with pytest.raises(ValueError):
        ic.distance_transform(np.zeros((3, 3), bool))


def test_distance_transform_exhaustive():
    rng = np.random.default_rng(7)
    for _ in range(10):
        m = rng.random((12, 12)) < 0.08
        m[rng.integers(0, 12), rng.integers(0, 12)] = True
        for metric in ic.METRICS:
            got = ic.distance_transform(m, metric)
            ref = exhaustive_distance(m, metric)
            if metric in ("chessboard", "cityblock"):
                assert np.array_equal(got, ref)
            else:
                assert np.abs(got - ref).max() <= 1e-9
            assert np.array_equal(got == 0, m)


def test_local_stddev():
    assert (ic.local_stddev(np.full((6, 6), 40, np.uint8)) == 0).all()
    half = np.zeros((8, 8), np.uint8)
    half[:, 4:] = 255
    out = ic.local_stddev(half)
    assert set(np.nonzero(out == out.max())[1]) <= {3, 4}
    rng = np.random.default_rng(8)
    img = rng.integers(0, 256, (8, 8), dtype=np.uint8)
    ref = np.zeros((8, 8))
    p = np.pad(img.astype(float), 1, mode="edge")
    for y in range(8):
        for x in range(8):
            patch = p[y:y + 3, x:x + 3]
            mu = patch.sum() / 9
            ref[y, x] = math.sqrt(((patch - mu) ** 2).sum() / 9)
    assert np.abs(ic.local_stddev_raw(img) - ref).max() < 1e-9
    assert np.array_equal(ic.local_stddev(img), np.floor(ref / ref.max() * 255 + 0.5).astype(np.uint8))


def test_gamma_correct():
    levels = np.arange(256, dtype=np.uint8).reshape(16, 16)
    assert np.array_equal(ic.gamma_correct(levels, 1.0), levels)
    for g in (0.1, 0.5, 2.2, 10):
        out = ic.gamma_correct(levels, g)
        assert out[0, 0] == 0 and out[-1, -1] == 255
    assert ic.gamma_correct(np.array([[64]], np.uint8), 0.5)[0, 0] == 128


def test_pgm_roundtrip_and_rejects():
    rng = np.random.default_rng(9)
    img = rng.integers(0, 256, (7, 13), dtype=np.uint8)
    assert np.array_equal(decode_pgm(encode_pgm(img)), img)
    # a raster starting with a whitespace byte must survive the single-separator rule
    img[0, 0] = ord(" ")
    assert np.array_equal(decode_pgm(encode_pgm(img)), img)
    with pytest.raises(PgmError):
        decode_pgm(b"P5\n2 2\n65535\n" + bytes(8))
    with pytest.raises(PgmError):
        decode_pgm(b"P2\n2 2\n255\n0 0 0 0")
