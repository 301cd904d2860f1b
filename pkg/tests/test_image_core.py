"""Image primitives: decoding, luminance, filtering, downsampling."""

import io

import numpy as np
import pytest
from PIL import Image

from msqa.errors import DecodeError, DimensionError
from msqa.image_core import (
    BorderPolicy,
    ImageBuffer,
    Kernel,
    Plane,
    convolve2d,
    decode_image,
    downsample2x,
    gaussian_kernel,
    to_luminance,
)

from conftest import color_texture, encode_png, naive_correlate


# ---------------------------------------------------------------------------
# decoding


def test_decode_png_roundtrip_single_pixel():
    rgb = np.array([[[255, 0, 0]]], dtype=np.uint8)
    img = decode_image(encode_png(rgb))
    assert img.width == 1 and img.height == 1
    assert np.array_equal(img.pixels, rgb)


def test_decode_png_roundtrip_texture():
    rgb = color_texture(seed=3, size=17)
    img = decode_image(encode_png(rgb))
    assert np.array_equal(img.pixels, rgb)


def test_decode_grayscale_png_expands_to_rgb():
    gray = np.array([[0, 128], [200, 255]], dtype=np.uint8)
    buf = io.BytesIO()
    Image.fromarray(gray, "L").save(buf, format="PNG")
    img = decode_image(buf.getvalue())
    assert img.pixels.shape == (2, 2, 3)
    for c in range(3):
        assert np.array_equal(img.pixels[:, :, c], gray)


def test_decode_jpeg_supported():
    rgb = np.full((16, 16, 3), 120, dtype=np.uint8)
    buf = io.BytesIO()
    Image.fromarray(rgb, "RGB").save(buf, format="JPEG", quality=95)
    img = decode_image(buf.getvalue())
    assert img.pixels.shape == (16, 16, 3)
    # flat image survives JPEG nearly unchanged
    assert np.max(np.abs(img.pixels.astype(int) - 120)) <= 3


def test_decode_rejects_truncated_png():
    data = encode_png(color_texture(seed=1, size=32))
    with pytest.raises(DecodeError):
        decode_image(data[: len(data) // 2])


def test_decode_rejects_other_formats():
    buf = io.BytesIO()
    Image.fromarray(np.zeros((4, 4, 3), np.uint8), "RGB").save(buf, format="BMP")
    with pytest.raises(DecodeError):
        decode_image(buf.getvalue())


def test_decode_rejects_garbage():
    with pytest.raises(DecodeError):
        decode_image(b"not an image at all")
    with pytest.raises(DecodeError):
        decode_image(b"")


# ---------------------------------------------------------------------------
# container validation


def test_image_buffer_validation():
    with pytest.raises(DimensionError):
        ImageBuffer(np.zeros((4, 4), dtype=np.uint8))
    with pytest.raises(DimensionError):
        ImageBuffer(np.zeros((4, 4, 4), dtype=np.uint8))
    with pytest.raises(DimensionError):
        ImageBuffer(np.zeros((4, 4, 3), dtype=np.float64))
    with pytest.raises(DimensionError):
        ImageBuffer(np.zeros((0, 4, 3), dtype=np.uint8))


def test_plane_validation():
    with pytest.raises(DimensionError):
        Plane(np.zeros(5))
    with pytest.raises(DimensionError):
        Plane(np.zeros((0, 3)))
    bad = np.zeros((3, 3))
    bad[1, 1] = np.nan
    with pytest.raises(DimensionError):
        Plane(bad)


def test_kernel_validation():
    with pytest.raises(DimensionError):
        Kernel(np.zeros((2, 2)))
    with pytest.raises(DimensionError):
        Kernel(np.zeros((3, 5)))
    with pytest.raises(DimensionError):
        Kernel(np.array([[1.0, np.inf, 1.0]] * 3))


# ---------------------------------------------------------------------------
# luminance


def test_luminance_primaries():
    def lum_of(rgb_triplet):
        px = np.tile(np.array(rgb_triplet, np.uint8), (2, 2, 1))
        return to_luminance(ImageBuffer(px)).samples[0, 0]

    assert lum_of((255, 255, 255)) == pytest.approx(255.0, abs=1e-12)
    assert lum_of((0, 0, 0)) == 0.0
    assert lum_of((255, 0, 0)) == pytest.approx(0.299 * 255, abs=1e-12)
    assert lum_of((0, 255, 0)) == pytest.approx(0.587 * 255, abs=1e-12)
    assert lum_of((0, 0, 255)) == pytest.approx(0.114 * 255, abs=1e-12)


def test_luminance_range_and_gray_identity():
    rng = np.random.default_rng(42)
    for _ in range(5):
        px = rng.integers(0, 256, size=(9, 7, 3), dtype=np.uint8)
        lum = to_luminance(ImageBuffer(px)).samples
        assert lum.min() >= 0.0 and lum.max() <= 255.0
    gray = np.repeat(rng.integers(0, 256, size=(5, 5, 1), dtype=np.uint8), 3, axis=2)
    lum = to_luminance(ImageBuffer(gray)).samples
    assert np.allclose(lum, gray[:, :, 0], atol=1e-12)


# ---------------------------------------------------------------------------
# convolution


def test_convolve_matches_naive_oracle():
    rng = np.random.default_rng(7)
    plane = Plane(rng.uniform(0, 255, size=(11, 9)))
    for ksize in (3, 5):
        kernel = Kernel(rng.standard_normal((ksize, ksize)))
        for policy in BorderPolicy:
            got = convolve2d(plane, kernel, policy).samples
            want = naive_correlate(plane.samples, kernel.weights, policy.value)
            assert np.allclose(got, want, rtol=1e-12, atol=1e-9)


def test_convolve_is_correlation_not_flipped():
    # asymmetric kernel picking out the right-hand neighbour
    kernel = Kernel(np.array([[0.0, 0.0, 0.0],
                              [0.0, 0.0, 1.0],
                              [0.0, 0.0, 0.0]]))
    plane = Plane(np.arange(9, dtype=float).reshape(3, 3))
    out = convolve2d(plane, kernel, BorderPolicy.REPLICATE).samples
    assert out[1, 0] == plane.samples[1, 1]
    assert out[1, 1] == plane.samples[1, 2]


def test_convolve_identity_kernel_exact():
    rng = np.random.default_rng(3)
    plane = Plane(rng.uniform(0, 255, size=(8, 8)))
    ident = np.zeros((3, 3))
    ident[1, 1] = 1.0
    out = convolve2d(plane, Kernel(ident), BorderPolicy.REPLICATE)
    assert np.array_equal(out.samples, plane.samples)


def test_convolve_linearity():
    rng = np.random.default_rng(11)
    p = rng.uniform(-1, 1, size=(10, 10))
    q = rng.uniform(-1, 1, size=(10, 10))
    kernel = Kernel(rng.standard_normal((3, 3)))
    left = convolve2d(Plane(2.5 * p + q), kernel, BorderPolicy.REFLECT).samples
    right = (2.5 * convolve2d(Plane(p), kernel, BorderPolicy.REFLECT).samples
             + convolve2d(Plane(q), kernel, BorderPolicy.REFLECT).samples)
    assert np.allclose(left, right, atol=1e-12)


def test_convolve_constant_plane():
    plane = Plane(np.full((9, 9), 17.0))
    kernel = gaussian_kernel(5, 1.2)
    out = convolve2d(plane, kernel, BorderPolicy.REPLICATE).samples
    assert np.allclose(out, 17.0, atol=1e-12)


def test_convolve_border_policies_differ():
    # at distance 1 the two policies coincide; a 5x5 kernel reaches
    # distance 2 where replicate gives f(0) but reflect gives f(1)
    ramp = Plane(np.tile(np.arange(8, dtype=float) ** 2, (8, 1)))
    kernel = gaussian_kernel(5, 1.5)
    rep = convolve2d(ramp, kernel, BorderPolicy.REPLICATE).samples
    ref = convolve2d(ramp, kernel, BorderPolicy.REFLECT).samples
    assert np.allclose(rep[:, 3], ref[:, 3], atol=1e-12)  # interior agrees
    assert not np.allclose(rep[:, 0], ref[:, 0])


def test_convolve_kernel_too_large():
    with pytest.raises(DimensionError):
        convolve2d(Plane(np.zeros((4, 4))), gaussian_kernel(5, 1.0),
                   BorderPolicy.REPLICATE)


# ---------------------------------------------------------------------------
# downsampling


def test_downsample_block_mean_exact():
    plane = Plane(np.array([[0.0, 100.0], [100.0, 200.0]]))
    out = downsample2x(plane)
    assert out.samples.shape == (1, 1)
    assert out.samples[0, 0] == 100.0


def test_downsample_drops_odd_tail():
    plane = Plane(np.arange(15, dtype=float).reshape(3, 5))
    out = downsample2x(plane)
    assert out.samples.shape == (1, 2)
    # block means over the first two rows / four columns only
    assert out.samples[0, 0] == (0 + 1 + 5 + 6) / 4
    assert out.samples[0, 1] == (2 + 3 + 7 + 8) / 4


def test_downsample_matches_manual_blocks():
    rng = np.random.default_rng(5)
    arr = rng.uniform(0, 255, size=(12, 16))
    out = downsample2x(Plane(arr)).samples
    for y in range(6):
        for x in range(8):
            block = arr[2 * y:2 * y + 2, 2 * x:2 * x + 2]
            assert out[y, x] == pytest.approx(block.mean(), rel=1e-15)


def test_downsample_too_small():
    with pytest.raises(DimensionError):
        downsample2x(Plane(np.zeros((1, 8))))


# ---------------------------------------------------------------------------
# gaussian kernel


def test_gaussian_kernel_matches_formula():
    size, sigma = 7, 7.0 / 6.0
    kern = gaussian_kernel(size, sigma).weights
    half = size // 2
    raw = np.empty((size, size))
    for y in range(size):
        for x in range(size):
            raw[y, x] = np.exp(-((y - half) ** 2 + (x - half) ** 2)
                               / (2.0 * sigma ** 2))
    assert np.allclose(kern, raw / raw.sum(), atol=1e-15)


def test_gaussian_kernel_properties():
    kern = gaussian_kernel(7, 7.0 / 6.0).weights
    assert kern.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(kern, kern.T, atol=1e-15)
    assert np.allclose(kern, kern[::-1, ::-1], atol=1e-15)
    assert kern[3, 3] == kern.max()
    center_row = kern[3]
    assert np.all(np.diff(center_row[:4]) > 0)


def test_gaussian_kernel_validation():
    with pytest.raises(DimensionError):
        gaussian_kernel(4, 1.0)
    with pytest.raises(DimensionError):
        gaussian_kernel(5, 0.0)
