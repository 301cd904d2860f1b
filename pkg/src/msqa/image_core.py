"""Image primitives: buffers, planes, kernels, and the small set of
spatial operations the quality metrics are built on.

Pixel data is kept in two forms.  :class:`ImageBuffer` is decoded RGB,
8 bits per channel.  :class:`Plane` is a single float64 channel (a
luminance image, a filter response, an opponent-colour channel, ...).
All filtering is plain 2-D correlation -- kernels are applied as given,
without flipping.
"""

from __future__ import annotations

import enum
import io
from dataclasses import dataclass

import numpy as np
from PIL import Image, UnidentifiedImageError
from scipy import ndimage

from .errors import DecodeError, DimensionError

# Rec. 601 luma weights for R, G, B.
_LUMA_WEIGHTS = (0.299, 0.587, 0.114)

_SUPPORTED_FORMATS = {"PNG", "JPEG"}


class BorderPolicy(enum.Enum):
    """How samples outside the image are synthesised during filtering."""

    REPLICATE = "replicate"  # edge value is repeated outward
    REFLECT = "reflect"      # mirror about the edge, edge sample included

    @property
    def ndimage_mode(self) -> str:
        return {"replicate": "nearest", "reflect": "reflect"}[self.value]


@dataclass(frozen=True, eq=False)
class ImageBuffer:
    """Decoded RGB image, shape (height, width, 3), dtype uint8."""

    pixels: np.ndarray

    def __post_init__(self) -> None:
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3:
            raise DimensionError(f"expected (h, w, 3) pixels, got shape {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise DimensionError("image must be at least 1x1")
        if px.dtype != np.uint8:
            raise DimensionError(f"expected uint8 pixels, got {px.dtype}")
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])


@dataclass(frozen=True, eq=False)
class Plane:
    """Single-channel float64 image, shape (height, width), all finite."""

    samples: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.samples, dtype=np.float64)
        if arr.ndim != 2:
            raise DimensionError(f"expected a 2-D plane, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DimensionError("plane must be at least 1x1")
        if not np.all(np.isfinite(arr)):
            raise DimensionError("plane contains non-finite samples")
        object.__setattr__(self, "samples", arr)

    @property
    def height(self) -> int:
        return int(self.samples.shape[0])

    @property
    def width(self) -> int:
        return int(self.samples.shape[1])


@dataclass(frozen=True, eq=False)
class Kernel:
    """Square filter kernel with odd side length, float64 weights."""

    weights: np.ndarray

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise DimensionError(f"kernel must be square, got shape {w.shape}")
        if w.shape[0] % 2 != 1:
            raise DimensionError(f"kernel side must be odd, got {w.shape[0]}")
        if not np.all(np.isfinite(w)):
            raise DimensionError("kernel contains non-finite weights")
        object.__setattr__(self, "weights", w)

    @property
    def size(self) -> int:
        return int(self.weights.shape[0])


def decode_image(data: bytes) -> ImageBuffer:
    """Decode PNG or JPEG bytes into an RGB :class:`ImageBuffer`.

    Grayscale, palette, and alpha-carrying inputs are converted to RGB.
    Raises :class:`DecodeError` for corrupt data or any other format.
    """
    try:
        with Image.open(io.BytesIO(data)) as im:
            fmt = im.format
            if fmt not in _SUPPORTED_FORMATS:
                raise DecodeError(f"unsupported image format: {fmt}")
            rgb = im.convert("RGB")
            px = np.asarray(rgb, dtype=np.uint8)
    except DecodeError:
        raise
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise DecodeError(f"could not decode image: {exc}") from exc
    if px.ndim != 3 or px.shape[0] < 1 or px.shape[1] < 1:
        raise DimensionError(f"decoded image has unusable shape {px.shape}")
    return ImageBuffer(px)


def to_luminance(image: ImageBuffer) -> Plane:
    """Rec. 601 luminance, 0.299 R + 0.587 G + 0.114 B, in [0, 255]."""
    px = image.pixels.astype(np.float64)
    wr, wg, wb = _LUMA_WEIGHTS
    lum = wr * px[:, :, 0] + wg * px[:, :, 1] + wb * px[:, :, 2]
    return Plane(lum)


def convolve2d(plane: Plane, kernel: Kernel, border: BorderPolicy) -> Plane:
    """Correlate ``plane`` with ``kernel`` (no kernel flip), same-size output.

    Out-of-bounds samples come from ``border``.  Output size equals input
    size; the kernel must fit inside the plane.
    """
    if kernel.size > plane.height or kernel.size > plane.width:
        raise DimensionError(
            f"kernel {kernel.size}x{kernel.size} larger than plane "
            f"{plane.height}x{plane.width}"
        )
    out = ndimage.correlate(plane.samples, kernel.weights, mode=border.ndimage_mode)
    return Plane(out)


def downsample2x(plane: Plane) -> Plane:
    """Halve each dimension by averaging disjoint 2x2 blocks.

    A trailing odd row/column is dropped.  Both dimensions must be >= 2.
    """
    h, w = plane.height, plane.width
    if h < 2 or w < 2:
        raise DimensionError(f"cannot downsample a {h}x{w} plane")
    h2, w2 = h // 2, w // 2
    trimmed = plane.samples[: 2 * h2, : 2 * w2]
    blocks = trimmed.reshape(h2, 2, w2, 2)
    return Plane(blocks.mean(axis=(1, 3)))


def gaussian_kernel(size: int, sigma: float) -> Kernel:
    """Sampled 2-D Gaussian with the given side length, normalised to sum 1."""
    if size < 1 or size % 2 != 1:
        raise DimensionError(f"kernel size must be odd and positive, got {size}")
    if sigma <= 0:
        raise DimensionError(f"sigma must be positive, got {sigma}")
    half = size // 2
    coords = np.arange(-half, half + 1, dtype=np.float64)
    g = np.exp(-(coords**2) / (2.0 * sigma**2))
    k2d = np.outer(g, g)
    return Kernel(k2d / k2d.sum())
