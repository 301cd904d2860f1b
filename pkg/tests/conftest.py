"""Shared fixture builders and independent oracles.

Everything here is deliberately written the straightforward way (pure
Python loops, explicit index handling) so tests check the library
against independent computations rather than against itself.
"""

from __future__ import annotations

import io
import struct

import numpy as np
import pytest
from PIL import Image
from scipy import ndimage


# ---------------------------------------------------------------------------
# image fixtures


def make_texture(seed: int, size: int = 200, smooth: float = 2.5,
                 amp: float = 55.0) -> np.ndarray:
    """Smoothed seeded noise field in [0, 255], float64."""
    rng = np.random.default_rng(seed)
    field = ndimage.gaussian_filter(rng.standard_normal((size, size)), smooth)
    field = 128.0 + amp * field / field.std()
    return np.clip(field, 0.0, 255.0)


def gray_to_rgb(gray: np.ndarray) -> np.ndarray:
    """Quantise a [0, 255] float plane and stack it into an RGB array."""
    u8 = np.clip(np.rint(gray), 0, 255).astype(np.uint8)
    return np.stack([u8, u8, u8], axis=-1)


def color_texture(seed: int, size: int = 96) -> np.ndarray:
    """RGB uint8 texture with per-channel structure."""
    rng = np.random.default_rng(seed)
    channels = []
    for c in range(3):
        field = ndimage.gaussian_filter(rng.standard_normal((size, size)), 2.0 + c)
        channels.append(np.clip(128 + 45 * field / field.std(), 0, 255))
    return np.stack(channels, axis=-1).astype(np.uint8)


def encode_png(rgb: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(rgb, "RGB").save(buf, format="PNG")
    return buf.getvalue()


def write_png(path, rgb: np.ndarray) -> None:
    path.write_bytes(encode_png(rgb))


# ---------------------------------------------------------------------------
# convolution oracle


def naive_correlate(arr: np.ndarray, kernel: np.ndarray, border: str) -> np.ndarray:
    """Direct correlation with explicit out-of-bounds handling.

    ``border`` is "replicate" (clamp indices) or "reflect" (mirror about
    the edge, edge sample included).
    """
    h, w = arr.shape
    k = kernel.shape[0]
    half = k // 2

    def fix(i: int, n: int) -> int:
        while i < 0 or i >= n:
            if i < 0:
                i = -i - 1 if border == "reflect" else 0
            else:
                i = 2 * n - i - 1 if border == "reflect" else n - 1
        return i

    out = np.zeros_like(arr, dtype=np.float64)
    for y in range(h):
        for x in range(w):
            acc = 0.0
            for dy in range(-half, half + 1):
                for dx in range(-half, half + 1):
                    yy = fix(y + dy, h)
                    xx = fix(x + dx, w)
                    acc += kernel[dy + half, dx + half] * arr[yy, xx]
            out[y, x] = acc
    return out


# ---------------------------------------------------------------------------
# EEG fixtures


def periodic_tone(freq_hz: int, fs: int, n: int, amp: float = 1.0) -> np.ndarray:
    """Sine whose samples repeat bit-identically each cycle of fs samples.

    The phase is reduced with integer arithmetic before evaluating sin,
    so equal phases give equal floats; analysis windows starting at
    commensurate offsets then see identical data.
    """
    phase = (freq_hz * np.arange(n)) % fs
    return amp * np.sin(2.0 * np.pi * phase / fs)


def recording_csv_text(channels: np.ndarray, fs: float) -> str:
    n = channels.shape[1]
    lines = ["time," + ",".join(f"ch{i + 1}" for i in range(channels.shape[0]))]
    for i in range(n):
        cells = [repr(i / fs)] + [repr(float(v)) for v in channels[:, i]]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def recording_binary_blob(channels: np.ndarray, fs: float) -> bytes:
    """Independent encoder for the EEG1 container (the reader is tested
    against this, not against a package-side writer)."""
    ch = np.ascontiguousarray(channels, dtype="<f8")
    header = struct.pack("<4sIdQ", b"EEG1", ch.shape[0], float(fs), ch.shape[1])
    return header + ch.tobytes()


# ---------------------------------------------------------------------------
# stats-file fixtures


def stats_doc(label: str, metrics: dict[str, tuple]) -> dict:
    """Build a stats.v1 document from {name: (mean, std, min, max, count)}."""
    return {
        "schema": "stats.v1",
        "label": label,
        "metrics": {
            name: {"mean": m, "std": s, "min": lo, "max": hi,
                   "count": c, "skipped": 0}
            for name, (m, s, lo, hi, c) in metrics.items()
        },
    }


@pytest.fixture
def fixture_image_dir(tmp_path):
    """Directory of three decodable synthetic images."""
    d = tmp_path / "imgs"
    d.mkdir()
    for i in range(3):
        write_png(d / f"img_{i:02d}.png", color_texture(seed=100 + i))
    return d
