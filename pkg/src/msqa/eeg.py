"""EEG frequency-band analysis.

Welch power spectral densities, band-power integrals, sliding-window
band-power series, and a simple threshold event detector, wrapped up in a
per-band summary.  Two recording encodings are supported: CSV with a
``time,ch1,...`` header (sample rate supplied by the caller) and a small
binary container that carries the rate itself.
"""

from __future__ import annotations

import csv
import io
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import signal as sps

from .errors import BandError, ConfigError, LengthError, ParseError

_BINARY_MAGIC = b"EEG1"
# magic, channel count, sample rate, samples per channel
_BINARY_HEADER = struct.Struct("<4sIdQ")


@dataclass(frozen=True)
class FrequencyBand:
    """Half-open analysis band [lo_hz, hi_hz) with 0 < lo < hi."""

    name: str
    lo_hz: float
    hi_hz: float

    def __post_init__(self) -> None:
        if not self.name:
            raise BandError("band name must be non-empty")
        if not (0.0 < self.lo_hz < self.hi_hz):
            raise BandError(
                f"band '{self.name}' needs 0 < lo < hi, got "
                f"[{self.lo_hz}, {self.hi_hz})"
            )


ALPHA_BAND = FrequencyBand("alpha", 8.0, 13.0)
BETA_BAND = FrequencyBand("beta", 13.0, 30.0)
GAMMA_BAND = FrequencyBand("gamma", 30.0, 45.0)
DEFAULT_BANDS: tuple[FrequencyBand, ...] = (ALPHA_BAND, BETA_BAND, GAMMA_BAND)


@dataclass(frozen=True, eq=False)
class EegRecording:
    """Multi-channel recording: (n_channels, n_samples) float64 at a
    uniform sample rate."""

    sample_rate_hz: float
    channels: np.ndarray

    def __post_init__(self) -> None:
        if not (self.sample_rate_hz > 0) or not np.isfinite(self.sample_rate_hz):
            raise ConfigError(f"sample rate must be positive, got {self.sample_rate_hz}")
        ch = np.asarray(self.channels, dtype=np.float64)
        if ch.ndim != 2 or ch.shape[0] < 1 or ch.shape[1] < 1:
            raise LengthError(
                f"channels must be a non-empty (n_channels, n_samples) array, "
                f"got shape {ch.shape}"
            )
        if not np.all(np.isfinite(ch)):
            raise ParseError("recording contains non-finite samples")
        object.__setattr__(self, "channels", ch)

    @property
    def n_channels(self) -> int:
        return int(self.channels.shape[0])

    @property
    def n_samples(self) -> int:
        return int(self.channels.shape[1])

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sample_rate_hz


@dataclass(frozen=True, eq=False)
class Psd:
    """One-sided power spectral density on an ascending frequency grid."""

    freqs_hz: np.ndarray
    power: np.ndarray

    def __post_init__(self) -> None:
        f = np.asarray(self.freqs_hz, dtype=np.float64)
        p = np.asarray(self.power, dtype=np.float64)
        if f.ndim != 1 or f.size < 2 or p.shape != f.shape:
            raise LengthError(
                f"PSD needs matching 1-D grids of length >= 2, got "
                f"{f.shape} / {p.shape}"
            )
        if f[0] < 0 or np.any(np.diff(f) <= 0):
            raise BandError("frequency grid must be non-negative and ascending")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise LengthError("PSD power must be finite and non-negative")
        object.__setattr__(self, "freqs_hz", f)
        object.__setattr__(self, "power", p)

    @property
    def nyquist_hz(self) -> float:
        return float(self.freqs_hz[-1])


@dataclass(frozen=True)
class BandSummary:
    """Mean sliding-window power and event count for one band."""

    band: FrequencyBand
    mean_power: float
    event_count: int


def welch_psd(samples: Sequence[float] | np.ndarray,
              sample_rate_hz: float,
              segment_len: int = 256,
              overlap: float = 0.5) -> Psd:
    """Welch PSD estimate: Hann window, density scaling, no detrending.

    ``segment_len`` must be a power of two >= 8 and no longer than the
    signal; ``overlap`` is the fraction of each segment shared with the
    next, in [0, 1).  Detrending is off so the DC bin keeps the signal
    mean and the integral of the density matches the mean squared value.
    """
    x = np.asarray(samples, dtype=np.float64).ravel()
    if not (sample_rate_hz > 0) or not np.isfinite(sample_rate_hz):
        raise ConfigError(f"sample rate must be positive, got {sample_rate_hz}")
    if segment_len < 8 or (segment_len & (segment_len - 1)) != 0:
        raise ConfigError(
            f"segment_len must be a power of two >= 8, got {segment_len}"
        )
    if not (0.0 <= overlap < 1.0):
        raise ConfigError(f"overlap must be in [0, 1), got {overlap}")
    if x.size < segment_len:
        raise LengthError(
            f"signal has {x.size} samples, need at least {segment_len}"
        )
    noverlap = min(int(round(segment_len * overlap)), segment_len - 1)
    freqs, power = sps.welch(
        x,
        fs=sample_rate_hz,
        window="hann",
        nperseg=segment_len,
        noverlap=noverlap,
        detrend=False,
        scaling="density",
        return_onesided=True,
    )
    return Psd(freqs, np.maximum(power, 0.0))


def _integrate_linear(freqs: np.ndarray, power: np.ndarray,
                      lo: float, hi: float) -> float:
    """Integral of the piecewise-linear PSD interpolant over [lo, hi].

    Interior grid points are kept and the two edges are interpolated, so
    integrals over a partition of the axis add up to the whole exactly
    (up to float rounding).
    """
    lo = max(lo, float(freqs[0]))
    hi = min(hi, float(freqs[-1]))
    if hi <= lo:
        return 0.0
    inside = freqs[(freqs > lo) & (freqs < hi)]
    grid = np.concatenate(([lo], inside, [hi]))
    vals = np.interp(grid, freqs, power)
    return float(np.trapezoid(vals, grid))


def band_power(psd: Psd, band: FrequencyBand) -> float:
    """Power in ``band``: integral of the linearly interpolated density.

    Raises :class:`BandError` when the band tops out above the PSD's
    Nyquist frequency.
    """
    if band.hi_hz > psd.nyquist_hz:
        raise BandError(
            f"band '{band.name}' reaches {band.hi_hz} Hz but the PSD ends "
            f"at {psd.nyquist_hz} Hz"
        )
    return _integrate_linear(psd.freqs_hz, psd.power, band.lo_hz, band.hi_hz)


def total_power(psd: Psd) -> float:
    """Integral of the density over the full frequency grid."""
    return _integrate_linear(psd.freqs_hz, psd.power,
                             float(psd.freqs_hz[0]), psd.nyquist_hz)


def _window_samples(window_s: float, hop_s: float, sample_rate_hz: float) -> tuple[int, int]:
    if not (window_s > 0) or not (hop_s > 0):
        raise ConfigError(
            f"window and hop must be positive, got {window_s} / {hop_s}"
        )
    if hop_s > window_s:
        raise ConfigError(f"hop ({hop_s}s) must not exceed window ({window_s}s)")
    win_n = int(round(window_s * sample_rate_hz))
    hop_n = int(round(hop_s * sample_rate_hz))
    if win_n < 8:
        raise ConfigError(
            f"window of {window_s}s at {sample_rate_hz} Hz is only "
            f"{win_n} samples; need at least 8"
        )
    return win_n, max(hop_n, 1)


def _pow2_at_most(n: int) -> int:
    return 1 << (n.bit_length() - 1)


def band_power_series(recording: EegRecording,
                      band: FrequencyBand,
                      window_s: float,
                      hop_s: float) -> np.ndarray:
    """Band power over sliding windows, averaged across channels.

    Each window gets its own Welch estimate (segment length: largest power
    of two that fits the window, 50% overlap); windows start every
    ``hop_s`` seconds and only complete windows are used.
    """
    fs = recording.sample_rate_hz
    win_n, hop_n = _window_samples(window_s, hop_s, fs)
    if recording.n_samples < win_n:
        raise LengthError(
            f"recording has {recording.n_samples} samples but one window "
            f"needs {win_n}"
        )
    seg = _pow2_at_most(win_n)
    starts = range(0, recording.n_samples - win_n + 1, hop_n)
    out = np.empty(len(starts), dtype=np.float64)
    for i, s in enumerate(starts):
        chunk = recording.channels[:, s:s + win_n]
        per_channel = [
            band_power(welch_psd(chunk[c], fs, segment_len=seg, overlap=0.5), band)
            for c in range(recording.n_channels)
        ]
        out[i] = float(np.mean(per_channel))
    return out


def detect_events(series: Sequence[float] | np.ndarray, k: float = 2.0) -> int:
    """Number of maximal runs strictly above mean + k * sample std.

    The threshold uses the sample (n-1) standard deviation, which makes
    the count invariant under positive affine rescaling of the series.
    A series whose total range is below 1e-9 of its magnitude is treated
    as constant (zero events): its threshold would sit inside
    floating-point noise and the crossings would be meaningless.
    """
    x = np.asarray(series, dtype=np.float64).ravel()
    if x.size < 4:
        raise LengthError(f"need a series of at least 4 points, got {x.size}")
    if not (k > 0) or not np.isfinite(k):
        raise ConfigError(f"k must be positive and finite, got {k}")
    lo = float(x.min())
    hi = float(x.max())
    if hi - lo <= 1e-9 * max(abs(lo), abs(hi)):
        return 0
    threshold = x.mean() + k * x.std(ddof=1)
    above = x > threshold
    rising = np.count_nonzero(above[1:] & ~above[:-1]) + int(above[0])
    return int(rising)


def summarize_bands(recording: EegRecording,
                    bands: Iterable[FrequencyBand] = DEFAULT_BANDS,
                    window_s: float = 1.0,
                    hop_s: float = 0.5,
                    k: float = 2.0) -> list[BandSummary]:
    """Mean band power and event count for each band.

    The recording must cover at least twice the analysis window; every
    band is measured on the same window grid so the summaries line up.
    """
    band_list = list(bands)
    if not band_list:
        raise ConfigError("need at least one band")
    win_n, _ = _window_samples(window_s, hop_s, recording.sample_rate_hz)
    if recording.n_samples < 2 * win_n:
        raise LengthError(
            f"recording has {recording.n_samples} samples; need at least "
            f"{2 * win_n} (twice the analysis window)"
        )
    summaries = []
    for band in band_list:
        series = band_power_series(recording, band, window_s, hop_s)
        summaries.append(BandSummary(
            band=band,
            mean_power=float(series.mean()),
            event_count=detect_events(series, k=k),
        ))
    return summaries


# ---------------------------------------------------------------------------
# recording I/O


def load_recording_csv(path: str | Path, sample_rate_hz: float) -> EegRecording:
    """Read a ``time,ch1,...`` CSV.  The time column is advisory; sampling
    is taken to be uniform at ``sample_rate_hz``."""
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {p}: {exc}") from exc
    return _parse_recording_csv(text, sample_rate_hz, source=str(p))


def _parse_recording_csv(text: str, sample_rate_hz: float, source: str = "<csv>") -> EegRecording:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError(f"{source}: empty file") from None
    header = [h.strip() for h in header]
    if len(header) < 2 or header[0] != "time":
        raise ParseError(
            f"{source}: expected header 'time,ch1,...', got {header!r}"
        )
    n_cols = len(header)
    columns: list[list[float]] = [[] for _ in range(n_cols - 1)]
    for lineno, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue  # ignore blank lines
        if len(row) != n_cols:
            raise ParseError(
                f"{source}:{lineno}: expected {n_cols} columns, got {len(row)}"
            )
        try:
            values = [float(v) for v in row[1:]]
        except ValueError as exc:
            raise ParseError(f"{source}:{lineno}: {exc}") from exc
        for col, v in zip(columns, values):
            col.append(v)
    if not columns[0]:
        raise ParseError(f"{source}: no sample rows")
    return EegRecording(sample_rate_hz, np.array(columns, dtype=np.float64))


def load_recording_binary(path: str | Path) -> EegRecording:
    """Read the binary container: magic ``EEG1``, little-endian header
    (u32 channel count, f64 sample rate, u64 samples per channel), then
    channel-major float64 samples."""
    p = Path(path)
    try:
        blob = p.read_bytes()
    except OSError as exc:
        raise ParseError(f"cannot read {p}: {exc}") from exc
    return _parse_recording_binary(blob, source=str(p))


def _parse_recording_binary(blob: bytes, source: str = "<binary>") -> EegRecording:
    if len(blob) < _BINARY_HEADER.size:
        raise ParseError(f"{source}: truncated header ({len(blob)} bytes)")
    magic, n_channels, fs, n_samples = _BINARY_HEADER.unpack_from(blob)
    if magic != _BINARY_MAGIC:
        raise ParseError(f"{source}: bad magic {magic!r}")
    if n_channels < 1 or n_samples < 1:
        raise ParseError(
            f"{source}: header declares {n_channels} channels x {n_samples} samples"
        )
    expected = _BINARY_HEADER.size + 8 * n_channels * n_samples
    if len(blob) != expected:
        raise ParseError(
            f"{source}: expected {expected} bytes for declared shape, got {len(blob)}"
        )
    data = np.frombuffer(blob, dtype="<f8", offset=_BINARY_HEADER.size)
    channels = data.reshape(n_channels, n_samples).astype(np.float64)
    try:
        return EegRecording(fs, channels)
    except ConfigError as exc:
        raise ParseError(f"{source}: {exc}") from exc


def load_recording(path: str | Path,
                   csv_sample_rate_hz: float | None = None) -> EegRecording:
    """Load either encoding, sniffing the binary magic.

    CSV input needs ``csv_sample_rate_hz``; the binary container carries
    its own rate and ignores the argument.
    """
    p = Path(path)
    try:
        with open(p, "rb") as fh:
            head = fh.read(len(_BINARY_MAGIC))
    except OSError as exc:
        raise ParseError(f"cannot read {p}: {exc}") from exc
    if head == _BINARY_MAGIC:
        return load_recording_binary(p)
    if csv_sample_rate_hz is None:
        raise ConfigError(
            f"{p} looks like CSV; a sample rate is required for CSV input"
        )
    return load_recording_csv(p, csv_sample_rate_hz)
