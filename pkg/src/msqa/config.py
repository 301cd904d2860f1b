"""Run configuration: a flat key-value file with flag overrides.

The file format is one ``key = value`` per line, ``#`` comments, blank
lines ignored.  Recognised keys:

    brisque_model_path = /path/to/model.json
    eeg_fs_hz          = 256
    eeg_window_s       = 1.0
    eeg_hop_s          = 0.5
    eeg_event_k        = 2.0
    band_<name>        = <lo_hz>,<hi_hz>     (replaces or adds a band)
    direction_<metric> = higher | lower
    output_format      = json | csv | markdown
    parallelism        = auto | <positive integer>

Unknown keys are rejected so typos fail loudly.  The environment
variable ``EMOMV_EVAL_CONFIG`` names a default config file used when no
``--config`` flag is given.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

from .eeg import DEFAULT_BANDS, FrequencyBand
from .errors import BandError, ConfigError, ModelError
from .report import DEFAULT_DIRECTIONS, Direction

ENV_CONFIG_VAR = "EMOMV_EVAL_CONFIG"

OUTPUT_FORMATS = ("json", "csv", "markdown")

_BAND_PREFIX = "band_"
_DIRECTION_PREFIX = "direction_"


@dataclass
class RunConfig:
    """Validated settings shared by all subcommands."""

    brisque_model_path: Path | None = None
    eeg_fs_hz: float = 256.0
    eeg_window_s: float = 1.0
    eeg_hop_s: float = 0.5
    eeg_event_k: float = 2.0
    bands: tuple[FrequencyBand, ...] = DEFAULT_BANDS
    directions: dict[str, Direction] = field(
        default_factory=lambda: dict(DEFAULT_DIRECTIONS))
    output_format: str = "json"
    parallelism: int | str = "auto"

    def validate(self) -> "RunConfig":
        for name in ("eeg_fs_hz", "eeg_window_s", "eeg_hop_s", "eeg_event_k"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and v > 0):
                raise ConfigError(f"{name} must be positive, got {v!r}")
        if self.eeg_hop_s > self.eeg_window_s:
            raise ConfigError(
                f"eeg_hop_s ({self.eeg_hop_s}) must not exceed "
                f"eeg_window_s ({self.eeg_window_s})"
            )
        if not self.bands:
            raise ConfigError("at least one band is required")
        if self.output_format not in OUTPUT_FORMATS:
            raise ConfigError(
                f"output_format must be one of {', '.join(OUTPUT_FORMATS)}, "
                f"got {self.output_format!r}"
            )
        if self.parallelism != "auto":
            if not (isinstance(self.parallelism, int) and self.parallelism >= 1):
                raise ConfigError(
                    f"parallelism must be 'auto' or a positive integer, "
                    f"got {self.parallelism!r}"
                )
        # a configured model path is a model problem, not a config-syntax
        # problem, when the file is absent -- it maps to the model exit code
        if self.brisque_model_path is not None and not self.brisque_model_path.is_file():
            raise ModelError(f"model file not found: {self.brisque_model_path}")
        return self

    def resolve_parallelism(self) -> int:
        if self.parallelism == "auto":
            return os.cpu_count() or 1
        return int(self.parallelism)


def parse_kv(text: str, source: str = "<config>") -> dict[str, str]:
    """Parse the flat key-value syntax, preserving key order."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key '{key}'")
        out[key] = value
    return out


def parse_direction(value: str, where: str = "direction") -> Direction:
    norm = value.strip().lower()
    for d in Direction:
        if norm == d.value:
            return d
    raise ConfigError(f"{where}: expected 'higher' or 'lower', got {value!r}")


def _parse_band(name: str, value: str, where: str) -> FrequencyBand:
    parts = [p.strip() for p in value.split(",")]
    if len(parts) != 2:
        raise ConfigError(f"{where}: expected '<lo_hz>,<hi_hz>', got {value!r}")
    try:
        lo, hi = float(parts[0]), float(parts[1])
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc
    try:
        return FrequencyBand(name, lo, hi)
    except BandError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _parse_float(value: str, where: str) -> float:
    try:
        return float(value)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def build_run_config(kv: dict[str, str], source: str = "<config>") -> RunConfig:
    """Overlay parsed key-value pairs onto the defaults and validate."""
    cfg = RunConfig()
    bands = list(cfg.bands)
    for key, value in kv.items():
        where = f"{source}: key '{key}'"
        if key == "brisque_model_path":
            cfg.brisque_model_path = Path(value)
        elif key in ("eeg_fs_hz", "eeg_window_s", "eeg_hop_s", "eeg_event_k"):
            setattr(cfg, key, _parse_float(value, where))
        elif key == "output_format":
            cfg.output_format = value
        elif key == "parallelism":
            if value == "auto":
                cfg.parallelism = "auto"
            else:
                try:
                    cfg.parallelism = int(value)
                except ValueError as exc:
                    raise ConfigError(f"{where}: {exc}") from exc
        elif key.startswith(_BAND_PREFIX) and len(key) > len(_BAND_PREFIX):
            band = _parse_band(key[len(_BAND_PREFIX):], value, where)
            for i, existing in enumerate(bands):
                if existing.name == band.name:
                    bands[i] = band
                    break
            else:
                bands.append(band)
        elif key.startswith(_DIRECTION_PREFIX) and len(key) > len(_DIRECTION_PREFIX):
            metric = key[len(_DIRECTION_PREFIX):]
            cfg.directions[metric] = parse_direction(value, where)
        else:
            raise ConfigError(f"{where}: unknown key")
    cfg.bands = tuple(bands)
    return cfg.validate()


def load_run_config(path: str | Path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {p}: {exc}") from exc
    return build_run_config(parse_kv(text, source=str(p)), source=str(p))


def default_run_config() -> RunConfig:
    """Config from ``EMOMV_EVAL_CONFIG`` when set, else the defaults."""
    env_path = os.environ.get(ENV_CONFIG_VAR)
    if env_path:
        return load_run_config(env_path)
    return RunConfig().validate()


def load_directions_file(path: str | Path) -> dict[str, Direction]:
    """Read a ``metric = higher|lower`` file into a direction map."""
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read directions file {p}: {exc}") from exc
    kv = parse_kv(text, source=str(p))
    return {
        metric: parse_direction(value, where=f"{p}: key '{metric}'")
        for metric, value in kv.items()
    }
