"""Dataset-level aggregation, two-condition comparisons, and rendering.

Per-metric statistics (mean / sample std / min / max with skip counts),
externally produced score ingestion (mean + population variance), winner
marking between two datasets under per-metric better-directions, and
deterministic JSON / CSV / markdown serialization of both.

Conventions, also recorded in the JSON output: metric spread is the
sample standard deviation (n-1); score spread is the population variance
(n).  Winners are decided on means only.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import ConfigError, EmptyInputError, ParseError, SchemaError

_STATS_SCHEMA = "stats.v1"
_COMPARISON_SCHEMA = "comparison.v1"

_CONVENTIONS = {
    "std": "sample (n-1)",
    "score_variance": "population (n)",
}

_EVENTS_SUFFIX = "_events"


class Direction(enum.Enum):
    """Whether a larger or smaller metric value counts as better."""

    HIGHER_BETTER = "higher"
    LOWER_BETTER = "lower"


class Winner(enum.Enum):
    A = "A"
    B = "B"
    TIE = "Tie"


# Better-directions for the built-in metrics; *_events entries inherit
# from their base metric unless configured explicitly.
DEFAULT_DIRECTIONS: dict[str, Direction] = {
    "sharpness": Direction.HIGHER_BETTER,
    "contrast": Direction.HIGHER_BETTER,
    "colorfulness": Direction.HIGHER_BETTER,
    "brisque": Direction.LOWER_BETTER,
    "alpha": Direction.LOWER_BETTER,
    "beta": Direction.HIGHER_BETTER,
    "gamma": Direction.HIGHER_BETTER,
    "vila_mean": Direction.HIGHER_BETTER,
    "vila_variance": Direction.LOWER_BETTER,
}


@dataclass(frozen=True)
class MetricStats:
    """Aggregate of one metric over a dataset.

    ``skipped`` counts records excluded before aggregation (e.g. images
    whose score was degenerate); they take no part in the statistics.
    """

    mean: float
    std: float
    min: float
    max: float
    count: int
    skipped: int = 0

    def __post_init__(self) -> None:
        if self.count < 1:
            raise ValueError(f"count must be >= 1, got {self.count}")
        if self.skipped < 0:
            raise ValueError(f"skipped must be >= 0, got {self.skipped}")
        for name in ("mean", "std", "min", "max"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.std < 0:
            raise ValueError(f"std must be >= 0, got {self.std}")
        if not (self.min <= self.mean <= self.max):
            raise ValueError(
                f"mean {self.mean} outside [{self.min}, {self.max}]"
            )
        if self.count == 1 and self.std != 0.0:
            raise ValueError("std must be 0 for a single value")


@dataclass(frozen=True)
class StatsSet:
    """Labelled, ordered mapping of metric name to :class:`MetricStats`."""

    label: str
    metrics: dict[str, MetricStats]


@dataclass(frozen=True)
class ScoreStats:
    """Mean and population variance of an ingested score column."""

    count: int
    mean: float
    variance: float


@dataclass(frozen=True)
class ComparisonRow:
    metric: str
    direction: Direction
    a: MetricStats
    b: MetricStats
    winner: Winner


@dataclass(frozen=True)
class ComparisonTable:
    label_a: str
    label_b: str
    rows: tuple[ComparisonRow, ...]
    warnings: tuple[str, ...] = ()


# ---------------------------------------------------------------------------
# aggregation


def aggregate(values: Iterable[float | None]) -> MetricStats:
    """Mean, sample std (n-1), min, and max over the non-None values.

    ``None`` entries are counted as skipped and otherwise ignored.
    Compensated summation keeps the result identical under any reordering
    of the input.
    """
    kept: list[float] = []
    skipped = 0
    for v in values:
        if v is None:
            skipped += 1
            continue
        v = float(v)
        if not math.isfinite(v):
            raise ValueError(f"values must be finite, got {v}")
        kept.append(v)
    if not kept:
        raise EmptyInputError(
            f"no values to aggregate ({skipped} skipped)"
        )
    n = len(kept)
    lo = min(kept)
    hi = max(kept)
    mean = math.fsum(kept) / n
    # the exact mean lies in [lo, hi]; clamp away any final-rounding escape
    mean = min(max(mean, lo), hi)
    if n > 1:
        var = math.fsum((v - mean) ** 2 for v in kept) / (n - 1)
        std = math.sqrt(var)
    else:
        std = 0.0
    return MetricStats(mean=mean, std=std, min=lo, max=hi, count=n, skipped=skipped)


def aggregate_scores(scores: Sequence[float]) -> ScoreStats:
    """Mean and population variance (n denominator) of a score list."""
    if len(scores) == 0:
        raise EmptyInputError("no scores to aggregate")
    vals = [float(s) for s in scores]
    for v in vals:
        if not math.isfinite(v):
            raise ValueError(f"scores must be finite, got {v}")
    n = len(vals)
    mean = math.fsum(vals) / n
    variance = math.fsum((v - mean) ** 2 for v in vals) / n
    return ScoreStats(count=n, mean=mean, variance=variance)


def load_score_file(path: str | Path) -> list[tuple[str, float]]:
    """Read an ``id,score`` CSV into (identifier, score) pairs.

    Identifiers must be unique and scores finite; violations raise
    :class:`ParseError`.
    """
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {p}: {exc}") from exc
    return parse_score_csv(text, source=str(p))


def parse_score_csv(text: str, source: str = "<scores>") -> list[tuple[str, float]]:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError(f"{source}: empty file") from None
    if [h.strip() for h in header] != ["id", "score"]:
        raise ParseError(f"{source}: expected header 'id,score', got {header!r}")
    rows: list[tuple[str, float]] = []
    seen: set[str] = set()
    for lineno, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != 2:
            raise ParseError(f"{source}:{lineno}: expected 2 columns, got {len(row)}")
        ident = row[0].strip()
        if not ident:
            raise ParseError(f"{source}:{lineno}: empty identifier")
        if ident in seen:
            raise ParseError(f"{source}:{lineno}: duplicate identifier {ident!r}")
        seen.add(ident)
        try:
            score = float(row[1])
        except ValueError as exc:
            raise ParseError(f"{source}:{lineno}: {exc}") from exc
        if not math.isfinite(score):
            raise ParseError(f"{source}:{lineno}: score must be finite, got {score}")
        rows.append((ident, score))
    return rows


# ---------------------------------------------------------------------------
# comparison


def resolve_direction(metric: str, directions: Mapping[str, Direction]) -> Direction:
    """Direction for ``metric``; ``X_events`` falls back to ``X``."""
    if metric in directions:
        return directions[metric]
    if metric.endswith(_EVENTS_SUFFIX):
        base = metric[: -len(_EVENTS_SUFFIX)]
        if base in directions:
            return directions[base]
    raise SchemaError(f"no direction configured for metric '{metric}'")


def _pick_winner(mean_a: float, mean_b: float, direction: Direction) -> Winner:
    if math.isclose(mean_a, mean_b, rel_tol=1e-9, abs_tol=0.0):
        return Winner.TIE
    if (mean_a > mean_b) == (direction is Direction.HIGHER_BETTER):
        return Winner.A
    return Winner.B


def _family(metric: str) -> str:
    if metric.endswith(_EVENTS_SUFFIX):
        return metric[: -len(_EVENTS_SUFFIX)]
    return metric


def compare(a: StatsSet, b: StatsSet,
            directions: Mapping[str, Direction] | None = None) -> ComparisonTable:
    """Winner per metric by comparing means under its direction.

    Both sets must cover the same metric names.  Means equal within 1e-9
    relative tie.  When two metrics of the same family (a base metric and
    its ``_events`` companion) share a direction but favour opposite
    sides, a warning describing the inconsistency is attached.
    """
    if directions is None:
        directions = DEFAULT_DIRECTIONS
    names_a = list(a.metrics.keys())
    extra_a = [m for m in names_a if m not in b.metrics]
    extra_b = [m for m in b.metrics if m not in a.metrics]
    if extra_a or extra_b:
        parts = []
        if extra_a:
            parts.append(f"only in {a.label or 'A'}: {', '.join(extra_a)}")
        if extra_b:
            parts.append(f"only in {b.label or 'B'}: {', '.join(extra_b)}")
        raise SchemaError(f"metric names do not match ({'; '.join(parts)})")
    rows = []
    for metric in names_a:
        direction = resolve_direction(metric, directions)
        sa = a.metrics[metric]
        sb = b.metrics[metric]
        rows.append(ComparisonRow(
            metric=metric,
            direction=direction,
            a=sa,
            b=sb,
            winner=_pick_winner(sa.mean, sb.mean, direction),
        ))
    warnings = _direction_warnings(rows)
    return ComparisonTable(
        label_a=a.label,
        label_b=b.label,
        rows=tuple(rows),
        warnings=tuple(warnings),
    )


def _direction_warnings(rows: Sequence[ComparisonRow]) -> list[str]:
    """Flag families whose members share a direction yet favour opposite
    sides; marking one consistent winner for such a row group is then
    impossible."""
    by_family: dict[str, list[ComparisonRow]] = {}
    for row in rows:
        by_family.setdefault(_family(row.metric), []).append(row)
    warnings = []
    for family, members in by_family.items():
        if len(members) < 2:
            continue
        if len({row.direction for row in members}) != 1:
            continue  # explicitly configured apart; disagreement is intentional
        decided = [row for row in members if row.winner is not Winner.TIE]
        if {row.winner for row in decided} == {Winner.A, Winner.B}:
            detail = ", ".join(
                f"'{row.metric}' favors {row.winner.value}" for row in decided
            )
            word = "higher" if members[0].direction is Direction.HIGHER_BETTER else "lower"
            warnings.append(
                f"direction inconsistency in family '{family}' "
                f"({word} is better): {detail}"
            )
    return warnings


# ---------------------------------------------------------------------------
# rendering


def render(obj: ComparisonTable | StatsSet, fmt: str) -> str:
    """Serialize a comparison table or stats set as json / csv / markdown.

    Output is deterministic, UTF-8-friendly text ending in a newline; the
    markdown form mirrors a row-group table with "(Mean ± Std)" and
    "(Min, Max)" lines per metric, bolding the winner's mean cell.
    """
    if isinstance(obj, ComparisonTable):
        table = {
            "json": _table_json,
            "csv": _table_csv,
            "markdown": _table_markdown,
        }
    elif isinstance(obj, StatsSet):
        table = {
            "json": _stats_json,
            "csv": _stats_csv,
            "markdown": _stats_markdown,
        }
    else:
        raise TypeError(f"cannot render {type(obj).__name__}")
    if fmt not in table:
        raise ConfigError(f"unknown format '{fmt}' (expected json, csv, or markdown)")
    return table[fmt](obj)


def _fmt2(x: float) -> str:
    return f"{x:.2f}"


def _stats_dict(s: MetricStats) -> dict:
    return {
        "mean": s.mean,
        "std": s.std,
        "min": s.min,
        "max": s.max,
        "count": s.count,
        "skipped": s.skipped,
    }


def _stats_from_dict(doc: dict, where: str) -> MetricStats:
    try:
        return MetricStats(
            mean=float(doc["mean"]),
            std=float(doc["std"]),
            min=float(doc["min"]),
            max=float(doc["max"]),
            count=int(doc["count"]),
            skipped=int(doc.get("skipped", 0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{where}: bad metric stats: {exc}") from exc


def _table_json(t: ComparisonTable) -> str:
    doc = {
        "schema": _COMPARISON_SCHEMA,
        "label_a": t.label_a,
        "label_b": t.label_b,
        "conventions": _CONVENTIONS,
        "rows": [
            {
                "metric": r.metric,
                "direction": r.direction.value,
                "winner": r.winner.value,
                "a": _stats_dict(r.a),
                "b": _stats_dict(r.b),
            }
            for r in t.rows
        ],
        "warnings": list(t.warnings),
    }
    return json.dumps(doc, indent=2) + "\n"


def table_from_json(text: str) -> ComparisonTable:
    """Inverse of the JSON rendering; raises :class:`ParseError` on any
    structural problem."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("schema") != _COMPARISON_SCHEMA:
        raise ParseError(f"not a {_COMPARISON_SCHEMA} document")
    try:
        rows = tuple(
            ComparisonRow(
                metric=str(r["metric"]),
                direction=Direction(r["direction"]),
                winner=Winner(r["winner"]),
                a=_stats_from_dict(r["a"], r.get("metric", "?")),
                b=_stats_from_dict(r["b"], r.get("metric", "?")),
            )
            for r in doc["rows"]
        )
        return ComparisonTable(
            label_a=str(doc["label_a"]),
            label_b=str(doc["label_b"]),
            rows=rows,
            warnings=tuple(str(w) for w in doc.get("warnings", [])),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed comparison document: {exc}") from exc


def _table_csv(t: ComparisonTable) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([
        "metric", "direction", "winner",
        "a_mean", "a_std", "a_min", "a_max", "a_count", "a_skipped",
        "b_mean", "b_std", "b_min", "b_max", "b_count", "b_skipped",
    ])
    for r in t.rows:
        writer.writerow([
            r.metric, r.direction.value, r.winner.value,
            repr(r.a.mean), repr(r.a.std), repr(r.a.min), repr(r.a.max),
            r.a.count, r.a.skipped,
            repr(r.b.mean), repr(r.b.std), repr(r.b.min), repr(r.b.max),
            r.b.count, r.b.skipped,
        ])
    return buf.getvalue()


def _arrow(direction: Direction) -> str:
    return "↑" if direction is Direction.HIGHER_BETTER else "↓"


def _mean_cell(s: MetricStats, won: bool) -> str:
    cell = f"{_fmt2(s.mean)} ± {_fmt2(s.std)}"
    return f"**{cell}**" if won else cell


def _range_cell(s: MetricStats) -> str:
    return f"({_fmt2(s.min)}, {_fmt2(s.max)})"


def _table_markdown(t: ComparisonTable) -> str:
    lines = [
        f"| Metric |  | {t.label_a} | {t.label_b} |",
        "| --- | --- | --- | --- |",
    ]
    for r in t.rows:
        lines.append(
            f"| {r.metric} | (Mean ± Std) {_arrow(r.direction)} "
            f"| {_mean_cell(r.a, r.winner is Winner.A)} "
            f"| {_mean_cell(r.b, r.winner is Winner.B)} |"
        )
        lines.append(f"|  | (Min, Max) | {_range_cell(r.a)} | {_range_cell(r.b)} |")
    if t.warnings:
        lines.append("")
        lines.append("Warnings:")
        for w in t.warnings:
            lines.append(f"- {w}")
    return "\n".join(lines) + "\n"


def _stats_json(s: StatsSet) -> str:
    doc = {
        "schema": _STATS_SCHEMA,
        "label": s.label,
        "conventions": _CONVENTIONS,
        "metrics": {name: _stats_dict(m) for name, m in s.metrics.items()},
    }
    return json.dumps(doc, indent=2) + "\n"


def stats_set_from_json(text: str, source: str = "<stats>") -> StatsSet:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{source}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("schema") != _STATS_SCHEMA:
        raise ParseError(f"{source}: not a {_STATS_SCHEMA} document")
    metrics_doc = doc.get("metrics")
    if not isinstance(metrics_doc, dict):
        raise ParseError(f"{source}: missing 'metrics' mapping")
    metrics = {
        str(name): _stats_from_dict(m, f"{source}:{name}")
        for name, m in metrics_doc.items()
    }
    return StatsSet(label=str(doc.get("label", "")), metrics=metrics)


def load_stats_file(path: str | Path) -> StatsSet:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {p}: {exc}") from exc
    return stats_set_from_json(text, source=str(p))


def _stats_csv(s: StatsSet) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["metric", "mean", "std", "min", "max", "count", "skipped"])
    for name, m in s.metrics.items():
        writer.writerow([
            name, repr(m.mean), repr(m.std), repr(m.min), repr(m.max),
            m.count, m.skipped,
        ])
    return buf.getvalue()


def _stats_markdown(s: StatsSet) -> str:
    lines = [
        f"| Metric |  | {s.label} |",
        "| --- | --- | --- |",
    ]
    for name, m in s.metrics.items():
        lines.append(f"| {name} | (Mean ± Std) | {_fmt2(m.mean)} ± {_fmt2(m.std)} |")
        lines.append(f"|  | (Min, Max) | {_range_cell(m)} |")
        lines.append(f"|  | (Count, Skipped) | ({m.count}, {m.skipped}) |")
    return "\n".join(lines) + "\n"
