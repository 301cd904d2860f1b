"""Batch command-line front end.

Four subcommands: ``iqa`` scores a directory of images, ``eeg``
summarises a recording per band, ``compare`` marks winners between two
stats files, and ``ingest-scores`` turns an external ``id,score`` CSV
into a comparable stats file.

Results go to stdout (or ``--out``); logs go to stderr.  Exit codes:
0 success, 2 input error, 3 model error, 4 configuration/Nyquist error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import config as cfgmod
from . import eeg as eegmod
from . import iqa as iqamod
from . import report as repmod
from .errors import (
    BandError,
    ConfigError,
    EmptyInputError,
    ModelError,
    MsqaError,
    ParseError,
)
from .image_core import decode_image

log = logging.getLogger("msqa")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_MODEL = 3
EXIT_CONFIG = 4

_IQA_METRICS = ("sharpness", "contrast", "colorfulness", "brisque")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="msqa",
        description="Image quality metrics, EEG band summaries, and "
                    "dataset comparison reports.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", metavar="PATH",
                       help="run config file (default: $%s if set)"
                            % cfgmod.ENV_CONFIG_VAR)
        p.add_argument("--out", metavar="PATH",
                       help="write the result here instead of stdout")
        p.add_argument("--format", choices=cfgmod.OUTPUT_FORMATS,
                       help="output format (default from config: json)")

    p_iqa = sub.add_parser("iqa", help="score every image in a directory")
    p_iqa.add_argument("directory", help="directory of PNG/JPEG images")
    p_iqa.add_argument("--model", metavar="PATH",
                       help="scoring model file (default: bundled model)")
    p_iqa.add_argument("--parallelism", metavar="N",
                       help="worker threads, or 'auto'")
    add_common(p_iqa)

    p_eeg = sub.add_parser("eeg", help="per-band power and event summary")
    p_eeg.add_argument("recording", help="CSV or EEG1 binary recording")
    p_eeg.add_argument("--fs", metavar="HZ", type=float,
                       help="sample rate for CSV input (default from config)")
    add_common(p_eeg)

    p_cmp = sub.add_parser("compare", help="winner-marked comparison of two stats files")
    p_cmp.add_argument("stats_a", help="stats JSON (condition A)")
    p_cmp.add_argument("stats_b", help="stats JSON (condition B)")
    p_cmp.add_argument("--directions", metavar="PATH",
                       help="file of 'metric = higher|lower' overrides")
    add_common(p_cmp)

    p_ing = sub.add_parser("ingest-scores",
                           help="aggregate an id,score CSV into a stats file")
    p_ing.add_argument("scores", help="CSV with header id,score")
    add_common(p_ing)

    return parser


def _load_config(args: argparse.Namespace) -> cfgmod.RunConfig:
    if args.config:
        return cfgmod.load_run_config(args.config)
    return cfgmod.default_run_config()


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _resolve_format(args: argparse.Namespace, cfg: cfgmod.RunConfig) -> str:
    return args.format if args.format else cfg.output_format


# ---------------------------------------------------------------------------
# iqa


def _score_file(path: Path, model: iqamod.BrisqueModel) -> iqamod.IqaRecord:
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise ParseError(f"cannot read {path.name}: {exc}") from exc
    return iqamod.iqa_all(decode_image(data), model)


def cmd_iqa(args: argparse.Namespace, cfg: cfgmod.RunConfig) -> int:
    directory = Path(args.directory)
    if not directory.is_dir():
        raise ParseError(f"not a directory: {directory}")
    try:
        files = sorted(p for p in directory.iterdir() if p.is_file())
    except OSError as exc:
        raise ParseError(f"cannot list directory {directory}: {exc}") from exc
    if not files:
        raise EmptyInputError(f"no files in directory {directory}")

    if args.model:
        model_path = Path(args.model)
    elif cfg.brisque_model_path is not None:
        model_path = cfg.brisque_model_path
    else:
        model_path = iqamod.default_model_path()
    model = iqamod.load_brisque_model(model_path)

    if args.parallelism is not None:
        workers_cfg: int | str
        if args.parallelism == "auto":
            workers_cfg = "auto"
        else:
            try:
                workers_cfg = int(args.parallelism)
            except ValueError as exc:
                raise ConfigError(f"--parallelism: {exc}") from exc
        cfg.parallelism = workers_cfg
        cfg.validate()
    workers = cfg.resolve_parallelism()

    records: list[tuple[str, iqamod.IqaRecord]] = []
    skipped_files: list[str] = []
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [(p.name, pool.submit(_score_file, p, model)) for p in files]
        for name, fut in futures:
            try:
                records.append((name, fut.result()))
            except MsqaError as exc:
                skipped_files.append(name)
                log.warning("skipping %s: %s", name, exc)
    if not records:
        raise EmptyInputError(
            f"no decodable images in {directory} "
            f"({len(skipped_files)} files skipped)"
        )
    log.info("scored %d images (%d skipped)", len(records), len(skipped_files))

    metrics = {
        name: repmod.aggregate(getattr(rec, name) for _, rec in records)
        for name in _IQA_METRICS
    }
    label = directory.name or str(directory)
    stats = repmod.StatsSet(label=label, metrics=metrics)

    fmt = _resolve_format(args, cfg)
    if fmt == "json":
        doc = json.loads(repmod.render(stats, "json"))
        doc["records"] = [
            {"file": name,
             "sharpness": rec.sharpness,
             "contrast": rec.contrast,
             "colorfulness": rec.colorfulness,
             "brisque": rec.brisque}
            for name, rec in records
        ]
        doc["skipped_files"] = skipped_files
        _emit(json.dumps(doc, indent=2) + "\n", args.out)
    elif fmt == "markdown":
        _emit(_records_markdown(records) + "\n" + repmod.render(stats, "markdown"),
              args.out)
    else:
        _emit(repmod.render(stats, "csv"), args.out)
    return EXIT_OK


def _records_markdown(records: list[tuple[str, iqamod.IqaRecord]]) -> str:
    lines = [
        "| File | " + " | ".join(_IQA_METRICS) + " |",
        "| --- | --- | --- | --- | --- |",
    ]
    for name, rec in records:
        cells = [f"{rec.sharpness:.2f}", f"{rec.contrast:.2f}",
                 f"{rec.colorfulness:.2f}",
                 "skipped" if rec.brisque is None else f"{rec.brisque:.2f}"]
        lines.append(f"| {name} | " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# eeg


def cmd_eeg(args: argparse.Namespace, cfg: cfgmod.RunConfig) -> int:
    path = Path(args.recording)
    fs = args.fs if args.fs is not None else cfg.eeg_fs_hz
    if not (fs > 0):
        raise ConfigError(f"sample rate must be positive, got {fs}")
    recording = eegmod.load_recording(path, csv_sample_rate_hz=fs)
    summaries = eegmod.summarize_bands(
        recording,
        bands=cfg.bands,
        window_s=cfg.eeg_window_s,
        hop_s=cfg.eeg_hop_s,
        k=cfg.eeg_event_k,
    )
    log.info(
        "%s: %d channels, %.1f s at %g Hz",
        path.name, recording.n_channels, recording.duration_s,
        recording.sample_rate_hz,
    )
    label = path.stem or str(path)
    fmt = _resolve_format(args, cfg)
    _emit(_render_band_summaries(summaries, label, fmt), args.out)
    return EXIT_OK


def _summary_metrics(summaries: list[eegmod.BandSummary]) -> dict[str, repmod.MetricStats]:
    metrics: dict[str, repmod.MetricStats] = {}
    for s in summaries:
        m = s.mean_power
        metrics[s.band.name] = repmod.MetricStats(
            mean=m, std=0.0, min=m, max=m, count=1)
        e = float(s.event_count)
        metrics[f"{s.band.name}_events"] = repmod.MetricStats(
            mean=e, std=0.0, min=e, max=e, count=1)
    return metrics


def _render_band_summaries(summaries: list[eegmod.BandSummary],
                           label: str, fmt: str) -> str:
    if fmt == "json":
        doc = json.loads(repmod.render(
            repmod.StatsSet(label=label, metrics=_summary_metrics(summaries)),
            "json",
        ))
        doc["bands"] = [
            {"name": s.band.name, "lo_hz": s.band.lo_hz, "hi_hz": s.band.hi_hz,
             "mean_power": s.mean_power, "events": s.event_count}
            for s in summaries
        ]
        return json.dumps(doc, indent=2) + "\n"
    if fmt == "markdown":
        lines = [f"| Band |  | {label} |", "| --- | --- | --- |"]
        for s in summaries:
            lines.append(f"| {s.band.name} | Mean | {s.mean_power:.2f} |")
            lines.append(f"|  | Events | {s.event_count} |")
        return "\n".join(lines) + "\n"
    lines = ["band,lo_hz,hi_hz,mean_power,events"]
    for s in summaries:
        lines.append(
            f"{s.band.name},{s.band.lo_hz!r},{s.band.hi_hz!r},"
            f"{s.mean_power!r},{s.event_count}"
        )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# compare / ingest


def cmd_compare(args: argparse.Namespace, cfg: cfgmod.RunConfig) -> int:
    stats_a = repmod.load_stats_file(args.stats_a)
    stats_b = repmod.load_stats_file(args.stats_b)
    directions = dict(cfg.directions)
    if args.directions:
        directions.update(cfgmod.load_directions_file(args.directions))
    table = repmod.compare(stats_a, stats_b, directions)
    for warning in table.warnings:
        log.warning("%s", warning)
    _emit(repmod.render(table, _resolve_format(args, cfg)), args.out)
    return EXIT_OK


def cmd_ingest_scores(args: argparse.Namespace, cfg: cfgmod.RunConfig) -> int:
    path = Path(args.scores)
    rows = repmod.load_score_file(path)
    score_stats = repmod.aggregate_scores([score for _, score in rows])
    log.info("ingested %d scores from %s", score_stats.count, path.name)
    m, v = score_stats.mean, score_stats.variance
    stats = repmod.StatsSet(
        label=path.stem or str(path),
        metrics={
            "vila_mean": repmod.MetricStats(
                mean=m, std=0.0, min=m, max=m, count=score_stats.count),
            "vila_variance": repmod.MetricStats(
                mean=v, std=0.0, min=v, max=v, count=score_stats.count),
        },
    )
    fmt = _resolve_format(args, cfg)
    if fmt == "json":
        doc = json.loads(repmod.render(stats, "json"))
        doc["scores"] = {"count": score_stats.count, "mean": m, "variance": v}
        _emit(json.dumps(doc, indent=2) + "\n", args.out)
    else:
        _emit(repmod.render(stats, fmt), args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------


_COMMANDS = {
    "iqa": cmd_iqa,
    "eeg": cmd_eeg,
    "compare": cmd_compare,
    "ingest-scores": cmd_ingest_scores,
}


def _exit_code(exc: MsqaError) -> int:
    if isinstance(exc, ModelError):
        return EXIT_MODEL
    if isinstance(exc, (ConfigError, BandError)):
        return EXIT_CONFIG
    return EXIT_INPUT


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.INFO,
        format="%(levelname)s %(message)s",
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args)
        return _COMMANDS[args.command](args, cfg)
    except MsqaError as exc:
        log.error("%s", exc)
        return _exit_code(exc)


def entry_point() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry_point()
