"""Command-line entry point: stats, train, predict, score, analyze.

Exit codes: 0 success, 1 internal failure, 2 user or input error. Reports go
to stdout, diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from typing import Sequence

from .config import ConfigError, RunConfig, load_config, parse_override
from .corpus import (
    Sample,
    TechniqueCatalog,
    build_catalog,
    compute_stats,
    read_dataset,
    serialize_predictions,
    write_jsonl,
)
from .scorer import ScoringError, confusion, format_leaderboard, leaderboard, score_corpus
from .tagger import ModelFormatError, load_model, predict, save_model, train

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USER = 2


class UserError(Exception):
    """Bad input or arguments; reported and mapped to exit code 2."""


class _Context:
    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.quiet = args.quiet
        self.json = args.json

    def diag(self, message: str) -> None:
        if not self.quiet:
            print(message, file=sys.stderr)

    def config(self) -> RunConfig:
        overrides = dict(parse_override(item) for item in self.args.set or [])
        if self.args.seed is not None:
            overrides["train.seed"] = self.args.seed
        return load_config(self.args.config, overrides)


def _read(ctx: _Context, path: str, catalog: TechniqueCatalog | None = None) -> list[Sample]:
    try:
        samples, warnings = read_dataset(path, catalog)
    except OSError as exc:
        raise UserError(f"cannot read {path}: {exc.strerror or exc}") from exc
    except UnicodeDecodeError as exc:
        raise UserError(f"{path} is not valid UTF-8") from exc
    for w in warnings:
        ctx.diag(f"{path}: {w}")
    return samples


def _stats_table(stats) -> str:
    lines = [f"== {stats.split} ==", f"samples: {stats.sample_count}"]
    lines.append("genres: " + ", ".join(f"{g}={n}" for g, n in stats.genre_counts.items()))
    lines.append(f"samples without spans: {stats.zero_span_samples}")
    lines.append(f"spans: {stats.total_spans}")
    if stats.technique_counts:
        width = max(len(t) for t in stats.technique_counts)
        lines.append(f"{'technique':<{width}}  {'count':>6}  {'share':>7}")
        for tech, count in stats.technique_counts.items():
            lines.append(f"{tech:<{width}}  {count:6d}  {stats.technique_percentages[tech]:6.2f}%")
    lines.append("span length (chars): " + ", ".join(f"{b}:{n}" for b, n in stats.span_length_histogram.items()))
    return "\n".join(lines)


def cmd_stats(ctx: _Context) -> int:
    reports = []
    for path in ctx.args.datasets:
        samples = _read(ctx, path)
        if not samples:
            raise UserError(f"{path}: no valid samples")
        split = os.path.splitext(os.path.basename(path))[0]
        reports.append(compute_stats(samples, split))
    if ctx.json:
        print(json.dumps([r.to_dict() for r in reports], indent=2, ensure_ascii=False))
    else:
        print("\n\n".join(_stats_table(r) for r in reports))
    return EXIT_OK


def cmd_train(ctx: _Context) -> int:
    cfg = ctx.config()
    a = ctx.args
    paths = cfg.paths
    train_path = a.train or paths.train
    dev_path = a.dev or paths.dev
    model_path = a.model or paths.model
    if not (train_path and dev_path and model_path):
        raise UserError("train needs paths.train, paths.dev and paths.model (config or flags)")
    telemetry = a.telemetry or paths.telemetry or model_path + ".csv"

    train_samples = _read(ctx, train_path)
    dev_samples = _read(ctx, dev_path)
    if not train_samples or not dev_samples:
        raise UserError("training and dev files must each contain at least one valid sample")
    try:
        catalog = build_catalog(train_samples + dev_samples)
    except ValueError as exc:
        raise UserError(str(exc)) from exc

    model, report = train(train_samples, dev_samples, catalog, cfg.train, cfg.features, cfg.norm, cfg.encoding)
    save_model(model, model_path)
    with open(telemetry, "w", encoding="utf-8", newline="") as f:
        f.write(report.to_csv())

    final = report.final_val_f1
    if ctx.json:
        print(json.dumps({"model": model_path, "telemetry": telemetry, "val_span_f1": final,
                          "epochs": len(report.epochs), "wall_time": report.wall_time}))
    else:
        print(f"final validation span micro-F1: {final:.4f}")
    return EXIT_OK


def cmd_predict(ctx: _Context) -> int:
    a = ctx.args
    try:
        model = load_model(a.model)
    except OSError as exc:
        raise UserError(f"cannot read model {a.model}: {exc.strerror or exc}") from exc
    except ModelFormatError as exc:
        raise UserError(str(exc)) from exc
    samples = _read(ctx, a.input)
    out = [Sample(s.id, s.text, tuple(predict(model, s)), s.genre) for s in samples]
    write_jsonl(a.output, serialize_predictions(out, with_text=a.with_text))
    ctx.diag(f"wrote {len(out)} predictions to {a.output}")
    return EXIT_OK


def _score_one(gold: list[Sample], pred: list[Sample], include_absent: bool):
    catalog = None
    if include_absent:
        catalog = build_catalog(gold)
    return score_corpus(gold, pred, catalog, include_absent)


def cmd_score(ctx: _Context) -> int:
    cfg = ctx.config()
    include_absent = ctx.args.include_absent or cfg.scorer.include_absent_techniques
    gold = _read(ctx, ctx.args.gold)
    reports = {}
    for path in ctx.args.preds:
        try:
            reports[path] = _score_one(gold, _read(ctx, path), include_absent)
        except ScoringError as exc:
            raise UserError(f"{path}: {exc}") from exc
    if len(reports) == 1:
        report = next(iter(reports.values()))
        print(report.to_json() if ctx.json else report.format_text())
        return EXIT_OK
    rows = leaderboard(reports)
    if ctx.json:
        print(json.dumps([{"system": name, **r.to_dict()} for name, r in rows], indent=2, ensure_ascii=False))
    else:
        print(format_leaderboard(rows))
    return EXIT_OK


def cmd_analyze(ctx: _Context) -> int:
    gold = _read(ctx, ctx.args.gold)
    pred = _read(ctx, ctx.args.pred)
    names = {s.technique for sample in gold + pred for s in sample.valid_spans()}
    if not names:
        raise UserError("no technique spans in either file")
    catalog = TechniqueCatalog(sorted(names))
    try:
        matrix = confusion(gold, pred, catalog)
        report = score_corpus(gold, pred)
    except ScoringError as exc:
        raise UserError(str(exc)) from exc
    top = matrix.top_confused(ctx.args.top_k)
    recall = matrix.technique_recall()

    if ctx.json:
        print(json.dumps({
            "confusion": matrix.to_dict(),
            "off_diagonal_chars": matrix.off_diagonal(),
            "total_chars": matrix.total,
            "top_confused": [{"gold": g, "pred": p, "chars": n} for g, p, n in top],
            "technique_recall": [{"technique": t, "char_recall": r, "gold_chars": n} for t, r, n in recall],
            "gold_spans": report.gold_spans,
            "pred_spans": report.pred_spans,
        }, indent=2, ensure_ascii=False))
        return EXIT_OK

    labels = matrix.labels
    width = max(len(x) for x in labels)
    cell = max(6, len(str(int(matrix.counts.max()))) + 1)
    lines = ["character-level confusion (rows = gold, columns = predicted)"]
    lines.append(" " * width + "".join(f"{i:>{cell}}" for i in range(len(labels))))
    for i, label in enumerate(labels):
        lines.append(f"{label:<{width}}" + "".join(f"{int(v):>{cell}}" for v in matrix.counts[i]) + f"   [{i}]")
    lines.append("")
    lines.append(f"total chars: {matrix.total}  off-diagonal: {matrix.off_diagonal()}")
    lines.append(f"gold spans: {report.gold_spans}  pred spans: {report.pred_spans}")
    lines.append("")
    lines.append("most confused pairs (gold -> pred, chars):")
    for g, p, n in top:
        lines.append(f"  {g} -> {p}: {n}")
    if not top:
        lines.append("  none")
    lines.append("")
    lines.append("per-technique character recall:")
    for tech, r, n in recall:
        lines.append(f"  {tech}: {r:.4f} ({n} gold chars)")
    print("\n".join(lines))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file with namespaced keys")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")
    common.add_argument("--json", action="store_true", help="machine-readable output")
    common.add_argument("--seed", type=int, help="shuffle seed (overrides train.seed)")
    common.add_argument("--quiet", action="store_true", help="suppress diagnostics on stderr")

    parser = argparse.ArgumentParser(prog="propspan", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", parents=[common], help="corpus statistics")
    p.add_argument("datasets", nargs="+")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("train", parents=[common], help="train a tagger")
    p.add_argument("--train")
    p.add_argument("--dev")
    p.add_argument("--model")
    p.add_argument("--telemetry", help="per-epoch CSV (default: MODEL.csv)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", parents=[common], help="tag a dataset")
    p.add_argument("model")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--with-text", action="store_true", help="keep the text field in the output")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("score", parents=[common], help="score one or more prediction files")
    p.add_argument("gold")
    p.add_argument("preds", nargs="+")
    p.add_argument("--include-absent", action="store_true",
                   help="macro-F1 over every technique in the gold catalog")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("analyze", parents=[common], help="confusion and error analysis")
    p.add_argument("gold")
    p.add_argument("pred")
    p.add_argument("--top-k", type=int, default=5)
    p.set_defaults(func=cmd_analyze)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USER if exc.code else EXIT_OK
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    ctx = _Context(args)
    try:
        return args.func(ctx)
    except (UserError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USER
    except Exception as exc:  # noqa: BLE001 - last-resort mapping to exit code 1
        print(f"internal error: {exc!r}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
