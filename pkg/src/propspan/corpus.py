"""Shared-task JSONL ingestion, validation, statistics and prediction output.

Offsets are counted in Unicode code points (Python ``str`` indices) and
``end`` is exclusive, so ``text[start:end]`` is the annotated fragment.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

GENRES = ("tweet", "paragraph", "unknown")

# Span-length histogram buckets (inclusive upper bounds, in characters).
LENGTH_BUCKETS = (5, 10, 20, 50, 100, 200)


@dataclass(frozen=True)
class SpanAnnotation:
    technique: str
    start: int
    end: int
    valid: bool = True

    def __len__(self) -> int:
        return max(0, self.end - self.start)

    def key(self) -> tuple[int, int, str]:
        return (self.start, self.end, self.technique)


@dataclass(frozen=True)
class Sample:
    id: str
    text: str | None
    spans: tuple[SpanAnnotation, ...] = ()
    genre: str = "unknown"

    def valid_spans(self) -> list[SpanAnnotation]:
        return [s for s in self.spans if s.valid]


@dataclass(frozen=True)
class ParseWarning:
    line_no: int
    message: str
    sample_id: str | None = None

    def __str__(self) -> str:
        where = f"line {self.line_no}"
        if self.sample_id is not None:
            where += f" (id={self.sample_id})"
        return f"{where}: {self.message}"


@dataclass(frozen=True)
class Violation:
    kind: str
    detail: str = ""
    span_index: int = -1


# Violation kinds
OUT_OF_BOUNDS = "OutOfBounds"
START_NOT_BEFORE_END = "StartNotBeforeEnd"
UNKNOWN_TECHNIQUE = "UnknownTechnique"
EMPTY_TEXT = "EmptyText"


class TechniqueCatalog:
    """Ordered technique names with a dense 0-based id mapping."""

    def __init__(self, techniques: Iterable[str]):
        names = tuple(techniques)
        if len(set(names)) != len(names):
            raise ValueError("technique names must be distinct")
        if not names:
            raise ValueError("catalog must contain at least one technique")
        self.techniques = names
        self.ids = {name: i for i, name in enumerate(names)}

    def __len__(self) -> int:
        return len(self.techniques)

    def __contains__(self, name: object) -> bool:
        return name in self.ids

    def __iter__(self) -> Iterator[str]:
        return iter(self.techniques)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, TechniqueCatalog) and self.techniques == other.techniques

    def __repr__(self) -> str:
        return f"TechniqueCatalog({list(self.techniques)!r})"

    def id_of(self, name: str) -> int:
        return self.ids[name]

    def to_list(self) -> list[str]:
        return list(self.techniques)


@dataclass
class CorpusStats:
    split: str
    sample_count: int
    genre_counts: dict[str, int]
    technique_counts: dict[str, int]
    technique_percentages: dict[str, float]
    span_length_histogram: dict[str, int]
    zero_span_samples: int
    total_spans: int = 0
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "split": self.split,
            "sample_count": self.sample_count,
            "genre_counts": self.genre_counts,
            "technique_counts": self.technique_counts,
            "technique_percentages": self.technique_percentages,
            "span_length_histogram": self.span_length_histogram,
            "zero_span_samples": self.zero_span_samples,
            "total_spans": self.total_spans,
        }


def _check_span(span: SpanAnnotation, text: str | None) -> str | None:
    if span.start >= span.end:
        return "span start not before end"
    if span.start < 0 or (text is not None and span.end > len(text)):
        return "span out of bounds"
    return None


def _parse_line(
    line: str, line_no: int, catalog: TechniqueCatalog | None
) -> tuple[Sample | None, list[ParseWarning]]:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        return None, [ParseWarning(line_no, f"invalid JSON: {exc.msg}")]
    if not isinstance(obj, dict):
        return None, [ParseWarning(line_no, "line is not a JSON object")]

    raw_id = obj.get("id")
    if raw_id is None or (isinstance(raw_id, str) and not raw_id) or isinstance(raw_id, (dict, list, bool)):
        return None, [ParseWarning(line_no, "missing or empty id")]
    sample_id = str(raw_id)

    text = obj.get("text")
    if text is not None and not isinstance(text, str):
        return None, [ParseWarning(line_no, "text is not a string", sample_id)]

    labels = obj.get("labels", [])
    if labels is None:
        labels = []
    if not isinstance(labels, list):
        return None, [ParseWarning(line_no, "labels is not a list", sample_id)]

    genre = obj.get("type", "unknown")
    if genre not in GENRES:
        genre = "unknown"

    warnings: list[ParseWarning] = []
    spans: list[SpanAnnotation] = []
    for label in labels:
        if not isinstance(label, dict):
            warnings.append(ParseWarning(line_no, "label entry is not an object", sample_id))
            continue
        technique, start, end = label.get("technique"), label.get("start"), label.get("end")
        if (
            not isinstance(technique, str)
            or isinstance(start, bool)
            or isinstance(end, bool)
            or not isinstance(start, int)
            or not isinstance(end, int)
        ):
            warnings.append(ParseWarning(line_no, "label entry lacks technique/start/end", sample_id))
            continue
        span = SpanAnnotation(technique, start, end)
        problem = _check_span(span, text)
        if problem is None and catalog is not None and technique not in catalog:
            problem = f"unknown technique {technique!r}"
        if problem is not None:
            warnings.append(ParseWarning(line_no, problem, sample_id))
            span = SpanAnnotation(technique, start, end, valid=False)
        spans.append(span)

    return Sample(sample_id, text, tuple(spans), genre), warnings


def parse_dataset(
    lines: Iterable[str], catalog: TechniqueCatalog | None = None
) -> tuple[list[Sample], list[ParseWarning]]:
    """Parse JSONL lines into samples.

    A bad line never aborts the parse: it is reported as a warning carrying
    its 1-based line number. Spans that fail bounds or catalog checks are
    kept with ``valid=False`` and reported too. Duplicate ids are dropped
    with a warning.
    """
    samples: list[Sample] = []
    warnings: list[ParseWarning] = []
    seen: set[str] = set()
    for line_no, line in enumerate(lines, 1):
        if not line.strip():
            continue
        sample, line_warnings = _parse_line(line, line_no, catalog)
        warnings.extend(line_warnings)
        if sample is None:
            continue
        if sample.id in seen:
            warnings.append(ParseWarning(line_no, "duplicate id", sample.id))
            continue
        seen.add(sample.id)
        samples.append(sample)
    return samples, warnings


def read_dataset(
    path: str, catalog: TechniqueCatalog | None = None
) -> tuple[list[Sample], list[ParseWarning]]:
    # I/O errors propagate; only content problems become warnings.
    with open(path, "r", encoding="utf-8") as f:
        return parse_dataset(f, catalog)


def validate_sample(sample: Sample, catalog: TechniqueCatalog) -> list[Violation]:
    violations: list[Violation] = []
    if sample.text is not None and not sample.text:
        violations.append(Violation(EMPTY_TEXT))
    for i, span in enumerate(sample.spans):
        if span.start >= span.end:
            violations.append(Violation(START_NOT_BEFORE_END, f"{span.start}>={span.end}", i))
        elif span.start < 0 or (sample.text is not None and span.end > len(sample.text)):
            violations.append(Violation(OUT_OF_BOUNDS, f"({span.start},{span.end})", i))
        if span.technique not in catalog:
            violations.append(Violation(UNKNOWN_TECHNIQUE, span.technique, i))
    return violations


def build_catalog(samples: Sequence[Sample]) -> TechniqueCatalog:
    if not samples:
        raise ValueError("cannot build a catalog from zero samples")
    names = {span.technique for sample in samples for span in sample.spans if span.valid}
    if not names:
        raise ValueError("no techniques observed in samples")
    return TechniqueCatalog(sorted(names))


def _length_bucket(length: int) -> str:
    lo = 1
    for hi in LENGTH_BUCKETS:
        if length <= hi:
            return f"{lo}-{hi}"
        lo = hi + 1
    return f"{lo}+"


def compute_stats(samples: Sequence[Sample], split: str = "all") -> CorpusStats:
    genres = Counter({g: 0 for g in GENRES})
    techniques: Counter[str] = Counter()
    lengths: Counter[str] = Counter()
    zero = 0
    for sample in samples:
        genres[sample.genre] += 1
        spans = sample.valid_spans()
        if not spans:
            zero += 1
        for span in spans:
            techniques[span.technique] += 1
            lengths[_length_bucket(len(span))] += 1

    total = sum(techniques.values())
    percentages = {t: 100.0 * n / total for t, n in techniques.items()} if total else {}
    bucket_order = [_length_bucket(b) for b in LENGTH_BUCKETS] + [_length_bucket(LENGTH_BUCKETS[-1] + 1)]
    histogram = {b: lengths.get(b, 0) for b in bucket_order}
    return CorpusStats(
        split=split,
        sample_count=len(samples),
        genre_counts=dict(genres),
        technique_counts=dict(techniques.most_common()),
        technique_percentages={t: percentages[t] for t, _ in techniques.most_common()},
        span_length_histogram=histogram,
        zero_span_samples=zero,
        total_spans=total,
    )


def prediction_record(sample: Sample, with_text: bool = False) -> dict:
    record: dict = {"id": sample.id}
    if with_text:
        record["text"] = sample.text
    record["labels"] = [
        {"technique": s.technique, "start": s.start, "end": s.end} for s in sample.spans
    ]
    return record


def serialize_predictions(samples: Iterable[Sample], with_text: bool = False) -> list[str]:
    """One JSON line per sample with keys ``id`` and ``labels``.

    Raises ValueError for any span with start >= end, a negative start, or an
    end past the sample's text (when the text is known).
    """
    lines = []
    for sample in samples:
        for span in sample.spans:
            problem = _check_span(span, sample.text)
            if problem is not None:
                raise ValueError(f"sample {sample.id}: {problem} ({span.start},{span.end})")
        lines.append(json.dumps(prediction_record(sample, with_text), ensure_ascii=False))
    return lines


def write_jsonl(path: str, lines: Iterable[str]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for line in lines:
            f.write(line)
            f.write("\n")
