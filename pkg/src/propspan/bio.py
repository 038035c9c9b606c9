"""Span <-> token BIO projection, transition repair and pad/truncate masks."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import SpanAnnotation, TechniqueCatalog
from .textnorm import Token

O_ID = 0
# Ignore index used for masked-out positions.
PAD_ID = -100
DEFAULT_MAX_LEN = 512

LONGEST_SPAN_WINS = "longest_span_wins"
FIRST_START_WINS = "first_start_wins"


class TagSet:
    """Tags ``[O, B-t1, I-t1, ..., B-tK, I-tK]`` in catalog order."""

    def __init__(self, catalog: TechniqueCatalog):
        self.catalog = catalog
        self.tags = ["O"]
        for name in catalog:
            self.tags += [f"B-{name}", f"I-{name}"]
        self.ids = {tag: i for i, tag in enumerate(self.tags)}

    def __len__(self) -> int:
        return len(self.tags)

    def begin(self, technique: str) -> int:
        return 1 + 2 * self.catalog.id_of(technique)

    def inside(self, technique: str) -> int:
        return 2 + 2 * self.catalog.id_of(technique)

    def role(self, tag_id: int) -> str:
        if tag_id == O_ID:
            return "O"
        return "B" if tag_id % 2 == 1 else "I"

    def technique(self, tag_id: int) -> str | None:
        if tag_id == O_ID:
            return None
        return self.catalog.techniques[(tag_id - 1) // 2]

    def allowed_transitions(self) -> np.ndarray:
        """Boolean ``[prev, cur]`` matrix; I-x may only follow B-x or I-x."""
        n = len(self)
        allowed = np.ones((n, n), dtype=np.bool_)
        for cur in range(2, n, 2):
            allowed[:, cur] = False
            allowed[cur - 1, cur] = True
            allowed[cur, cur] = True
        return allowed

    def allowed_starts(self) -> np.ndarray:
        starts = np.ones(len(self), dtype=np.bool_)
        starts[2::2] = False
        return starts


def build_tagset(catalog: TechniqueCatalog) -> TagSet:
    return TagSet(catalog)


@dataclass(frozen=True)
class EncodingPolicy:
    min_overlap_chars: int = 1
    overlap_resolution: str = LONGEST_SPAN_WINS

    def __post_init__(self) -> None:
        if self.min_overlap_chars < 1:
            raise ValueError("min_overlap_chars must be >= 1")
        if self.overlap_resolution not in (LONGEST_SPAN_WINS, FIRST_START_WINS):
            raise ValueError(f"unknown overlap_resolution {self.overlap_resolution!r}")

    def to_dict(self) -> dict:
        return {"min_overlap_chars": self.min_overlap_chars, "overlap_resolution": self.overlap_resolution}


@dataclass(frozen=True)
class MaskedTagSequence:
    tags: np.ndarray
    mask: np.ndarray
    real_token_count: int


def _overlaps(a: SpanAnnotation, b: SpanAnnotation) -> bool:
    return a.start < b.end and b.start < a.end


def resolve_overlaps(
    spans: Sequence[SpanAnnotation], policy: EncodingPolicy | None = None
) -> list[SpanAnnotation]:
    """Greedily keep spans in priority order, dropping any that overlap a kept one."""
    policy = policy or EncodingPolicy()
    if policy.overlap_resolution == LONGEST_SPAN_WINS:
        order = sorted(spans, key=lambda s: (-(s.end - s.start), s.start, s.technique))
    else:
        order = sorted(spans, key=lambda s: (s.start, -(s.end - s.start), s.technique))
    kept: list[SpanAnnotation] = []
    for span in order:
        if not any(_overlaps(span, k) for k in kept):
            kept.append(span)
    return sorted(kept, key=lambda s: (s.start, s.end))


def encode(
    tokens: Sequence[Token],
    spans: Sequence[SpanAnnotation],
    tagset: TagSet,
    policy: EncodingPolicy | None = None,
) -> list[int]:
    policy = policy or EncodingPolicy()
    ordered = sorted(spans, key=lambda s: s.start)
    for a, b in zip(ordered, ordered[1:]):
        if _overlaps(a, b):
            raise ValueError(f"overlapping spans {a.key()} and {b.key()}; resolve them first")

    tags = [O_ID] * len(tokens)
    k = policy.min_overlap_chars
    for span in ordered:
        begin, inside = tagset.begin(span.technique), tagset.inside(span.technique)
        opened = False
        for i, tok in enumerate(tokens):
            if tok.start >= span.end:
                break
            # A token wholly inside the span is always covered, keeping runs contiguous.
            need = min(k, tok.end - tok.start)
            if min(tok.end, span.end) - max(tok.start, span.start) >= need:
                tags[i] = inside if opened else begin
                opened = True
    return tags


def repair(tags: Sequence[int], tagset: TagSet) -> list[int]:
    out = list(tags)
    prev = O_ID
    for i, tag in enumerate(out):
        if tag != O_ID and tag % 2 == 0 and prev not in (tag - 1, tag):
            out[i] = tag - 1
        prev = out[i]
    return out


def decode(tokens: Sequence[Token], tags: Sequence[int], tagset: TagSet) -> list[SpanAnnotation]:
    if len(tokens) != len(tags):
        raise ValueError(f"{len(tokens)} tokens but {len(tags)} tags")
    spans: list[SpanAnnotation] = []
    start = end = -1
    technique: str | None = None
    for tok, tag in zip(tokens, tags):
        role = tagset.role(tag)
        if role == "I" and technique == tagset.technique(tag):
            end = tok.end
            continue
        if technique is not None:
            spans.append(SpanAnnotation(technique, start, end))
            technique = None
        if role != "O":
            # An unrepaired I-x starts a new span, same as repair() would do.
            technique, start, end = tagset.technique(tag), tok.start, tok.end
    if technique is not None:
        spans.append(SpanAnnotation(technique, start, end))
    return spans


def pad_truncate(tags: Sequence[int], max_len: int = DEFAULT_MAX_LEN, pad_id: int = PAD_ID) -> MaskedTagSequence:
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    n = min(len(tags), max_len)
    out = np.full(max_len, pad_id, dtype=np.int64)
    out[:n] = np.asarray(tags[:n], dtype=np.int64)
    mask = np.zeros(max_len, dtype=np.int8)
    mask[:n] = 1
    return MaskedTagSequence(out, mask, n)
