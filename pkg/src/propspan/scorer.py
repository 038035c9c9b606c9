"""Span-overlap precision/recall/F1, per-technique tables and confusion analysis.

A predicted span ``s`` earns ``|s & t| / |s|`` precision credit from every gold
span ``t`` of the same technique, and each gold span earns ``|s & t| / |t|``
recall credit symmetrically. Micro scores pool credit and span counts over
the whole corpus.

Before scoring, overlapping spans of the same technique on one side of a
sample are merged into their union, which keeps every score in [0, 1].
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .bio import EncodingPolicy, LONGEST_SPAN_WINS, resolve_overlaps
from .corpus import Sample, SpanAnnotation, TechniqueCatalog


class ScoringError(ValueError):
    """Gold and prediction files cannot be aligned or contain invalid spans."""


def span_intersection(s: SpanAnnotation, t: SpanAnnotation) -> int:
    return max(0, min(s.end, t.end) - max(s.start, t.start))


def _credit(s: SpanAnnotation, t: SpanAnnotation, norm: int) -> float:
    if s.technique != t.technique:
        return 0.0
    return span_intersection(s, t) / norm


def _check_spans(spans: Iterable[SpanAnnotation], text_len: int | None = None) -> None:
    for s in spans:
        if s.start < 0 or s.start >= s.end or (text_len is not None and s.end > text_len):
            raise ScoringError(f"invalid span ({s.start},{s.end},{s.technique})")


def _sums(pred: Sequence[SpanAnnotation], gold: Sequence[SpanAnnotation]) -> tuple[float, float]:
    p_num = 0.0
    for s in pred:
        p_num += sum(_credit(s, t, len(s)) for t in gold)
    r_num = 0.0
    for t in gold:
        r_num += sum(_credit(s, t, len(t)) for s in pred)
    return p_num, r_num


def _ratio(num: float, n_pred: int, n_gold: int) -> tuple[float, float]:
    # Nothing to find and nothing claimed counts as perfect.
    if n_pred == 0 and n_gold == 0:
        return 1.0, 1.0
    p = num[0] / n_pred if n_pred else 0.0
    r = num[1] / n_gold if n_gold else 0.0
    return p, r


def precision_recall(
    pred: Sequence[SpanAnnotation], gold: Sequence[SpanAnnotation]
) -> tuple[float, float]:
    _check_spans(pred)
    _check_spans(gold)
    return _ratio(_sums(pred, gold), len(pred), len(gold))


def f1(p: float, r: float) -> float:
    if p + r == 0:
        return 0.0
    return 2 * p * r / (p + r)


def merge_same_technique(spans: Iterable[SpanAnnotation]) -> list[SpanAnnotation]:
    by_tech: dict[str, list[SpanAnnotation]] = {}
    for s in spans:
        by_tech.setdefault(s.technique, []).append(s)
    merged: list[SpanAnnotation] = []
    for tech, group in by_tech.items():
        group.sort(key=lambda s: s.start)
        cur_start, cur_end = group[0].start, group[0].end
        for s in group[1:]:
            if s.start < cur_end:
                cur_end = max(cur_end, s.end)
            else:
                merged.append(SpanAnnotation(tech, cur_start, cur_end))
                cur_start, cur_end = s.start, s.end
        merged.append(SpanAnnotation(tech, cur_start, cur_end))
    merged.sort(key=lambda s: (s.start, s.end, s.technique))
    return merged


@dataclass
class TechniqueScore:
    technique: str
    precision: float
    recall: float
    f1: float
    gold_spans: int
    pred_spans: int


@dataclass
class ScoreReport:
    precision: float
    recall: float
    f1: float
    macro_f1: float
    per_technique: dict[str, TechniqueScore] = field(default_factory=dict)
    gold_spans: int = 0
    pred_spans: int = 0
    samples: int = 0

    def to_dict(self) -> dict:
        return {
            "micro": {"precision": self.precision, "recall": self.recall, "f1": self.f1},
            "macro_f1": self.macro_f1,
            "totals": {"samples": self.samples, "gold_spans": self.gold_spans, "pred_spans": self.pred_spans},
            "per_technique": {
                name: {
                    "precision": t.precision,
                    "recall": t.recall,
                    "f1": t.f1,
                    "gold_spans": t.gold_spans,
                    "pred_spans": t.pred_spans,
                }
                for name, t in self.per_technique.items()
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False)

    def format_text(self) -> str:
        lines = [
            f"micro  P={self.precision:.4f}  R={self.recall:.4f}  F1={self.f1:.4f}",
            f"macro  F1={self.macro_f1:.4f}",
            f"samples={self.samples}  gold_spans={self.gold_spans}  pred_spans={self.pred_spans}",
            "",
        ]
        if self.per_technique:
            width = max(len("technique"), *(len(n) for n in self.per_technique))
            lines.append(f"{'technique':<{width}}  {'P':>6}  {'R':>6}  {'F1':>6}  {'gold':>5}  {'pred':>5}")
            rows = sorted(self.per_technique.values(), key=lambda t: (-t.gold_spans, t.technique))
            for t in rows:
                lines.append(
                    f"{t.technique:<{width}}  {t.precision:6.4f}  {t.recall:6.4f}  {t.f1:6.4f}"
                    f"  {t.gold_spans:5d}  {t.pred_spans:5d}"
                )
        return "\n".join(lines)


def align(gold: Sequence[Sample], pred: Sequence[Sample]) -> list[tuple[Sample, list[SpanAnnotation]]]:
    """Pair every gold sample with its predicted spans (empty when missing).

    Raises ScoringError for a prediction id absent from gold or a predicted
    span outside the gold text.
    """
    gold_ids = {g.id for g in gold}
    by_id: dict[str, list[SpanAnnotation]] = {}
    for p in pred:
        if p.id not in gold_ids:
            raise ScoringError(f"prediction id {p.id!r} not present in gold")
        by_id.setdefault(p.id, []).extend(p.spans)
    pairs = []
    for g in gold:
        spans = by_id.get(g.id, [])
        _check_spans(spans, len(g.text) if g.text is not None else None)
        pairs.append((g, spans))
    return pairs


def score_corpus(
    gold: Sequence[Sample],
    pred: Sequence[Sample],
    catalog: TechniqueCatalog | None = None,
    include_absent_techniques: bool = False,
) -> ScoreReport:
    pairs = align(gold, pred)
    merged = [
        (merge_same_technique(g.valid_spans()), merge_same_technique(p)) for g, p in pairs
    ]

    p_num = r_num = 0.0
    n_pred = n_gold = 0
    tech_num: dict[str, list[float]] = {}
    tech_count: dict[str, list[int]] = {}
    for gold_spans, pred_spans in merged:
        ps, rs = _sums(pred_spans, gold_spans)
        p_num += ps
        r_num += rs
        n_pred += len(pred_spans)
        n_gold += len(gold_spans)
        for tech in {s.technique for s in gold_spans} | {s.technique for s in pred_spans}:
            g_t = [s for s in gold_spans if s.technique == tech]
            p_t = [s for s in pred_spans if s.technique == tech]
            tp, tr = _sums(p_t, g_t)
            num = tech_num.setdefault(tech, [0.0, 0.0])
            num[0] += tp
            num[1] += tr
            cnt = tech_count.setdefault(tech, [0, 0])
            cnt[0] += len(p_t)
            cnt[1] += len(g_t)

    precision, recall = _ratio((p_num, r_num), n_pred, n_gold)
    per_tech: dict[str, TechniqueScore] = {}
    for tech in sorted(tech_num):
        n_p, n_g = tech_count[tech]
        tp, tr = _ratio(tech_num[tech], n_p, n_g)
        per_tech[tech] = TechniqueScore(tech, tp, tr, f1(tp, tr), n_g, n_p)

    if include_absent_techniques:
        if catalog is None:
            raise ValueError("include_absent_techniques requires a catalog")
        # Techniques absent from both sides contribute F1 = 0.
        names = set(catalog) | set(per_tech)
        macro_values = [per_tech[n].f1 if n in per_tech else 0.0 for n in sorted(names)]
    else:
        macro_values = [t.f1 for t in per_tech.values() if t.gold_spans > 0]
    macro = float(np.mean(macro_values)) if macro_values else (1.0 if n_gold == n_pred == 0 else 0.0)

    return ScoreReport(
        precision=precision,
        recall=recall,
        f1=f1(precision, recall),
        macro_f1=macro,
        per_technique=per_tech,
        gold_spans=n_gold,
        pred_spans=n_pred,
        samples=len(gold),
    )


def brute_force_oracle(gold: Sequence[Sample], pred: Sequence[Sample]) -> tuple[float, float]:
    """Micro precision/recall from explicit character-position sets."""
    gold_ids = {g.id for g in gold}
    pred_by_id: dict[str, list[SpanAnnotation]] = {}
    for p in pred:
        if p.id not in gold_ids:
            raise ScoringError(f"prediction id {p.id!r} not present in gold")
        pred_by_id.setdefault(p.id, []).extend(p.spans)

    def position_sets(spans: Iterable[SpanAnnotation], limit: int | None) -> list[tuple[str, frozenset[int]]]:
        groups: list[tuple[str, set[int]]] = []
        for s in spans:
            if s.start < 0 or s.start >= s.end or (limit is not None and s.end > limit):
                raise ScoringError(f"invalid span ({s.start},{s.end},{s.technique})")
            positions = set(range(s.start, s.end))
            # absorb every same-technique group sharing a position
            rest = []
            for tech, group in groups:
                if tech == s.technique and group & positions:
                    positions |= group
                else:
                    rest.append((tech, group))
            groups = rest + [(s.technique, positions)]
        return [(tech, frozenset(group)) for tech, group in groups]

    p_num = r_num = 0.0
    n_pred = n_gold = 0
    for g in gold:
        limit = len(g.text) if g.text is not None else None
        gold_sets = position_sets(g.valid_spans(), limit)
        pred_sets = position_sets(pred_by_id.get(g.id, []), limit)
        n_gold += len(gold_sets)
        n_pred += len(pred_sets)
        for tech_s, s in pred_sets:
            for tech_t, t in gold_sets:
                if tech_s == tech_t:
                    both = len(s & t)
                    p_num += both / len(s)
                    r_num += both / len(t)
    if n_pred == 0 and n_gold == 0:
        return 1.0, 1.0
    return (p_num / n_pred if n_pred else 0.0), (r_num / n_gold if n_gold else 0.0)


@dataclass
class ConfusionMatrix:
    labels: list[str]
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def off_diagonal(self) -> int:
        return self.total - int(np.trace(self.counts))

    def top_confused(self, k: int = 5) -> list[tuple[str, str, int]]:
        pairs = []
        n = len(self.labels)
        for g in range(n):
            for p in range(n):
                if g != p and self.counts[g, p] > 0:
                    pairs.append((self.labels[g], self.labels[p], int(self.counts[g, p])))
        pairs.sort(key=lambda x: (-x[2], x[0], x[1]))
        return pairs[:k]

    def technique_recall(self) -> list[tuple[str, float, int]]:
        """Per technique: fraction of its gold characters predicted as itself."""
        rows = []
        for i, label in enumerate(self.labels[1:], 1):
            gold_chars = int(self.counts[i].sum())
            if gold_chars:
                rows.append((label, self.counts[i, i] / gold_chars, gold_chars))
        rows.sort(key=lambda x: (-x[1], x[0]))
        return rows

    def to_dict(self) -> dict:
        return {"labels": self.labels, "counts": self.counts.tolist()}


def _char_classes(spans: Sequence[SpanAnnotation], length: int, index: Mapping[str, int]) -> np.ndarray:
    classes = np.zeros(length, dtype=np.int64)
    policy = EncodingPolicy(overlap_resolution=LONGEST_SPAN_WINS)
    for s in resolve_overlaps(spans, policy):
        if s.technique not in index:
            raise ScoringError(f"technique {s.technique!r} not in catalog")
        classes[s.start:min(s.end, length)] = index[s.technique]
    return classes


def confusion(gold: Sequence[Sample], pred: Sequence[Sample], catalog: TechniqueCatalog) -> ConfusionMatrix:
    labels = ["O", *catalog.techniques]
    index = {name: i for i, name in enumerate(labels) if i > 0}
    counts = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for g, pred_spans in align(gold, pred):
        length = len(g.text or "")
        gc = _char_classes(g.valid_spans(), length, index)
        pc = _char_classes(pred_spans, length, index)
        np.add.at(counts, (gc, pc), 1)
    return ConfusionMatrix(labels, counts)


def leaderboard(reports: Mapping[str, ScoreReport]) -> list[tuple[str, ScoreReport]]:
    return sorted(reports.items(), key=lambda kv: (-kv[1].f1, kv[0]))


def format_leaderboard(rows: Sequence[tuple[str, ScoreReport]]) -> str:
    width = max([len("system")] + [len(name) for name, _ in rows])
    out = [f"{'system':<{width}}  {'Micro-F1':>8}  {'Macro-F1':>8}  {'Precision':>9}  {'Recall':>6}"]
    for name, r in rows:
        out.append(f"{name:<{width}}  {r.f1:8.4f}  {r.macro_f1:8.4f}  {r.precision:9.4f}  {r.recall:6.4f}")
    return "\n".join(out)
