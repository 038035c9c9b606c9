"""Two-phase averaged structured-perceptron training.

Phase 1 updates emission weights only; transition weights stay at zero, so
decoding is shaped by the BIO constraint mask alone. Phase 2 also updates the
transitions. Updates use the current (non-averaged) weights; reported and
returned weights are the lazy running average ``w - acc / count``.
"""

from __future__ import annotations

import csv
import io
import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..bio import DEFAULT_MAX_LEN, EncodingPolicy, TagSet
from ..corpus import Sample, TechniqueCatalog
from ..scorer import score_corpus
from ..textnorm import NormalizationConfig
from . import kernels
from .features import FeatureConfig, FeatureTemplate
from .model import EncodedSample, ModelParams, encode_sample, spans_from_tags, viterbi

logger = logging.getLogger(__name__)

CSV_COLUMNS = ("epoch", "phase", "train_loss", "train_acc", "val_loss", "val_acc", "val_span_f1")


@dataclass(frozen=True)
class TrainConfig:
    phase1_epochs: int = 10
    phase2_epochs: int = 5
    phase1_step: float = 1.0
    phase2_step: float = 0.5
    seed: int = 0
    averaging: bool = True
    max_len: int = DEFAULT_MAX_LEN
    keep_best: bool = False

    def __post_init__(self) -> None:
        if self.phase1_epochs < 0 or self.phase2_epochs < 0:
            raise ValueError("epoch counts must be >= 0")
        if self.phase1_step <= 0 or self.phase2_step <= 0:
            raise ValueError("step sizes must be > 0")
        if self.max_len < 1:
            raise ValueError("max_len must be >= 1")


@dataclass
class EpochRecord:
    epoch: int
    phase: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float
    val_span_f1: float


@dataclass
class TrainReport:
    epochs: list[EpochRecord] = field(default_factory=list)
    wall_time: float = 0.0
    best_epoch: int | None = None

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in self.epochs:
            writer.writerow(
                [r.epoch, r.phase]
                + [repr(float(v)) for v in (r.train_loss, r.train_acc, r.val_loss, r.val_acc, r.val_span_f1)]
            )
        return buf.getvalue()

    @property
    def final_val_f1(self) -> float:
        return self.epochs[-1].val_span_f1 if self.epochs else float("nan")


@dataclass
class _Evaluation:
    loss: float
    acc: float
    span_f1: float


def _evaluate(
    encoded: Sequence[EncodedSample],
    emissions_w: np.ndarray,
    transitions: np.ndarray,
    tagset: TagSet,
    allowed: np.ndarray,
    allowed_start: np.ndarray,
) -> _Evaluation:
    loss = 0.0
    tokens = correct = 0
    predictions = []
    for enc in encoded:
        if enc.n_tokens == 0:
            predictions.append(Sample(enc.sample.id, enc.sample.text, ()))
            continue
        emissions = kernels.emission_scores(emissions_w, enc.features.feats, enc.features.offsets)
        path, best = viterbi(emissions, transitions, allowed, allowed_start)
        loss += max(0.0, best - kernels.path_score(emissions, transitions, enc.gold))
        tokens += enc.n_tokens
        correct += int(np.count_nonzero(path == enc.gold))
        predictions.append(Sample(enc.sample.id, enc.sample.text, tuple(spans_from_tags(enc, path, tagset))))
    report = score_corpus([e.sample for e in encoded], predictions)
    return _Evaluation(loss / tokens if tokens else 0.0, correct / tokens if tokens else 0.0, report.f1)


def _check_catalog(samples: Sequence[Sample], catalog: TechniqueCatalog) -> None:
    for sample in samples:
        for span in sample.valid_spans():
            if span.technique not in catalog:
                raise ValueError(f"sample {sample.id}: technique {span.technique!r} missing from catalog")


def train(
    samples: Sequence[Sample],
    heldout: Sequence[Sample],
    catalog: TechniqueCatalog,
    train_config: TrainConfig | None = None,
    feature_config: FeatureConfig | None = None,
    normalization: NormalizationConfig | None = None,
    policy: EncodingPolicy | None = None,
    templates: Sequence[FeatureTemplate] = (),
    on_epoch: Callable[[EpochRecord], None] | None = None,
) -> tuple[ModelParams, TrainReport]:
    train_config = train_config or TrainConfig()
    feature_config = feature_config or FeatureConfig()
    normalization = normalization or NormalizationConfig()
    policy = policy or EncodingPolicy()
    if not samples or not heldout:
        raise ValueError("training and held-out splits must be non-empty")
    if len(catalog) == 0:
        raise ValueError("empty tag set")
    _check_catalog(samples, catalog)
    _check_catalog(heldout, catalog)

    started = time.perf_counter()
    model = ModelParams(catalog, feature_config, normalization, policy, train_config.max_len)
    tagset = model.tagset
    cache: dict = {}

    def prepare(split: Sequence[Sample]) -> list[EncodedSample]:
        return [
            encode_sample(s, tagset, normalization, policy, feature_config, train_config.max_len, templates, cache)
            for s in split
        ]

    train_set = prepare(samples)
    val_set = prepare(heldout)

    weights = model.emissions
    transitions = model.transitions
    acc_w = np.zeros_like(weights)
    acc_t = np.zeros_like(transitions)
    avg_w = np.empty_like(weights) if train_config.averaging else weights
    avg_t = np.empty_like(transitions) if train_config.averaging else transitions
    best: tuple[float, np.ndarray, np.ndarray] | None = None
    count = 1
    rng = np.random.default_rng(train_config.seed)
    report = TrainReport()

    schedule = [(1, train_config.phase1_step)] * train_config.phase1_epochs
    schedule += [(2, train_config.phase2_step)] * train_config.phase2_epochs

    for epoch, (phase, step) in enumerate(schedule, 1):
        loss = 0.0
        n_tokens = n_correct = 0
        for idx in rng.permutation(len(train_set)):
            enc = train_set[idx]
            if enc.n_tokens:
                emissions = kernels.emission_scores(weights, enc.features.feats, enc.features.offsets)
                pred, best_score = viterbi(emissions, transitions, model.allowed, model.allowed_start)
                loss += max(0.0, best_score - kernels.path_score(emissions, transitions, enc.gold))
                n_tokens += enc.n_tokens
                correct = int(np.count_nonzero(pred == enc.gold))
                n_correct += correct
                if correct != enc.n_tokens:
                    kernels.perceptron_update(
                        weights, acc_w, enc.features.feats, enc.features.offsets, enc.gold, pred, step, float(count)
                    )
                    if phase == 2:
                        kernels.transition_update(transitions, acc_t, enc.gold, pred, step, float(count))
            count += 1

        if train_config.averaging:
            np.divide(acc_w, count, out=avg_w)
            np.subtract(weights, avg_w, out=avg_w)
            np.divide(acc_t, count, out=avg_t)
            np.subtract(transitions, avg_t, out=avg_t)
        ev = _evaluate(val_set, avg_w, avg_t, tagset, model.allowed, model.allowed_start)
        record = EpochRecord(
            epoch,
            phase,
            loss / n_tokens if n_tokens else 0.0,
            n_correct / n_tokens if n_tokens else 0.0,
            ev.loss,
            ev.acc,
            ev.span_f1,
        )
        report.epochs.append(record)
        logger.info(
            "epoch %d phase %d train_loss=%.4f train_acc=%.4f val_loss=%.4f val_acc=%.4f val_f1=%.4f",
            epoch, phase, record.train_loss, record.train_acc, record.val_loss, record.val_acc, record.val_span_f1,
        )
        if on_epoch is not None:
            on_epoch(record)
        if train_config.keep_best and (best is None or ev.span_f1 > best[0]):
            best = (ev.span_f1, avg_w.copy(), avg_t.copy())
            report.best_epoch = epoch

    if best is not None:
        final_w, final_t = best[1], best[2]
    elif train_config.averaging and schedule:
        final_w, final_t = avg_w, avg_t
    else:
        final_w, final_t = weights, transitions
    result = ModelParams(
        catalog, feature_config, normalization, policy, train_config.max_len, final_w, final_t
    )
    report.wall_time = time.perf_counter() - started
    return result, report
