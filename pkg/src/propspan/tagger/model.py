"""Linear-chain model parameters, decoding pipeline and the binary model file."""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..bio import (
    DEFAULT_MAX_LEN,
    EncodingPolicy,
    TagSet,
    decode,
    encode,
    pad_truncate,
    repair,
    resolve_overlaps,
)
from ..corpus import Sample, SpanAnnotation, TechniqueCatalog
from ..textnorm import (
    NormalizationConfig,
    OffsetMap,
    Token,
    normalize,
    project_span_backward,
    project_span_forward,
    tokenize,
)
from . import kernels
from .features import FeatureConfig, FeatureMatrix, FeatureTemplate, featurize

MAGIC = b"PROPSPAN"
FORMAT_VERSION = 1
_DTYPE = np.dtype("<f8")


class ModelFormatError(ValueError):
    """Model file is not a propspan model or has an unsupported version."""


class ModelParams:
    def __init__(
        self,
        catalog: TechniqueCatalog,
        feature_config: FeatureConfig,
        normalization: NormalizationConfig | None = None,
        policy: EncodingPolicy | None = None,
        max_len: int = DEFAULT_MAX_LEN,
        emissions: np.ndarray | None = None,
        transitions: np.ndarray | None = None,
    ):
        self.catalog = catalog
        self.tagset = TagSet(catalog)
        self.feature_config = feature_config
        self.normalization = normalization or NormalizationConfig()
        self.policy = policy or EncodingPolicy()
        self.max_len = max_len
        n_tags = len(self.tagset)
        if emissions is None:
            emissions = np.zeros((feature_config.hash_dim, n_tags), dtype=np.float64)
        if transitions is None:
            transitions = np.zeros((n_tags, n_tags), dtype=np.float64)
        if emissions.shape != (feature_config.hash_dim, n_tags) or transitions.shape != (n_tags, n_tags):
            raise ValueError("weight shapes do not match catalog and feature config")
        self.emissions = emissions
        self.transitions = transitions
        self.allowed = self.tagset.allowed_transitions()
        self.allowed_start = self.tagset.allowed_starts()

    def header(self) -> dict:
        return {
            "catalog": self.catalog.to_list(),
            "feature_config": self.feature_config.to_dict(),
            "normalization": self.normalization.to_dict(),
            "policy": self.policy.to_dict(),
            "max_len": self.max_len,
            "n_tags": len(self.tagset),
            "dtype": _DTYPE.str,
        }

    def same_weights(self, other: "ModelParams") -> bool:
        return (
            self.header() == other.header()
            and np.array_equal(self.emissions, other.emissions)
            and np.array_equal(self.transitions, other.transitions)
        )


def save_model(model: ModelParams, path: str) -> None:
    """Layout: magic, u32 version, u32 header length, JSON header, then the
    emission and transition matrices as little-endian float64, row-major."""
    header = json.dumps(model.header(), sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", FORMAT_VERSION, len(header)))
        f.write(header)
        f.write(np.ascontiguousarray(model.emissions, dtype=_DTYPE).tobytes())
        f.write(np.ascontiguousarray(model.transitions, dtype=_DTYPE).tobytes())


def load_model(path: str) -> ModelParams:
    with open(path, "rb") as f:
        if f.read(len(MAGIC)) != MAGIC:
            raise ModelFormatError(f"{path}: not a propspan model file")
        raw = f.read(8)
        if len(raw) != 8:
            raise ModelFormatError(f"{path}: truncated header")
        version, header_len = struct.unpack("<II", raw)
        if version != FORMAT_VERSION:
            raise ModelFormatError(f"{path}: model format version {version}, expected {FORMAT_VERSION}")
        try:
            header = json.loads(f.read(header_len).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ModelFormatError(f"{path}: corrupt header") from exc
        fc = header["feature_config"]
        feature_config = FeatureConfig(
            hash_dim=fc["hash_dim"],
            char_ngram_orders=tuple(fc["char_ngram_orders"]),
            context_window=fc["context_window"],
            use_shape_features=fc["use_shape_features"],
            seed=fc["seed"],
        )
        n_tags = header["n_tags"]
        n_emit = feature_config.hash_dim * n_tags
        emissions = np.fromfile(f, dtype=_DTYPE, count=n_emit)
        transitions = np.fromfile(f, dtype=_DTYPE, count=n_tags * n_tags)
    if emissions.shape[0] != n_emit or transitions.shape[0] != n_tags * n_tags:
        raise ModelFormatError(f"{path}: truncated weight data")
    return ModelParams(
        TechniqueCatalog(header["catalog"]),
        feature_config,
        NormalizationConfig(**header["normalization"]),
        EncodingPolicy(**header["policy"]),
        header["max_len"],
        emissions.astype(np.float64, copy=False).reshape(feature_config.hash_dim, n_tags),
        transitions.astype(np.float64, copy=False).reshape(n_tags, n_tags),
    )


def viterbi(emissions: np.ndarray, transitions: np.ndarray, allowed: np.ndarray, allowed_start: np.ndarray):
    """Best tag path and its score; forbidden transitions never appear."""
    if emissions.shape[0] < 1:
        raise ValueError("viterbi needs at least one position")
    path, score = kernels.viterbi(
        np.ascontiguousarray(emissions, dtype=np.float64),
        np.ascontiguousarray(transitions, dtype=np.float64),
        np.ascontiguousarray(allowed, dtype=np.bool_),
        np.ascontiguousarray(allowed_start, dtype=np.bool_),
    )
    if score == -np.inf:
        raise ValueError("every tag path is forbidden by the constraint mask")
    return path, score


def score_emissions(model: ModelParams, feature_ids: Sequence[int]) -> np.ndarray:
    """Sum of emission rows for a multiset of feature ids (duplicates count twice)."""
    ids = np.asarray(feature_ids, dtype=np.int64)
    return kernels.emission_scores(model.emissions, ids, np.array([0, ids.shape[0]], dtype=np.int64))[0]


@dataclass
class EncodedSample:
    """A sample run through normalize -> tokenize -> encode -> truncate."""

    sample: Sample
    offsets: OffsetMap
    tokens: list[Token]
    features: FeatureMatrix
    gold: np.ndarray

    @property
    def n_tokens(self) -> int:
        return len(self.tokens)


def encode_sample(
    sample: Sample,
    tagset: TagSet,
    normalization: NormalizationConfig,
    policy: EncodingPolicy,
    feature_config: FeatureConfig,
    max_len: int,
    templates: Sequence[FeatureTemplate] = (),
    cache: dict | None = None,
) -> EncodedSample:
    text = sample.text or ""
    normed, offsets = normalize(text, normalization)
    all_tokens = tokenize(normed)
    spans = []
    for span in sample.valid_spans():
        projected = project_span_forward(span.start, span.end, offsets)
        if projected is not None:
            spans.append(SpanAnnotation(span.technique, *projected))
    spans = resolve_overlaps(spans, policy)
    masked = pad_truncate(encode(all_tokens, spans, tagset, policy), max_len)
    n = masked.real_token_count
    # Truncated tokens are invisible to features, as under an attention mask.
    tokens = all_tokens[:n]
    return EncodedSample(
        sample,
        offsets,
        tokens,
        featurize(tokens, feature_config, templates, cache),
        masked.tags[:n].copy(),
    )


def decode_encoded(
    enc: EncodedSample,
    emissions_w: np.ndarray,
    transitions: np.ndarray,
    allowed: np.ndarray,
    allowed_start: np.ndarray,
) -> tuple[np.ndarray, float]:
    emissions = kernels.emission_scores(emissions_w, enc.features.feats, enc.features.offsets)
    return viterbi(emissions, transitions, allowed, allowed_start)


def spans_from_tags(enc: EncodedSample, tags: Sequence[int], tagset: TagSet) -> list[SpanAnnotation]:
    spans = decode(enc.tokens, repair(list(map(int, tags)), tagset), tagset)
    out = []
    for s in spans:
        start, end = project_span_backward(s.start, s.end, enc.offsets)
        out.append(SpanAnnotation(s.technique, start, end))
    return out


def predict(
    model: ModelParams,
    sample: Sample,
    normalization: NormalizationConfig | None = None,
    templates: Sequence[FeatureTemplate] = (),
) -> list[SpanAnnotation]:
    normalization = normalization or model.normalization
    bare = Sample(sample.id, sample.text or "", (), sample.genre)
    enc = encode_sample(
        bare, model.tagset, normalization, model.policy, model.feature_config, model.max_len, templates
    )
    if enc.n_tokens == 0:
        return []
    path, _ = decode_encoded(
        enc, model.emissions, model.transitions, model.allowed, model.allowed_start
    )
    return spans_from_tags(enc, path, model.tagset)
