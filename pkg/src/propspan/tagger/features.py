"""Hashed sparse features for token tagging."""

from __future__ import annotations

import unicodedata
import zlib
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from ..textnorm import Token

# Extension point: callables producing extra feature strings for a token
# (e.g. POS or NER tags). Their output is hashed like the built-in templates.
FeatureTemplate = Callable[[Sequence[Token], int], Iterable[str]]


@dataclass(frozen=True)
class FeatureConfig:
    hash_dim: int = 2**20
    char_ngram_orders: tuple[int, ...] = (2, 3, 4)
    context_window: int = 2
    use_shape_features: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        if self.hash_dim < 2:
            raise ValueError("hash_dim must be >= 2")
        if self.context_window < 0:
            raise ValueError("context_window must be >= 0")
        object.__setattr__(self, "char_ngram_orders", tuple(self.char_ngram_orders))

    def to_dict(self) -> dict:
        return {
            "hash_dim": self.hash_dim,
            "char_ngram_orders": list(self.char_ngram_orders),
            "context_window": self.context_window,
            "use_shape_features": self.use_shape_features,
            "seed": self.seed,
        }


def _length_bucket(n: int) -> str:
    if n <= 2:
        return "s"
    if n <= 5:
        return "m"
    if n <= 9:
        return "l"
    return "xl"


def _shape(surface: str) -> list[str]:
    cats = {unicodedata.category(c)[0] for c in surface}
    return [
        "digit=" + ("all" if cats == {"N"} else "some" if "N" in cats else "none"),
        "punct=" + str(bool(cats & {"P", "S"})),
        "len=" + _length_bucket(len(surface)),
    ]


def token_strings(surface: str, config: FeatureConfig) -> list[str]:
    """Feature strings describing one token, without position prefixes."""
    low = surface.lower()
    feats = ["w=" + low]
    marked = "<" + low + ">"
    for n in config.char_ngram_orders:
        for i in range(len(marked) - n + 1):
            feats.append(f"c{n}={marked[i:i + n]}")
    if config.use_shape_features:
        feats.extend(_shape(surface))
    return feats


def _hash(feature: str, config: FeatureConfig) -> int:
    return zlib.crc32(feature.encode("utf-8"), config.seed & 0xFFFFFFFF) % config.hash_dim


def extract_features(
    tokens: Sequence[Token],
    index: int,
    config: FeatureConfig,
    templates: Sequence[FeatureTemplate] = (),
    _cache: dict | None = None,
) -> list[int]:
    """Hashed feature ids for ``tokens[index]``.

    The current token contributes its strings under prefix ``0:``; each
    neighbour within the window contributes its strings under its relative
    offset (``-1:``, ``+2:``...), with boundary markers past either end.
    """
    strings = ["bias"]
    w = config.context_window
    for d in range(-w, w + 1):
        j = index + d
        prefix = f"{d:+d}:" if d else "0:"
        if 0 <= j < len(tokens):
            surface = tokens[j].surface
            if _cache is not None:
                base = _cache.get(surface)
                if base is None:
                    base = _cache[surface] = token_strings(surface, config)
            else:
                base = token_strings(surface, config)
            strings.extend(prefix + s for s in base)
        else:
            strings.append(prefix + ("<BOS>" if j < 0 else "<EOS>"))
    for template in templates:
        strings.extend("x:" + s for s in template(tokens, index))
    return [_hash(s, config) for s in strings]


@dataclass
class FeatureMatrix:
    """Features of one sequence in CSR layout: token ``i`` owns
    ``feats[offsets[i]:offsets[i + 1]]``."""

    feats: np.ndarray
    offsets: np.ndarray

    @property
    def n_tokens(self) -> int:
        return self.offsets.shape[0] - 1


def featurize(
    tokens: Sequence[Token],
    config: FeatureConfig,
    templates: Sequence[FeatureTemplate] = (),
    cache: dict | None = None,
) -> FeatureMatrix:
    rows = [extract_features(tokens, i, config, templates, cache) for i in range(len(tokens))]
    offsets = np.zeros(len(rows) + 1, dtype=np.int64)
    if rows:
        np.cumsum([len(r) for r in rows], out=offsets[1:])
    feats = np.fromiter((f for r in rows for f in r), dtype=np.int64, count=int(offsets[-1]))
    return FeatureMatrix(feats, offsets)
