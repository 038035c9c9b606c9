"""Reversible Arabic normalization and offset-preserving tokenization.

Normalization only deletes characters or replaces them one-for-one, so every
normalized position has exactly one original position and spans can be moved
between the two coordinate systems without guessing.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass

TATWEEL = "ـ"

# Arabic combining marks: Quranic annotation signs, harakat/tanwin/shadda/sukun
# and extended marks, superscript alef, small high/low Quranic marks.
_DIACRITIC_RANGES = (
    (0x0610, 0x061A),
    (0x064B, 0x065F),
    (0x0670, 0x0670),
    (0x06D6, 0x06DC),
    (0x06DF, 0x06E4),
    (0x06E7, 0x06E8),
    (0x06EA, 0x06ED),
)

ALEF_VARIANTS = {"أ": "ا", "إ": "ا", "آ": "ا"}  # أ إ آ -> ا
YAA_VARIANTS = {"ى": "ي"}  # ى -> ي
TAA_MARBUTA = {"ة": "ه"}  # ة -> ه

DELETED = -1


def is_diacritic(ch: str) -> bool:
    cp = ord(ch)
    return any(lo <= cp <= hi for lo, hi in _DIACRITIC_RANGES)


@dataclass(frozen=True)
class NormalizationConfig:
    strip_diacritics: bool = True
    remove_tatweel: bool = True
    unify_alef: bool = False
    unify_yaa: bool = False
    unify_taa_marbuta: bool = False

    @classmethod
    def identity(cls) -> "NormalizationConfig":
        return cls(False, False, False, False, False)

    def to_dict(self) -> dict:
        return {
            "strip_diacritics": self.strip_diacritics,
            "remove_tatweel": self.remove_tatweel,
            "unify_alef": self.unify_alef,
            "unify_yaa": self.unify_yaa,
            "unify_taa_marbuta": self.unify_taa_marbuta,
        }


@dataclass(frozen=True)
class OffsetMap:
    """``forward[i]`` is the normalized index of original char ``i`` (or
    ``DELETED``); ``backward[j]`` is the original index of normalized char ``j``."""

    forward: tuple[int, ...]
    backward: tuple[int, ...]

    @classmethod
    def identity(cls, n: int) -> "OffsetMap":
        r = tuple(range(n))
        return cls(r, r)

    @property
    def original_length(self) -> int:
        return len(self.forward)

    @property
    def normalized_length(self) -> int:
        return len(self.backward)


@dataclass(frozen=True)
class Token:
    surface: str
    start: int
    end: int


def normalize(text: str, config: NormalizationConfig | None = None) -> tuple[str, OffsetMap]:
    config = config or NormalizationConfig()
    replace: dict[str, str] = {}
    if config.unify_alef:
        replace.update(ALEF_VARIANTS)
    if config.unify_yaa:
        replace.update(YAA_VARIANTS)
    if config.unify_taa_marbuta:
        replace.update(TAA_MARBUTA)

    out: list[str] = []
    forward: list[int] = []
    backward: list[int] = []
    for i, ch in enumerate(text):
        if (config.strip_diacritics and is_diacritic(ch)) or (config.remove_tatweel and ch == TATWEEL):
            forward.append(DELETED)
            continue
        forward.append(len(out))
        backward.append(i)
        out.append(replace.get(ch, ch))
    return "".join(out), OffsetMap(tuple(forward), tuple(backward))


def project_span_forward(start: int, end: int, offsets: OffsetMap) -> tuple[int, int] | None:
    """Map an original-text span to normalized coordinates, rounding inward.

    Returns None when every character of the span was deleted.
    """
    if not 0 <= start < end <= offsets.original_length:
        raise ValueError(f"span ({start},{end}) out of bounds for length {offsets.original_length}")
    fwd = offsets.forward
    first = next((fwd[i] for i in range(start, end) if fwd[i] != DELETED), None)
    if first is None:
        return None
    last = next(fwd[i] for i in range(end - 1, start - 1, -1) if fwd[i] != DELETED)
    return first, last + 1


def project_span_backward(start: int, end: int, offsets: OffsetMap) -> tuple[int, int]:
    if not 0 <= start < end <= offsets.normalized_length:
        raise ValueError(f"span ({start},{end}) out of bounds for length {offsets.normalized_length}")
    return offsets.backward[start], offsets.backward[end - 1] + 1


def _char_class(ch: str) -> int:
    # 0 = whitespace, 1 = punctuation/symbol, 2 = everything else (word material)
    if ch.isspace():
        return 0
    if unicodedata.category(ch)[0] in "PS":
        return 1
    return 2


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    i, n = 0, len(text)
    while i < n:
        cls = _char_class(text[i])
        if cls == 0:
            i += 1
            continue
        j = i + 1
        while j < n and _char_class(text[j]) == cls:
            j += 1
        tokens.append(Token(text[i:j], i, j))
        i = j
    return tokens
