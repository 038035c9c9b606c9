"""Synthetic corpora with planted, lexically triggered technique spans.

Each technique owns a unique two-word trigger phrase; a sample is filler
words with zero or more trigger phrases inserted, and every inserted phrase
is annotated as a span. A linear tagger can separate this data perfectly.
"""

from __future__ import annotations

import random

from .corpus import Sample, SpanAnnotation

# Arabic letters used to build filler and trigger words.
_LETTERS = "ابتثجحخدذرزسشصضطظعغفقكلمنهوي"


def _word(rng: random.Random, lo: int = 2, hi: int = 6) -> str:
    return "".join(rng.choice(_LETTERS) for _ in range(rng.randint(lo, hi)))


def make_triggers(techniques: list[str], seed: int = 0) -> dict[str, tuple[str, str]]:
    rng = random.Random(seed)
    triggers: dict[str, tuple[str, str]] = {}
    used: set[str] = set()
    for tech in techniques:
        words = []
        while len(words) < 2:
            w = _word(rng, 7, 9)  # longer than any filler word
            if w not in used:
                used.add(w)
                words.append(w)
        triggers[tech] = (words[0], words[1])
    return triggers


def trigger_corpus(
    n_samples: int,
    techniques: tuple[str, ...] = ("Appeal_to_Fear", "Loaded_Language", "Name_Calling"),
    seed: int = 0,
    trigger_seed: int = 0,
    vocab_size: int = 300,
    id_prefix: str = "",
) -> list[Sample]:
    """Random filler sentences with planted trigger phrases as gold spans.

    The trigger words depend only on ``trigger_seed`` so separately generated
    train and test corpora share them.
    """
    rng = random.Random(seed)
    vocab_rng = random.Random(trigger_seed + 1)
    vocab = sorted({_word(vocab_rng) for _ in range(vocab_size)})
    triggers = make_triggers(list(techniques), trigger_seed)
    samples = []
    for k in range(n_samples):
        pieces: list[tuple[str, str | None]] = [(rng.choice(vocab), None) for _ in range(rng.randint(4, 14))]
        for _ in range(rng.choice((0, 1, 1, 2))):
            tech = rng.choice(techniques)
            pos = rng.randint(0, len(pieces))
            pieces.insert(pos, (" ".join(triggers[tech]), tech))
        text_parts: list[str] = []
        spans = []
        cursor = 0
        for i, (piece, tech) in enumerate(pieces):
            if i:
                sep = rng.choice((" ", " ", " ", "، ", ": "))
                text_parts.append(sep)
                cursor += len(sep)
            if tech is not None:
                spans.append(SpanAnnotation(tech, cursor, cursor + len(piece)))
            text_parts.append(piece)
            cursor += len(piece)
        genre = "tweet" if k % 7 == 0 else "paragraph"
        samples.append(Sample(f"{id_prefix}{k}", "".join(text_parts), tuple(spans), genre))
    return samples
