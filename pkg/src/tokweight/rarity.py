"""Sentence rarity scoring and the data-selection procedures built on it.

A sentence's rarity is the negative mean log relative frequency of its
target tokens, ``-(1/I) * sum_i log(count(y_i) / total)``; the 1/I
factor removes the influence of sentence length, and higher scores mean
more low-frequency tokens.  Scores always use training-set frequencies,
also when scoring test sentences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .corpus import FrequencyTable, ParallelCorpus, SentencePair


@dataclass(frozen=True)
class RarityScore:
    value: float
    sentence_index: int


def sentence_rarity(target, table: FrequencyTable) -> float:
    """Rarity of one target-side token sequence (natural log).

    Tokens unknown to the table count as frequency 1, the rarest finite
    value, so scores never become infinite.
    """
    if len(target) == 0:
        raise ValueError("cannot score an empty sentence")
    total = table.total
    acc = 0.0
    for token_id in target:
        count = table.counts.get(token_id, 0) or 1
        acc += math.log(count / total)
    return -acc / len(target)


def rarity_scores(corpus: ParallelCorpus, table: FrequencyTable) -> list[RarityScore]:
    return [
        RarityScore(value=sentence_rarity(pair.target, table), sentence_index=i)
        for i, pair in enumerate(corpus.pairs)
    ]


@dataclass(frozen=True)
class Stratification:
    """Index partition of a test set into High/Middle/Low rarity thirds.

    High holds the lowest-rarity (frequent-token) sentences.  When the
    size is not divisible by three, the remainder goes to Low.  Ties in
    rarity break by original sentence index.
    """

    high: tuple[int, ...]
    middle: tuple[int, ...]
    low: tuple[int, ...]

    def buckets(self) -> dict[str, tuple[int, ...]]:
        return {"High": self.high, "Middle": self.middle, "Low": self.low}


def stratify(corpus: ParallelCorpus, table: FrequencyTable) -> Stratification:
    """Split a test set into equal-size High/Middle/Low rarity subsets."""
    n = len(corpus)
    if n < 3:
        raise ValueError("stratification needs at least 3 sentences")
    scores = rarity_scores(corpus, table)
    order = sorted(range(n), key=lambda i: (scores[i].value, i))
    third = n // 3
    return Stratification(
        high=tuple(order[:third]),
        middle=tuple(order[third : 2 * third]),
        low=tuple(order[2 * third :]),
    )


def _rare_indices(corpus: ParallelCorpus, table: FrequencyTable, fraction: float) -> list[int]:
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must lie in (0, 1)")
    scores = rarity_scores(corpus, table)
    k = math.ceil(fraction * len(corpus))
    ranked = sorted(range(len(corpus)), key=lambda i: (-scores[i].value, i))
    return sorted(ranked[:k])


def select_rare_subset(
    corpus: ParallelCorpus, table: FrequencyTable, fraction: float
) -> ParallelCorpus:
    """The highest-rarity ``ceil(fraction * N)`` sentences, original order.

    Sentences are ranked by rarity ascending and the bottom of that list
    (the rarest ones, those containing more low-frequency tokens) is
    selected.
    """
    chosen = _rare_indices(corpus, table, fraction)
    pairs: tuple[SentencePair, ...] = tuple(corpus.pairs[i] for i in chosen)
    return ParallelCorpus(pairs, corpus.source_vocab, corpus.target_vocab)


def oversample_concat(
    corpus: ParallelCorpus, table: FrequencyTable, fraction: float, factor: int
) -> ParallelCorpus:
    """Repeat the rare subset ``factor`` times, then append the rest.

    Output size is ``factor * |rare| + |rest|`` and the order is
    deterministic (rare block first, both blocks in original order).
    """
    if factor < 1:
        raise ValueError("factor must be at least 1")
    chosen = set(_rare_indices(corpus, table, fraction))
    rare = [corpus.pairs[i] for i in sorted(chosen)]
    rest = [p for i, p in enumerate(corpus.pairs) if i not in chosen]
    pairs = tuple(rare * factor + rest)
    return ParallelCorpus(pairs, corpus.source_vocab, corpus.target_vocab)
