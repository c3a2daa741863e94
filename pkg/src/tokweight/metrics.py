"""Evaluation: corpus-level 4-gram BLEU, lexical diversity, token distribution.

BLEU follows the classic multi-bleu script semantics: case-sensitive on
already-tokenized input, corpus-level clipped n-gram precision, no
smoothing, score 0 whenever some order has matchable n-grams but zero
matches.  One documented convention extends it to degenerate corpora:
an order with zero *possible* n-grams (every hypothesis shorter than n)
contributes precision 1.

Diversity measures are the three used for comparing system outputs with
references: type-token ratio, HD-D (McCarthy & Jarvis, 2010; sampling
default 42), and MTLD (threshold default 0.72).
"""

from __future__ import annotations

import math
from collections import Counter
from collections.abc import Sequence
from dataclasses import dataclass

from .corpus import FrequencyTable

HDD_DEFAULT_SAMPLE_SIZE = 42
MTLD_DEFAULT_THRESHOLD = 0.72
NUM_DECILES = 10


@dataclass(frozen=True)
class BleuReport:
    """Corpus BLEU with its n-gram precisions and length statistics."""

    score: float
    precisions: tuple[float, float, float, float]
    brevity_penalty: float
    hyp_length: int
    ref_length: int
    matches: tuple[int, int, int, int]
    totals: tuple[int, int, int, int]

    def format_line(self) -> str:
        """One-line summary in the familiar multi-bleu print style."""
        precs = "/".join(f"{100 * p:.1f}" for p in self.precisions)
        ratio = self.hyp_length / self.ref_length if self.ref_length else 0.0
        return (
            f"BLEU = {self.score:.2f}, {precs} "
            f"(BP={self.brevity_penalty:.3f}, ratio={ratio:.3f}, "
            f"hyp_len={self.hyp_length}, ref_len={self.ref_length})"
        )


def _ngram_counts(tokens: Sequence, n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu4(hypotheses: Sequence[Sequence], references: Sequence[Sequence]) -> BleuReport:
    """Corpus-level 4-gram BLEU with a single reference per hypothesis."""
    if len(hypotheses) != len(references):
        raise ValueError("hypothesis and reference counts differ")
    if not hypotheses:
        raise ValueError("empty corpus")

    matches = [0, 0, 0, 0]
    totals = [0, 0, 0, 0]
    hyp_length = 0
    ref_length = 0
    for hyp, ref in zip(hypotheses, references):
        hyp_length += len(hyp)
        ref_length += len(ref)
        for n in range(1, 5):
            hyp_counts = _ngram_counts(hyp, n)
            ref_counts = _ngram_counts(ref, n)
            totals[n - 1] += sum(hyp_counts.values())
            matches[n - 1] += sum(min(c, ref_counts[g]) for g, c in hyp_counts.items())

    # zero possible n-grams for an order => precision 1 by convention
    precisions = tuple(m / t if t > 0 else 1.0 for m, t in zip(matches, totals))
    if hyp_length == 0:
        bp = 0.0
    elif hyp_length < ref_length:
        bp = math.exp(1.0 - ref_length / hyp_length)
    else:
        bp = 1.0
    if any(p == 0.0 for p in precisions) or hyp_length == 0:
        score = 0.0
    else:
        score = bp * math.exp(sum(math.log(p) for p in precisions) / 4.0) * 100.0
    return BleuReport(
        score=score,
        precisions=precisions,
        brevity_penalty=bp,
        hyp_length=hyp_length,
        ref_length=ref_length,
        matches=tuple(matches),
        totals=tuple(totals),
    )


@dataclass(frozen=True)
class DiversityReport:
    ttr: float
    hdd: float
    mtld: float


def ttr(text: Sequence) -> float:
    """Type-token ratio: distinct types over total tokens."""
    if not text:
        raise ValueError("empty text")
    return len(set(text)) / len(text)


def _log_absent_probability(n_tokens: int, type_count: int, sample_size: int) -> float:
    # log of C(n_tokens - type_count, sample_size) / C(n_tokens, sample_size)
    return (
        math.lgamma(n_tokens - type_count + 1)
        - math.lgamma(n_tokens - type_count - sample_size + 1)
        - math.lgamma(n_tokens + 1)
        + math.lgamma(n_tokens - sample_size + 1)
    )


def hdd(text: Sequence, sample_size: int = HDD_DEFAULT_SAMPLE_SIZE) -> float:
    """Hypergeometric distribution diversity (HD-D).

    Each type contributes ``(1 - P[type absent from a uniform
    without-replacement sample of sample_size]) / sample_size``; the
    absence probability is evaluated in log space.
    """
    n = len(text)
    if n < sample_size:
        raise ValueError(f"text length {n} is shorter than sample size {sample_size}")
    total = 0.0
    for count in Counter(text).values():
        if n - count < sample_size:
            absent = 0.0  # sample cannot avoid this type
        else:
            absent = math.exp(_log_absent_probability(n, count, sample_size))
        total += (1.0 - absent) / sample_size
    return total


def _mtld_factors(tokens: Sequence, threshold: float) -> float:
    """Factor count of one directional MTLD pass, partial factor included."""
    factors = 0.0
    types: set = set()
    length = 0
    running = 1.0
    for tok in tokens:
        length += 1
        types.add(tok)
        running = len(types) / length
        if running < threshold:
            factors += 1.0
            types.clear()
            length = 0
            running = 1.0
    if length > 0:
        factors += (1.0 - running) / (1.0 - threshold)
    return factors


def mtld(text: Sequence, threshold: float = MTLD_DEFAULT_THRESHOLD) -> float:
    """Measure of textual lexical diversity (McCarthy & Jarvis, 2010).

    Scans forward cutting a factor whenever the running TTR drops below
    the threshold, adds a partial factor ``(1 - TTR) / (1 - threshold)``
    for the remainder, and averages the forward and reversed passes of
    ``length / factors``.  Degenerate case: a text whose running TTR
    never reaches the threshold and ends at TTR exactly 1 (for example
    all-distinct tokens) has factor count 0 and evaluates to ``inf``.
    """
    if len(text) < 10:
        raise ValueError("text too short for MTLD")
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    values = []
    for tokens in (list(text), list(reversed(text))):
        factors = _mtld_factors(tokens, threshold)
        values.append(len(tokens) / factors if factors > 0 else math.inf)
    return (values[0] + values[1]) / 2.0


def diversity_report(
    text: Sequence,
    hdd_sample_size: int = HDD_DEFAULT_SAMPLE_SIZE,
    mtld_threshold: float = MTLD_DEFAULT_THRESHOLD,
) -> DiversityReport:
    return DiversityReport(
        ttr=ttr(text),
        hdd=hdd(text, hdd_sample_size),
        mtld=mtld(text, mtld_threshold),
    )


@dataclass(frozen=True)
class DistributionReport:
    """Token counts per training-frequency decile for several texts.

    Vocabulary types are ranked by training frequency descending and cut
    into ten equal rank deciles (remainder spread by the usual floor
    rule); decile 1 holds the most frequent types.  Tokens outside the
    table's vocabulary count toward decile 10.  Per text, the decile
    counts sum to the text's token count.
    """

    names: tuple[str, ...]
    counts: dict[str, tuple[int, ...]]
    boundaries: tuple[tuple[int, int], ...]


def distribution_report(
    texts: dict[str, Sequence[str]], table: FrequencyTable
) -> DistributionReport:
    n_types = len(table.rank)
    if n_types < NUM_DECILES:
        raise ValueError(f"need at least {NUM_DECILES} observed types, have {n_types}")

    cuts = [n_types * i // NUM_DECILES for i in range(NUM_DECILES + 1)]
    boundaries = tuple((cuts[i] + 1, cuts[i + 1]) for i in range(NUM_DECILES))
    decile_of: dict[int, int] = {}
    for d in range(NUM_DECILES):
        for token_id in table.rank[cuts[d] : cuts[d + 1]]:
            decile_of[token_id] = d

    vocab = table.vocab
    counts: dict[str, tuple[int, ...]] = {}
    for name, text in texts.items():
        deciles = [0] * NUM_DECILES
        for token in text:
            token_id = vocab.lookup(token)
            deciles[decile_of.get(token_id, NUM_DECILES - 1)] += 1
        counts[name] = tuple(deciles)
    return DistributionReport(names=tuple(texts), counts=counts, boundaries=boundaries)


def write_distribution_csv(report: DistributionReport, path) -> None:
    """CSV with one row per decile: raw counts plus log10 columns.

    The log10 column is left empty for zero counts.
    """
    with open(path, "w", encoding="utf-8") as fh:
        cols = ["decile", "rank_start", "rank_end"]
        for name in report.names:
            cols += [f"{name}_count", f"{name}_log10"]
        fh.write(",".join(cols) + "\n")
        for d in range(NUM_DECILES):
            start, end = report.boundaries[d]
            row = [str(d + 1), str(start), str(end)]
            for name in report.names:
                c = report.counts[name][d]
                row.append(str(c))
                row.append(f"{math.log10(c):.6f}" if c > 0 else "")
            fh.write(",".join(row) + "\n")
