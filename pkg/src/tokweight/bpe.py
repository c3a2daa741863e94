"""Byte-pair encoding: learn merges on word counts, apply them to text.

Words are split into characters with a dedicated end-of-word marker
appended to the final character (not emitted as a separate symbol), so
concatenating subwords and stripping the marker reconstructs the
original words exactly.  Merges are replayed in learning order at apply
time, which makes applying the first k merges and then the rest
identical to applying all merges at once.

Merges files carry a version header line followed by one
``left<SPACE>right`` pair per line in learning order.
"""

from __future__ import annotations

from collections import Counter
from collections.abc import Iterable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

END_OF_WORD = "</w>"

MERGES_HEADER = "#bpe-merges v1"

#: Pairs occurring fewer than this many times stop the learner early.
MIN_PAIR_COUNT = 2


@dataclass(frozen=True)
class MergeList:
    """Ordered symbol-pair merges plus the requested operation count."""

    merges: tuple[tuple[str, str], ...]
    merge_count: int

    def __post_init__(self):
        if len(set(self.merges)) != len(self.merges):
            raise ValueError("duplicate merge pairs")
        if len(self.merges) > self.merge_count:
            raise ValueError("more merges than requested operations")

    def __len__(self) -> int:
        return len(self.merges)


def word_symbols(word: str) -> tuple[str, ...]:
    """Split a word into characters, marker appended to the last one."""
    if not word:
        raise ValueError("empty word")
    chars = list(word)
    chars[-1] += END_OF_WORD
    return tuple(chars)


def _merge_symbols(symbols: Sequence[str], pair: tuple[str, str]) -> tuple[str, ...]:
    left, right = pair
    out: list[str] = []
    i = 0
    while i < len(symbols):
        if i + 1 < len(symbols) and symbols[i] == left and symbols[i + 1] == right:
            out.append(left + right)
            i += 2
        else:
            out.append(symbols[i])
            i += 1
    return tuple(out)


def learn_merges(word_counts: Mapping[str, int], merge_count: int) -> MergeList:
    """Learn up to ``merge_count`` merges from word occurrence counts.

    Each step merges the most frequent adjacent symbol pair; ties break
    lexicographically on the (left, right) strings so sweeps are
    reproducible.  Learning stops early once no pair occurs at least
    twice, so the result may be shorter than requested.
    """
    if merge_count <= 0:
        raise ValueError("merge_count must be positive")
    if not word_counts:
        raise ValueError("word counts must be non-empty")

    words: dict[tuple[str, ...], int] = {}
    for word, count in word_counts.items():
        sym = word_symbols(word)
        words[sym] = words.get(sym, 0) + count

    merges: list[tuple[str, str]] = []
    for _ in range(merge_count):
        pairs: Counter = Counter()
        for sym, count in words.items():
            for a, b in zip(sym, sym[1:]):
                pairs[(a, b)] += count
        if not pairs:
            break
        best = min(pairs, key=lambda p: (-pairs[p], p))
        if pairs[best] < MIN_PAIR_COUNT:
            break
        merges.append(best)
        words = {_merge_symbols(sym, best): count for sym, count in words.items()}
    return MergeList(merges=tuple(merges), merge_count=merge_count)


def tokenize_word(word: str, merges: MergeList) -> list[str]:
    """Subword symbols of one word after replaying all merges in order."""
    symbols: tuple[str, ...] = word_symbols(word)
    if len(symbols) >= 2:
        present = set(symbols)
        for pair in merges.merges:
            if pair[0] not in present or pair[1] not in present:
                continue
            merged = _merge_symbols(symbols, pair)
            if len(merged) != len(symbols):
                symbols = merged
                if len(symbols) < 2:
                    break
                present = set(symbols)
    return list(symbols)


def apply_merges(
    sentence: Sequence[str], merges: MergeList, _cache: dict[str, list[str]] | None = None
) -> list[str]:
    """Tokenize a sentence into subwords by replaying merges in order.

    Unknown characters pass through as singleton symbols; the output is
    deterministic and detokenizes back to the input exactly.
    """
    out: list[str] = []
    for word in sentence:
        if _cache is None:
            out.extend(tokenize_word(word, merges))
        else:
            toks = _cache.get(word)
            if toks is None:
                toks = tokenize_word(word, merges)
                _cache[word] = toks
            out.extend(toks)
    return out


def detokenize(subwords: Sequence[str]) -> list[str]:
    """Invert :func:`apply_merges` by joining subwords at word markers."""
    words: list[str] = []
    current: list[str] = []
    for piece in subwords:
        if piece.endswith(END_OF_WORD):
            current.append(piece[: -len(END_OF_WORD)])
            words.append("".join(current))
            current = []
        else:
            current.append(piece)
    if current:
        words.append("".join(current))
    return words


def apply_merges_corpus(
    sentences: Sequence[Sequence[str]], merges: MergeList, threads: int = 1
) -> list[list[str]]:
    """Apply merges to many sentences, output in input order.

    Per-sentence work is independent and word tokenizations are cached,
    so the thread count never changes the result.
    """
    cache: dict[str, list[str]] = {}
    if threads > 1 and len(sentences) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda s: apply_merges(s, merges, cache), sentences))
    return [apply_merges(sent, merges, cache) for sent in sentences]


def word_counts_from_sentences(sentences: Iterable[Sequence[str]]) -> dict[str, int]:
    counts: Counter = Counter()
    for sent in sentences:
        counts.update(sent)
    return dict(counts)


def write_merges(merges: MergeList, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{MERGES_HEADER} merge_count={merges.merge_count}\n")
        for left, right in merges.merges:
            fh.write(f"{left} {right}\n")


def read_merges(path: str | Path) -> MergeList:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if not header.startswith(MERGES_HEADER):
            raise ValueError(f"{path}: not a merges file (missing version header)")
        merge_count = int(header.split("merge_count=", 1)[1])
        merges = []
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split(" ")
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected left<SPACE>right")
            merges.append((parts[0], parts[1]))
    return MergeList(merges=tuple(merges), merge_count=merge_count)


@dataclass(frozen=True)
class SweepRow:
    merge_count: int
    learned_merges: int
    mean_tokens_per_sentence: float
    subword_types: int
    roundtrip_ok: bool


def merge_count_sweep(
    sentences: Sequence[Sequence[str]], merge_counts: Sequence[int], threads: int = 1
) -> list[SweepRow]:
    """Tokenize a corpus under several merge budgets and summarize each.

    Mean tokenized length is monotone non-increasing in the merge count
    because later merge lists extend earlier ones.
    """
    if not sentences:
        raise ValueError("sweep needs a non-empty corpus")
    counts = word_counts_from_sentences(sentences)
    rows = []
    for mc in merge_counts:
        merges = learn_merges(counts, mc)
        tokenized = apply_merges_corpus(sentences, merges, threads=threads)
        total = sum(len(t) for t in tokenized)
        types = {tok for sent in tokenized for tok in sent}
        ok = all(detokenize(t) == list(s) for t, s in zip(tokenized, sentences))
        rows.append(
            SweepRow(
                merge_count=mc,
                learned_merges=len(merges),
                mean_tokens_per_sentence=total / len(sentences),
                subword_types=len(types),
                roundtrip_ok=ok,
            )
        )
    return rows
