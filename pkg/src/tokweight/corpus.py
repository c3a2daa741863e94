"""Corpus loading, vocabularies, and token frequency statistics.

Corpus files are UTF-8 text, one sentence per line, tokens separated by
single spaces.  Frequency tables are exported as TSV ``token<TAB>count``
in rank order (count descending, token string ascending), newline
terminated.
"""

from __future__ import annotations

from collections import Counter
from collections.abc import Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

PAD_ID = 0
UNK_ID = 1
BOS_ID = 2
EOS_ID = 3
NUM_RESERVED = 4

RESERVED_TOKENS = ("<pad>", "<unk>", "<s>", "</s>")


class CorpusFormatError(ValueError):
    """A corpus file violates the one-sentence-per-line format."""


class Vocabulary:
    """Immutable token string <-> id mapping with four reserved entries.

    Ids 0..3 are ``<pad>``, ``<unk>``, ``<s>``, ``</s>`` in that order;
    regular tokens occupy ids 4 and up, in construction order.
    """

    __slots__ = ("_tokens", "_index")

    def __init__(self, tokens: Iterable[str]):
        toks = tuple(tokens)
        if len(set(toks)) != len(toks):
            raise ValueError("token strings must be unique")
        for tok in toks:
            if tok in RESERVED_TOKENS:
                raise ValueError(f"token {tok!r} collides with a reserved entry")
            if not tok or " " in tok:
                raise ValueError(f"invalid token string {tok!r}")
        self._tokens = toks
        self._index = {tok: i + NUM_RESERVED for i, tok in enumerate(toks)}

    def __len__(self) -> int:
        return NUM_RESERVED + len(self._tokens)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Vocabulary) and self._tokens == other._tokens

    @property
    def tokens(self) -> tuple[str, ...]:
        """Regular (non-reserved) token strings in id order."""
        return self._tokens

    def lookup(self, token: str) -> int:
        """Map a token string to its id; unknown strings map to UNK_ID."""
        if token in self._index:
            return self._index[token]
        try:
            return RESERVED_TOKENS.index(token)
        except ValueError:
            return UNK_ID

    def token(self, idx: int) -> str:
        if 0 <= idx < NUM_RESERVED:
            return RESERVED_TOKENS[idx]
        return self._tokens[idx - NUM_RESERVED]

    @staticmethod
    def is_reserved(idx: int) -> bool:
        return 0 <= idx < NUM_RESERVED


@dataclass(frozen=True)
class SentencePair:
    """One aligned source/target sentence, as token ids."""

    source: tuple[int, ...]
    target: tuple[int, ...]

    def __post_init__(self):
        if not self.source or not self.target:
            raise ValueError("source and target sequences must be non-empty")


@dataclass(frozen=True)
class ParallelCorpus:
    pairs: tuple[SentencePair, ...]
    source_vocab: Vocabulary
    target_vocab: Vocabulary

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def target_sentences(self) -> list[tuple[int, ...]]:
        return [p.target for p in self.pairs]


def read_sentences(path: str | Path, allow_empty: bool = False) -> list[list[str]]:
    """Read a tokenized corpus file into lists of token strings.

    Raises CorpusFormatError with a 1-based line number for empty lines
    and undecodable bytes.  ``allow_empty`` turns empty lines into empty
    sentences instead (system outputs may be empty; training corpora
    may not).
    """
    raw = Path(path).read_bytes()
    lines = raw.split(b"\n")
    if lines and not lines[-1]:
        lines.pop()  # trailing newline
    sentences = []
    for lineno, line in enumerate(lines, start=1):
        try:
            text = line.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CorpusFormatError(f"{path}:{lineno}: undecodable bytes ({exc.reason})") from None
        if not text:
            if allow_empty:
                sentences.append([])
                continue
            raise CorpusFormatError(f"{path}:{lineno}: empty line")
        tokens = text.split(" ")
        if any(tok == "" for tok in tokens):
            raise CorpusFormatError(f"{path}:{lineno}: tokens must be separated by single spaces")
        sentences.append(tokens)
    return sentences


def write_sentences(sentences: Iterable[Sequence[str]], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for sent in sentences:
            fh.write(" ".join(sent) + "\n")


def vocabulary_from_sentences(sentences: Iterable[Sequence[str]]) -> Vocabulary:
    """Build a vocabulary from a corpus, tokens in first-seen order."""
    seen: dict[str, None] = {}
    for sent in sentences:
        for tok in sent:
            seen.setdefault(tok, None)
    return Vocabulary(tok for tok in seen if tok not in RESERVED_TOKENS)


def encode_sentence(tokens: Sequence[str], vocab: Vocabulary) -> tuple[int, ...]:
    return tuple(vocab.lookup(tok) for tok in tokens)


def decode_sentence(ids: Sequence[int], vocab: Vocabulary) -> list[str]:
    return [vocab.token(i) for i in ids]


def load_corpus(
    source_path: str | Path,
    target_path: str | Path,
    source_vocab: Vocabulary,
    target_vocab: Vocabulary,
) -> ParallelCorpus:
    """Load an aligned pair of corpus files.

    Out-of-vocabulary tokens map to the unknown id.  Mismatched line
    counts, empty lines, and undecodable bytes are reported with the
    offending file and line number.
    """
    src = read_sentences(source_path)
    tgt = read_sentences(target_path)
    if len(src) != len(tgt):
        raise CorpusFormatError(
            f"mismatched line counts: {source_path} has {len(src)}, {target_path} has {len(tgt)}"
        )
    pairs = tuple(
        SentencePair(encode_sentence(s, source_vocab), encode_sentence(t, target_vocab))
        for s, t in zip(src, tgt)
    )
    return ParallelCorpus(pairs, source_vocab, target_vocab)


@dataclass(frozen=True)
class FrequencyTable:
    """Per-type occurrence counts over the target side of a training set.

    ``counts`` covers every token id that occurs.  ``median`` and ``rank``
    cover observed non-reserved types only: reserved tokens have no corpus
    frequency and are excluded from statistics.  For an even number of
    types the median is the lower of the two middle values, which keeps it
    an integer.
    """

    counts: dict[int, int]
    total: int
    median: int
    rank: tuple[int, ...]
    vocab: Vocabulary

    def count(self, token_id: int) -> int:
        return self.counts.get(token_id, 0)

    def observed_ids(self) -> tuple[int, ...]:
        return self.rank


def _count_shard(sentences: Sequence[Sequence[int]]) -> Counter:
    counter: Counter = Counter()
    for sent in sentences:
        counter.update(sent)
    return counter


def count_frequencies(
    corpus: ParallelCorpus | Iterable[Sequence[int]],
    vocab: Vocabulary | None = None,
    threads: int = 1,
) -> FrequencyTable:
    """Count target-side token frequencies and derive median and rank order.

    Sharded counting merges integer counters in shard order, so the result
    is bit-identical to single-threaded counting.
    """
    if isinstance(corpus, ParallelCorpus):
        if vocab is None:
            vocab = corpus.target_vocab
        sentences: list[Sequence[int]] = list(corpus.target_sentences())
    else:
        sentences = list(corpus)
    if vocab is None:
        raise ValueError("a vocabulary is required when counting raw sentences")
    if not sentences or all(len(s) == 0 for s in sentences):
        raise ValueError("cannot count frequencies of an empty corpus")

    if threads > 1 and len(sentences) > 1:
        shard_size = (len(sentences) + threads - 1) // threads
        shards = [sentences[i : i + shard_size] for i in range(0, len(sentences), shard_size)]
        counter: Counter = Counter()
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for part in pool.map(_count_shard, shards):
                counter.update(part)
    else:
        counter = _count_shard(sentences)

    counts = dict(counter)
    total = sum(counts.values())
    observed = [i for i in counts if not Vocabulary.is_reserved(i)]
    if not observed:
        raise ValueError("corpus contains only reserved tokens")
    per_type = sorted(counts[i] for i in observed)
    n = len(per_type)
    median = per_type[(n - 1) // 2]  # lower middle value when n is even
    rank = tuple(sorted(observed, key=lambda i: (-counts[i], vocab.token(i))))
    return FrequencyTable(counts=counts, total=total, median=median, rank=rank, vocab=vocab)


@dataclass(frozen=True)
class FrequencyInterval:
    low_pct: float
    high_pct: float
    token_ids: tuple[int, ...]
    average: float


def frequency_intervals(
    table: FrequencyTable, boundaries: Sequence[float]
) -> list[FrequencyInterval]:
    """Split ranked types into intervals by rank percentile.

    ``boundaries`` are upper edges, strictly increasing in (0, 100], and
    must end at 100 so that every observed type lands in exactly one
    interval.  Interval averages are arithmetic means of the counts.
    """
    if not boundaries:
        raise ValueError("boundaries must be non-empty")
    if any(b <= 0 or b > 100 for b in boundaries):
        raise ValueError("boundaries must lie in (0, 100]")
    if any(b2 <= b1 for b1, b2 in zip(boundaries, boundaries[1:])):
        raise ValueError("boundaries must be strictly increasing")
    if boundaries[-1] != 100:
        raise ValueError("final boundary must be 100 so every type is assigned")

    n = len(table.rank)
    intervals = []
    prev_cut = 0
    prev_pct = 0.0
    for pct in boundaries:
        cut = int(n * pct / 100)  # floor
        ids = table.rank[prev_cut:cut]
        avg = sum(table.counts[i] for i in ids) / len(ids) if ids else 0.0
        intervals.append(
            FrequencyInterval(low_pct=prev_pct, high_pct=float(pct), token_ids=ids, average=avg)
        )
        prev_cut = cut
        prev_pct = float(pct)
    return intervals


def write_frequency_tsv(table: FrequencyTable, path: str | Path) -> None:
    """Export ``token<TAB>count`` rows in rank order, newline terminated."""
    with open(path, "w", encoding="utf-8") as fh:
        for token_id in table.rank:
            fh.write(f"{table.vocab.token(token_id)}\t{table.counts[token_id]}\n")


def read_frequency_tsv(path: str | Path, vocab: Vocabulary | None = None) -> FrequencyTable:
    """Load a frequency TSV.

    When no vocabulary is given, one is built from the file in row order,
    so re-exporting reproduces the input bytes.
    """
    rows: list[tuple[str, int]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            try:
                token, count = line.split("\t")
                rows.append((token, int(count)))
            except ValueError:
                raise CorpusFormatError(f"{path}:{lineno}: expected token<TAB>count") from None
    if not rows:
        raise CorpusFormatError(f"{path}: empty frequency table")
    if vocab is None:
        vocab = Vocabulary(tok for tok, _ in rows)
    counts = {vocab.lookup(tok): cnt for tok, cnt in rows}
    total = sum(counts.values())
    observed = [i for i in counts if not Vocabulary.is_reserved(i)]
    per_type = sorted(counts[i] for i in observed)
    median = per_type[(len(per_type) - 1) // 2]
    rank = tuple(sorted(observed, key=lambda i: (-counts[i], vocab.token(i))))
    return FrequencyTable(counts=counts, total=total, median=median, rank=rank, vocab=vocab)
