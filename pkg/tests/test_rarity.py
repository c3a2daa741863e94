import math

import pytest

from tokweight.corpus import NUM_RESERVED, ParallelCorpus, SentencePair, Vocabulary, count_frequencies
from tokweight.model import generate_zipf_task
from tokweight.rarity import (
    oversample_concat,
    rarity_scores,
    select_rare_subset,
    sentence_rarity,
    stratify,
)


def corpus_from_counts(token_counts):
    """Single-token sentences realizing the given type counts."""
    vocab = Vocabulary(sorted(token_counts))
    pairs = []
    for tok, count in token_counts.items():
        tid = vocab.lookup(tok)
        pairs.extend(SentencePair((tid,), (tid,)) for _ in range(count))
    corpus = ParallelCorpus(tuple(pairs), vocab, vocab)
    return corpus, vocab, count_frequencies(corpus)


class TestSentenceRarity:
    def test_token_covering_whole_corpus_scores_zero(self):
        v = Vocabulary(["a"])
        table = count_frequencies([(v.lookup("a"),)] * 7, v)
        assert sentence_rarity((v.lookup("a"),), table) == pytest.approx(0.0, abs=1e-15)

    def test_hand_arithmetic(self):
        """Total 100, counts 50 and 25: (ln 2 + ln 4) / 2 = 1.5 ln 2."""
        corpus, vocab, table = corpus_from_counts({"a": 50, "b": 25, "c": 25})
        score = sentence_rarity((vocab.lookup("a"), vocab.lookup("b")), table)
        assert score == pytest.approx(1.5 * math.log(2), abs=1e-9)
        assert score == pytest.approx(1.039721, abs=1e-6)

    def test_length_invariance(self):
        """Repeating a uniform sentence leaves the score unchanged."""
        corpus, vocab, table = corpus_from_counts({"a": 10, "b": 30})
        a = vocab.lookup("a")
        base = sentence_rarity((a,), table)
        for k in (2, 3, 10, 50):
            assert sentence_rarity((a,) * k, table) == pytest.approx(base, abs=1e-12)

    def test_permutation_invariance(self):
        corpus, vocab, table = corpus_from_counts({"a": 9, "b": 3, "c": 1})
        ids = [vocab.lookup(t) for t in ("a", "b", "c", "a")]
        forward = sentence_rarity(tuple(ids), table)
        backward = sentence_rarity(tuple(reversed(ids)), table)
        assert forward == pytest.approx(backward, abs=1e-12)

    def test_adding_rarer_token_strictly_increases(self):
        corpus, vocab, table = corpus_from_counts({"a": 50, "b": 5, "c": 1})
        a, c = vocab.lookup("a"), vocab.lookup("c")
        assert sentence_rarity((a, c), table) > sentence_rarity((a,), table)

    def test_unknown_token_counts_as_one(self):
        corpus, vocab, table = corpus_from_counts({"a": 50})
        score = sentence_rarity((99,), table)
        assert score == pytest.approx(math.log(table.total), abs=1e-12)

    def test_empty_sentence_rejected(self):
        corpus, vocab, table = corpus_from_counts({"a": 1})
        with pytest.raises(ValueError):
            sentence_rarity((), table)


def ladder_corpus(n):
    """n sentences with strictly increasing rarity."""
    vocab = Vocabulary([f"t{i:02d}" for i in range(n)])
    pairs = []
    freq_sentences = []
    for i in range(n):
        tid = vocab.lookup(f"t{i:02d}")
        freq_sentences.extend([(tid,)] * (2 ** (n - i)))
        pairs.append(SentencePair((tid,), (tid,)))
    table = count_frequencies(freq_sentences, vocab)
    return ParallelCorpus(tuple(pairs), vocab, vocab), table


class TestStratify:
    def test_even_split(self):
        corpus, table = ladder_corpus(6)
        strata = stratify(corpus, table)
        assert strata.high == (0, 1)
        assert strata.middle == (2, 3)
        assert strata.low == (4, 5)

    def test_remainder_goes_to_low(self):
        corpus, table = ladder_corpus(7)
        strata = stratify(corpus, table)
        assert (len(strata.high), len(strata.middle), len(strata.low)) == (2, 2, 3)

    def test_partition(self):
        corpus, table = ladder_corpus(11)
        strata = stratify(corpus, table)
        combined = sorted(strata.high + strata.middle + strata.low)
        assert combined == list(range(11))

    def test_mean_rarity_ordering_on_zipf_fixture(self):
        train, _, mapping = generate_zipf_task(50, 1.0, 1200, (2, 6), seed=11)
        test, _, _ = generate_zipf_task(50, 1.0, 120, (2, 6), seed=12, mapping=mapping)
        table = count_frequencies(train)
        strata = stratify(test, table)
        scores = [s.value for s in rarity_scores(test, table)]
        mean = lambda idxs: sum(scores[i] for i in idxs) / len(idxs)
        assert mean(strata.low) > mean(strata.middle) > mean(strata.high)

    def test_too_few_sentences_rejected(self):
        corpus, table = ladder_corpus(6)
        small = ParallelCorpus(corpus.pairs[:2], corpus.source_vocab, corpus.target_vocab)
        with pytest.raises(ValueError):
            stratify(small, table)


class TestSelectRareSubset:
    def test_selects_the_rarest_third(self):
        corpus, table = ladder_corpus(9)
        subset = select_rare_subset(corpus, table, 1 / 3)
        assert subset.pairs == corpus.pairs[6:]

    def test_ceiling_takes_everything_for_fraction_near_one(self):
        corpus, table = ladder_corpus(5)
        subset = select_rare_subset(corpus, table, 0.999)
        assert len(subset) == 5

    def test_subset_mean_rarity_exceeds_full_mean(self):
        train, _, mapping = generate_zipf_task(50, 1.0, 800, (2, 6), seed=21)
        table = count_frequencies(train)
        subset = select_rare_subset(train, table, 1 / 3)
        full_scores = [s.value for s in rarity_scores(train, table)]
        sub_scores = [s.value for s in rarity_scores(subset, table)]
        assert sum(sub_scores) / len(sub_scores) > sum(full_scores) / len(full_scores)

    def test_invalid_fraction_rejected(self):
        corpus, table = ladder_corpus(5)
        for fraction in (0.0, 1.0, -0.5, 2.0):
            with pytest.raises(ValueError):
                select_rare_subset(corpus, table, fraction)


class TestOversampleConcat:
    def test_factor_one_is_permutation(self):
        corpus, table = ladder_corpus(9)
        out = oversample_concat(corpus, table, 1 / 3, 1)
        assert sorted(out.pairs, key=id) == sorted(corpus.pairs, key=id)
        assert len(out) == len(corpus)

    def test_size_formula(self):
        """factor 3 and fraction 1/3 on 9 sentences give 3*3 + 6 = 15."""
        corpus, table = ladder_corpus(9)
        out = oversample_concat(corpus, table, 1 / 3, 3)
        assert len(out) == 15

    def test_rare_counts_scaled_by_factor(self):
        """Rarity-concentrated fixture: with one token per sentence the
        rarest types' counts in the output are exactly tripled."""
        corpus, table = ladder_corpus(9)
        out = oversample_concat(corpus, table, 1 / 3, 3)
        from collections import Counter

        orig = Counter(t for p in corpus.pairs for t in p.target)
        new = Counter(t for p in out.pairs for t in p.target)
        rare_types = {p.target[0] for p in select_rare_subset(corpus, table, 1 / 3).pairs}
        for t in rare_types:
            assert new[t] == 3 * orig[t]

    def test_per_type_bookkeeping_on_zipf_fixture(self):
        """Output count of every type equals 3 * (count in rare subset)
        plus its count in the remaining sentences."""
        from collections import Counter

        train, _, _ = generate_zipf_task(40, 1.0, 600, (2, 6), seed=31)
        table = count_frequencies(train)
        out = oversample_concat(train, table, 1 / 3, 3)
        rare = select_rare_subset(train, table, 1 / 3)
        orig = Counter(t for p in train.pairs for t in p.target)
        in_rare = Counter(t for p in rare.pairs for t in p.target)
        new = Counter(t for p in out.pairs for t in p.target)
        for t, total in orig.items():
            assert new[t] == 3 * in_rare[t] + (total - in_rare[t])

    def test_invalid_factor_rejected(self):
        corpus, table = ladder_corpus(5)
        with pytest.raises(ValueError):
            oversample_concat(corpus, table, 1 / 3, 0)
