import numpy as np
import pytest

from tokweight.corpus import Vocabulary, count_frequencies


@pytest.fixture
def abc_vocab():
    return Vocabulary(["a", "b", "c"])


@pytest.fixture
def abc_table(abc_vocab):
    """Counts a:3, b:1, c:1 (total 5, median 1)."""
    sentences = [
        tuple(abc_vocab.lookup(t) for t in "a a b".split()),
        tuple(abc_vocab.lookup(t) for t in "a c".split()),
    ]
    return count_frequencies(sentences, abc_vocab)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
