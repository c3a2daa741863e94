"""Frequency-adaptive token weighting for small seq2seq training.

The package covers the full loop: corpus statistics, byte-pair
encoding, count-based weight functions with design-criteria
validation, weighted losses with exact gradients, a small trainable
encoder-decoder, rarity-based data selection, and evaluation
(stratified BLEU, token-distribution deciles, lexical diversity).
"""

__version__ = "0.1.0"

from .corpus import (  # noqa: F401
    FrequencyTable,
    ParallelCorpus,
    SentencePair,
    Vocabulary,
    count_frequencies,
    frequency_intervals,
    load_corpus,
)
from .weighting import (  # noqa: F401
    WeightScheme,
    WeightTable,
    build_weight_table,
    calibrate_amplitude,
    search_temperature,
    validate_criteria,
    weight_chisquare,
    weight_exponential,
)
from .loss import (  # noqa: F401
    LossConfig,
    StepDistribution,
    cross_entropy,
    entropy_penalty,
    focal_weight,
    loss_gradient,
    weighted_cross_entropy,
)
from .model import (  # noqa: F401
    DecodeConfig,
    ModelParams,
    TrainConfig,
    backward,
    decode,
    forward,
    generate_zipf_task,
    train,
)
from .rarity import (  # noqa: F401
    oversample_concat,
    select_rare_subset,
    sentence_rarity,
    stratify,
)
from .metrics import bleu4, distribution_report, hdd, mtld, ttr  # noqa: F401
