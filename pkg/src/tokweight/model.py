"""A small autoregressive encoder-decoder with manual gradients.

The architecture is deliberately minimal so the analytic gradients stay
tractable: the source sentence is encoded as the mean of its token
embeddings, each decoding step conditions on that context plus the
embedding of the previous target token, one tanh hidden layer feeds a
softmax output.  Positions are therefore independent under teacher
forcing, which keeps training fully vectorized.

Training is plain SGD over shuffled batches with a fixed reduction
order, so a (seed, config) pair always yields bit-identical parameters.
Per-phase data modes implement the frequency-based selection baselines:
``rare_subset`` fine-tunes on the rarest third of the training
sentences, ``oversampled`` repeats that subset three times before
concatenating the rest.

Checkpoints are versioned text: a header, both vocabularies, then named
parameter blocks as base-10 floats (repr round-trip), so they are
diffable and language neutral.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .corpus import (
    BOS_ID,
    EOS_ID,
    NUM_RESERVED,
    PAD_ID,
    UNK_ID,
    FrequencyTable,
    ParallelCorpus,
    SentencePair,
    Vocabulary,
    count_frequencies,
)
from .loss import LossConfig, StepDistribution, loss_and_gradient, softmax
from .rarity import oversample_concat, select_rare_subset

CHECKPOINT_HEADER = "tokweight-checkpoint v1"

PARAM_BLOCKS = (
    "source_embedding",
    "target_embedding",
    "context_proj",
    "state_proj",
    "hidden_bias",
    "output_proj",
    "output_bias",
)


class TrainingDiverged(RuntimeError):
    """Loss became non-finite; carries the last finite parameter snapshot."""

    def __init__(self, message: str, last_good: "ModelParams"):
        super().__init__(message)
        self.last_good = last_good


@dataclass
class ModelParams:
    source_embedding: np.ndarray  # (V_s, d)
    target_embedding: np.ndarray  # (V_t, d)
    context_proj: np.ndarray      # (d, h)
    state_proj: np.ndarray        # (d, h)
    hidden_bias: np.ndarray       # (h,)
    output_proj: np.ndarray       # (h, V_t)
    output_bias: np.ndarray       # (V_t,)

    @property
    def dim(self) -> int:
        return self.source_embedding.shape[1]

    @property
    def hidden(self) -> int:
        return self.hidden_bias.shape[0]

    def copy(self) -> "ModelParams":
        return ModelParams(**{f.name: getattr(self, f.name).copy() for f in fields(self)})

    def blocks(self) -> dict[str, np.ndarray]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def init_params(
    source_vocab_size: int,
    target_vocab_size: int,
    dim: int,
    hidden: int,
    seed: int,
    scale: float = 0.1,
) -> ModelParams:
    rng = np.random.default_rng(seed)
    shapes = {
        "source_embedding": (source_vocab_size, dim),
        "target_embedding": (target_vocab_size, dim),
        "context_proj": (dim, hidden),
        "state_proj": (dim, hidden),
        "hidden_bias": (hidden,),
        "output_proj": (hidden, target_vocab_size),
        "output_bias": (target_vocab_size,),
    }
    return ModelParams(**{
        name: scale * rng.standard_normal(shape) for name, shape in shapes.items()
    })


def zero_like_params(params: ModelParams) -> ModelParams:
    return ModelParams(**{k: np.zeros_like(v) for k, v in params.blocks().items()})


@dataclass(frozen=True)
class TrainConfig:
    """One training phase: objective, rates, data mode, and budget."""

    phase: str
    loss: LossConfig
    learning_rate: float
    max_steps: int
    batch_size: int
    seed: int
    finetune_lr_ratio: float = 0.1
    data_mode: str = "full"
    data_fraction: float = 1.0 / 3.0
    oversample_factor: int = 3

    def __post_init__(self):
        if self.phase not in ("pretrain", "finetune"):
            raise ValueError(f"unknown phase {self.phase!r}")
        if self.data_mode not in ("full", "rare_subset", "oversampled"):
            raise ValueError(f"unknown data mode {self.data_mode!r}")
        if self.learning_rate <= 0 or self.max_steps <= 0 or self.batch_size <= 0:
            raise ValueError("learning_rate, max_steps, and batch_size must be positive")
        if not 0.0 < self.finetune_lr_ratio <= 1.0:
            raise ValueError("finetune_lr_ratio must lie in (0, 1]")

    @property
    def effective_learning_rate(self) -> float:
        # the low-rate rule applies only when fine-tuning
        if self.phase == "finetune":
            return self.learning_rate * self.finetune_lr_ratio
        return self.learning_rate


@dataclass(frozen=True)
class DecodeConfig:
    mode: str = "beam"
    beam_size: int = 4
    length_penalty: float = 0.6
    max_length: int = 50

    def __post_init__(self):
        if self.mode not in ("greedy", "beam"):
            raise ValueError(f"unknown decode mode {self.mode!r}")
        if self.beam_size < 1:
            raise ValueError("beam_size must be at least 1")
        if self.max_length < 1:
            raise ValueError("max_length must be at least 1")


def _context(params: ModelParams, source: tuple[int, ...]) -> np.ndarray:
    return params.source_embedding[list(source)].mean(axis=0)


def _logits_for(params: ModelParams, contexts: np.ndarray, prev_ids: np.ndarray):
    """Hidden activations and logits for a batch of (context, prev) rows."""
    pre = contexts @ params.context_proj
    pre += params.target_embedding[prev_ids] @ params.state_proj
    pre += params.hidden_bias
    hidden = np.tanh(pre)
    logits = hidden @ params.output_proj + params.output_bias
    return hidden, logits


class _PackedPairs:
    """Per-pair index arrays cached once so batch assembly stays cheap.

    Each pair contributes len(target) + 1 teacher-forced positions: the
    target tokens plus the end-of-sequence step.
    """

    def __init__(self, pairs):
        self.pairs = list(pairs)
        self.prev = [
            np.array([BOS_ID] + list(p.target), dtype=np.intp) for p in self.pairs
        ]
        self.tgt = [
            np.array(list(p.target) + [EOS_ID], dtype=np.intp) for p in self.pairs
        ]
        self.src = [np.array(p.source, dtype=np.intp) for p in self.pairs]
        self.src_lengths = np.array([len(p.source) for p in self.pairs], dtype=np.float64)
        self.tgt_lengths = np.array([len(p.target) + 1 for p in self.pairs], dtype=np.intp)

    def batch(self, idx):
        prev = np.concatenate([self.prev[i] for i in idx])
        tgt = np.concatenate([self.tgt[i] for i in idx])
        src = np.concatenate([self.src[i] for i in idx])
        src_len = self.src_lengths[list(idx)]
        pos_index = np.repeat(np.arange(len(idx)), self.tgt_lengths[list(idx)])
        return src, src_len, prev, tgt, pos_index


def _forward_packed(params: ModelParams, batch):
    src, src_len, prev, targets, pos_index = batch
    src_offsets = np.zeros(len(src_len), dtype=np.intp)
    np.cumsum(src_len[:-1].astype(np.intp), out=src_offsets[1:])
    rows = params.source_embedding[src]
    contexts = np.add.reduceat(rows, src_offsets, axis=0) / src_len[:, None]
    ctx_rows = contexts[pos_index]
    hidden, logits = _logits_for(params, ctx_rows, prev)
    return contexts, ctx_rows, hidden, logits


def _packed_loss_and_grads(
    params: ModelParams,
    batch,
    config: LossConfig,
    weight_vector: np.ndarray | None,
) -> tuple[float, ModelParams]:
    src, src_len, prev, targets, pos_index = batch
    contexts, ctx_rows, hidden, logits = _forward_packed(params, batch)
    value, dlogits = loss_and_gradient(logits, targets, config, weight_vector)

    grads = zero_like_params(params)
    grads.output_proj += hidden.T @ dlogits
    grads.output_bias += dlogits.sum(axis=0)
    dhidden = dlogits @ params.output_proj.T
    dpre = dhidden * (1.0 - hidden * hidden)
    grads.hidden_bias += dpre.sum(axis=0)
    grads.context_proj += ctx_rows.T @ dpre
    grads.state_proj += params.target_embedding[prev].T @ dpre
    np.add.at(grads.target_embedding, prev, dpre @ params.state_proj.T)

    dctx_rows = dpre @ params.context_proj.T
    dcontexts = np.zeros_like(contexts)
    np.add.at(dcontexts, pos_index, dctx_rows)
    np.add.at(
        grads.source_embedding,
        src,
        np.repeat(dcontexts / src_len[:, None], src_len.astype(np.intp), axis=0),
    )
    return value, grads


def _batch_loss_and_grads(
    params: ModelParams,
    pairs,
    config: LossConfig,
    weight_vector: np.ndarray | None,
) -> tuple[float, ModelParams]:
    packed = _PackedPairs(pairs)
    return _packed_loss_and_grads(params, packed.batch(range(len(pairs))), config, weight_vector)


def forward(params: ModelParams, pair: SentencePair) -> list[StepDistribution]:
    """Teacher-forced distributions, one per target token plus the
    end-of-sequence step."""
    batch = _PackedPairs([pair]).batch([0])
    targets = batch[3]
    _, _, _, logits = _forward_packed(params, batch)
    probs = softmax(logits)
    return [
        StepDistribution(logits=logits[i], probabilities=probs[i], target_id=int(targets[i]))
        for i in range(len(targets))
    ]


def backward(params: ModelParams, pair: SentencePair, config: LossConfig) -> ModelParams:
    """Exact analytic gradients of the configured loss for one pair."""
    weight_vector = None
    if config.weighting == "static":
        weight_vector = config.weight_table.as_vector()
    _, grads = _batch_loss_and_grads(params, [pair], config, weight_vector)
    return grads


@dataclass(frozen=True)
class EpochLog:
    phase_index: int
    phase: str
    epoch: int
    mean_loss: float
    steps_completed: int


def _phase_data(corpus: ParallelCorpus, table: FrequencyTable, cfg: TrainConfig) -> ParallelCorpus:
    if cfg.data_mode == "full":
        return corpus
    if cfg.data_mode == "rare_subset":
        return select_rare_subset(corpus, table, cfg.data_fraction)
    return oversample_concat(corpus, table, cfg.data_fraction, cfg.oversample_factor)


def train(
    corpus: ParallelCorpus,
    schedule,
    dim: int = 32,
    hidden: int = 64,
    initial: ModelParams | None = None,
    checkpoint_callback=None,
) -> tuple[ModelParams, list[EpochLog]]:
    """Run a schedule of training phases with plain SGD.

    Without explicit initial parameters the schedule must start with a
    pretrain phase; a pretrain phase may never follow a finetune phase.
    The optional ``checkpoint_callback(phase_index, params)`` fires at
    each phase boundary.  A non-finite batch loss aborts with the last
    epoch-end snapshot attached to the raised :class:`TrainingDiverged`.
    """
    schedule = list(schedule)
    if not schedule:
        raise ValueError("schedule must be non-empty")
    seen_finetune = False
    for cfg in schedule:
        if cfg.phase == "pretrain" and seen_finetune:
            raise ValueError("pretrain phases must come before finetune phases")
        seen_finetune = seen_finetune or cfg.phase == "finetune"
    if initial is None and schedule[0].phase != "pretrain":
        raise ValueError("schedule must start with a pretrain phase")

    if initial is None:
        params = init_params(
            len(corpus.source_vocab), len(corpus.target_vocab), dim, hidden, schedule[0].seed
        )
    else:
        params = initial.copy()

    table = count_frequencies(corpus)
    log: list[EpochLog] = []
    snapshot = params.copy()

    for phase_index, cfg in enumerate(schedule):
        data = _phase_data(corpus, table, cfg)
        packed = _PackedPairs(data.pairs)
        weight_vector = None
        if cfg.loss.weighting == "static":
            weight_vector = cfg.loss.weight_table.as_vector()
        lr = cfg.effective_learning_rate
        rng = np.random.default_rng(cfg.seed)

        steps = 0
        epoch = 0
        while steps < cfg.max_steps:
            order = rng.permutation(len(data))
            epoch_losses: list[float] = []
            for start in range(0, len(order), cfg.batch_size):
                if steps >= cfg.max_steps:
                    break
                batch = packed.batch(order[start : start + cfg.batch_size])
                value, grads = _packed_loss_and_grads(params, batch, cfg.loss, weight_vector)
                if not math.isfinite(value):
                    raise TrainingDiverged(
                        f"loss became non-finite in phase {phase_index} step {steps}",
                        snapshot,
                    )
                for name, g in grads.blocks().items():
                    getattr(params, name)[...] -= lr * g
                epoch_losses.append(value)
                steps += 1
            epoch += 1
            log.append(
                EpochLog(
                    phase_index=phase_index,
                    phase=cfg.phase,
                    epoch=epoch,
                    mean_loss=float(np.mean(epoch_losses)),
                    steps_completed=steps,
                )
            )
            snapshot = params.copy()
        if checkpoint_callback is not None:
            checkpoint_callback(phase_index, params.copy())

    return params, log


def teacher_forced_accuracy(params: ModelParams, corpus: ParallelCorpus) -> float:
    """Fraction of teacher-forced positions whose argmax equals the truth."""
    packed = _PackedPairs(corpus.pairs)
    correct = 0
    total = 0
    for start in range(0, len(corpus), 256):
        batch = packed.batch(range(start, min(start + 256, len(corpus))))
        targets = batch[3]
        _, _, _, logits = _forward_packed(params, batch)
        correct += int(np.sum(np.argmax(logits, axis=1) == targets))
        total += len(targets)
    return correct / total


def _masked_log_probs(logits: np.ndarray) -> np.ndarray:
    """Log-probabilities with the never-generated ids masked out."""
    z = logits - np.max(logits, axis=-1, keepdims=True)
    logp = z - np.log(np.sum(np.exp(z), axis=-1, keepdims=True))
    logp[..., [PAD_ID, UNK_ID, BOS_ID]] = -np.inf
    return logp


def _length_penalty(length: int, alpha: float) -> float:
    return ((5.0 + length) / 6.0) ** alpha


def decode(params: ModelParams, source, config: DecodeConfig) -> list[int]:
    """Decode one source sentence to target ids (end symbol excluded).

    Greedy picks the argmax at each step, ties broken by lowest token
    id; it stops at the end symbol or after ``max_length`` tokens.  Beam
    search keeps ``beam_size`` hypotheses under the length-penalized
    score ``log_prob / ((5 + len) / 6) ** length_penalty`` where a
    finished hypothesis's length counts its end symbol; candidates tie
    on equal score by (hypothesis index, token id).  Pad, unknown, and
    begin symbols are never generated.  Beam size 1 reproduces greedy
    exactly.
    """
    context = _context(params, tuple(source))[None, :]
    if config.mode == "greedy":
        return _decode_greedy(params, context, config)
    return _decode_beam(params, context, config)


def _decode_greedy(params: ModelParams, context: np.ndarray, config: DecodeConfig) -> list[int]:
    out: list[int] = []
    prev = BOS_ID
    for _ in range(config.max_length):
        _, logits = _logits_for(params, context, np.array([prev], dtype=np.intp))
        logp = _masked_log_probs(logits)[0]
        token = int(np.argmax(logp))  # argmax returns the lowest index on ties
        if token == EOS_ID:
            break
        out.append(token)
        prev = token
    return out


def _decode_beam(params: ModelParams, context: np.ndarray, config: DecodeConfig) -> list[int]:
    alive: list[tuple[list[int], float]] = [([], 0.0)]
    finished: list[tuple[list[int], float]] = []  # (tokens, penalized score)
    for _ in range(config.max_length):
        prev = np.array([seq[-1] if seq else BOS_ID for seq, _ in alive], dtype=np.intp)
        ctx = np.repeat(context, len(alive), axis=0)
        _, logits = _logits_for(params, ctx, prev)
        logp = _masked_log_probs(logits)
        scores = np.array([s for _, s in alive])[:, None] + logp
        flat = scores.ravel()
        order = np.argsort(-flat, kind="stable")[: config.beam_size]
        vsize = logp.shape[1]
        new_alive: list[tuple[list[int], float]] = []
        for flat_idx in order:
            b, token = divmod(int(flat_idx), vsize)
            score = float(flat[flat_idx])
            if token == EOS_ID:
                length = len(alive[b][0]) + 1  # end symbol counted
                finished.append((alive[b][0], score / _length_penalty(length, config.length_penalty)))
            else:
                new_alive.append((alive[b][0] + [token], score))
        alive = new_alive
        if not alive:
            break
    best: tuple[float, list[int]] | None = None
    for seq, penalized in finished:
        if best is None or penalized > best[0]:
            best = (penalized, seq)
    if best is None:
        for seq, score in alive:
            penalized = score / _length_penalty(len(seq), config.length_penalty)
            if best is None or penalized > best[0]:
                best = (penalized, seq)
    return best[1] if best is not None else []


def decode_corpus(params: ModelParams, sources, config: DecodeConfig, threads: int = 1):
    """Decode many sentences, results in input order regardless of threads."""
    if threads > 1 and len(sources) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda s: decode(params, s, config), sources))
    return [decode(params, src, config) for src in sources]


def generate_zipf_task(
    vocab_size: int,
    zipf_exponent: float,
    pairs: int,
    length_range: tuple[int, int],
    seed: int,
    mapping: str | dict[int, int] = "permutation",
) -> tuple[ParallelCorpus, Vocabulary, dict[int, int]]:
    """Synthetic lexical-translation corpus with Zipf-distributed types.

    Source tokens are drawn without replacement inside each sentence
    from Zipf(exponent) probabilities over ``vocab_size`` types (token
    ``w001`` is the most probable).  The target is a deterministic
    bijective relabeling of the source; both sides are emitted in
    ascending id order, so the next token is a function of the sentence
    content and the previous token, which the reference architecture can
    represent.  ``mapping`` is ``"permutation"`` (derived from the
    seed), ``"identity"`` (a copy task), or an explicit dict.
    """
    if vocab_size < 10:
        raise ValueError("vocab_size must be at least 10")
    lo, hi = length_range
    if not 1 <= lo <= hi <= vocab_size:
        raise ValueError("length_range must satisfy 1 <= lo <= hi <= vocab_size")
    if pairs < 1:
        raise ValueError("pairs must be positive")

    width = len(str(vocab_size))
    vocab = Vocabulary(f"w{i + 1:0{width}d}" for i in range(vocab_size))

    if mapping == "identity":
        mapping_dict = {NUM_RESERVED + i: NUM_RESERVED + i for i in range(vocab_size)}
    elif mapping == "permutation":
        perm = np.random.default_rng([seed, 0x7A9]).permutation(vocab_size)
        mapping_dict = {NUM_RESERVED + i: NUM_RESERVED + int(perm[i]) for i in range(vocab_size)}
    elif isinstance(mapping, dict):
        mapping_dict = dict(mapping)
    else:
        raise ValueError(f"unknown mapping {mapping!r}")

    ranks = np.arange(1, vocab_size + 1, dtype=np.float64)
    log_probs = -zipf_exponent * np.log(ranks)
    log_probs -= log_probs.max()

    rng = np.random.default_rng(seed)
    out_pairs = []
    for _ in range(pairs):
        n = int(rng.integers(lo, hi + 1))
        # Gumbel top-k draws k types without replacement from the Zipf law
        keys = log_probs + rng.gumbel(size=vocab_size)
        chosen = np.argpartition(-keys, n - 1)[:n]
        source = tuple(sorted(NUM_RESERVED + int(r) for r in chosen))
        target = tuple(sorted(mapping_dict[s] for s in source))
        out_pairs.append(SentencePair(source=source, target=target))
    corpus = ParallelCorpus(tuple(out_pairs), vocab, vocab)
    return corpus, vocab, mapping_dict


def _format_array(arr: np.ndarray) -> list[str]:
    if arr.ndim == 1:
        return [" ".join(repr(float(x)) for x in arr)]
    return [" ".join(repr(float(x)) for x in row) for row in arr]


def save_checkpoint(
    params: ModelParams,
    source_vocab: Vocabulary,
    target_vocab: Vocabulary,
    path: str | Path,
) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(CHECKPOINT_HEADER + "\n")
        fh.write(f"dim {params.dim}\n")
        fh.write(f"hidden {params.hidden}\n")
        for label, vocab in (("source_tokens", source_vocab), ("target_tokens", target_vocab)):
            fh.write(f"{label} {len(vocab.tokens)}\n")
            for tok in vocab.tokens:
                fh.write(tok + "\n")
        for name, arr in params.blocks().items():
            dims = " ".join(str(s) for s in arr.shape)
            fh.write(f"block {name} {dims}\n")
            for line in _format_array(arr):
                fh.write(line + "\n")


def load_checkpoint(path: str | Path) -> tuple[ModelParams, Vocabulary, Vocabulary]:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    if lines[0] != CHECKPOINT_HEADER:
        raise ValueError(f"{path}: not a {CHECKPOINT_HEADER!r} file")
    pos = 1

    def expect(keyword: str) -> list[str]:
        nonlocal pos
        parts = lines[pos].split(" ")
        if parts[0] != keyword:
            raise ValueError(f"{path}: expected {keyword!r} at line {pos + 1}")
        pos += 1
        return parts[1:]

    expect("dim")
    expect("hidden")
    vocabs = []
    for label in ("source_tokens", "target_tokens"):
        (count,) = expect(label)
        toks = lines[pos : pos + int(count)]
        pos += int(count)
        vocabs.append(Vocabulary(toks))

    blocks: dict[str, np.ndarray] = {}
    for name in PARAM_BLOCKS:
        header = expect("block")
        if header[0] != name:
            raise ValueError(f"{path}: expected block {name!r}, found {header[0]!r}")
        shape = tuple(int(x) for x in header[1:])
        rows = shape[0] if len(shape) > 1 else 1
        data = [
            [float(x) for x in lines[pos + r].split(" ")]
            for r in range(rows)
        ]
        pos += rows
        arr = np.array(data, dtype=np.float64)
        blocks[name] = arr.reshape(shape)
    return ModelParams(**blocks), vocabs[0], vocabs[1]
