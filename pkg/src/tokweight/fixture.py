"""End-to-end desk-scale experiment comparing weighted fine-tuning systems.

The pipeline generates a Zipf-imbalanced translation task, counts
target frequencies, builds uniform/exponential/chi-square weight
tables, pretrains one model with the plain objective, fine-tunes it
three ways at a low learning rate (Baseline-FT keeps uniform weights,
the other two use the adaptive tables), then evaluates stratified BLEU,
rare-bucket recall, token-distribution deciles, and lexical diversity
on a held-out set.

Every product is a pure function of the seed, so repeated runs emit
byte-identical reports regardless of the thread count.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, replace
from pathlib import Path

from .corpus import (
    FrequencyTable,
    ParallelCorpus,
    count_frequencies,
    decode_sentence,
    write_frequency_tsv,
    write_sentences,
)
from .loss import LossConfig
from .metrics import DistributionReport, bleu4, distribution_report, diversity_report
from .model import (
    DecodeConfig,
    ModelParams,
    TrainConfig,
    decode_corpus,
    generate_zipf_task,
    save_checkpoint,
    teacher_forced_accuracy,
    train,
)
from .rarity import rarity_scores, stratify
from .weighting import (
    CriteriaReport,
    WeightScheme,
    build_weight_table,
    calibrate_amplitude,
    validate_criteria,
    write_weight_tsv,
)

SYSTEMS = ("baseline_ft", "our_exp", "our_k2")


class FixtureStageError(RuntimeError):
    """A pipeline stage failed; carries the stage name for the abort message."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage


class _StageTracker:
    def __init__(self):
        self.stage = "setup"

    def __call__(self, name: str) -> str:
        self.stage = name
        return name


@dataclass(frozen=True)
class FixtureConfig:
    """Parameters of the desk-scale experiment; defaults are the
    released fixture (seed 17)."""

    vocab_size: int = 200
    zipf_exponent: float = 1.0
    train_pairs: int = 10000
    test_pairs: int = 500
    length_range: tuple[int, int] = (2, 6)
    seed: int = 17
    dim: int = 64
    hidden: int = 160
    learning_rate: float = 2.0
    pretrain_steps: int = 1500
    finetune_steps: int = 1500
    finetune_lr_ratio: float = 0.3
    batch_size: int = 64
    exponential_temperature: float = 1.0
    chi_square_temperature: float = 5.0
    delta_max: float = 0.2
    beam_size: int = 4
    length_penalty: float = 0.6
    max_decode_length: int = 20
    threads: int = 1

    def scaled(self, **overrides) -> "FixtureConfig":
        return replace(self, **overrides)


@dataclass
class SystemMetrics:
    name: str
    bleu: float
    bleu_high: float
    bleu_middle: float
    bleu_low: float
    accuracy: float
    rare_recall: float
    decile10_count: int
    ttr: float
    hdd: float
    mtld: float


@dataclass
class FixtureResult:
    config: FixtureConfig
    table: FrequencyTable
    train_corpus: ParallelCorpus
    test_corpus: ParallelCorpus
    criteria: dict[str, CriteriaReport]
    systems: dict[str, SystemMetrics]
    reference_diversity: tuple[float, float, float]
    distribution: DistributionReport
    loss_curves: dict[str, list[float]]
    hypotheses: dict[str, list[list[int]]]
    checkpoints: dict[str, ModelParams]
    weight_tables: dict


def bucket_recall(hypotheses, references, bucket_ids) -> float:
    """Clipped unigram recall restricted to a set of token types."""
    matched = 0
    total = 0
    for hyp, ref in zip(hypotheses, references):
        hyp_counts = Counter(t for t in hyp if t in bucket_ids)
        ref_counts = Counter(t for t in ref if t in bucket_ids)
        total += sum(ref_counts.values())
        matched += sum(min(c, hyp_counts[t]) for t, c in ref_counts.items())
    return matched / total if total else 0.0


def rare_type_bucket(table: FrequencyTable, fraction: float = 0.5) -> set[int]:
    """The rarest ``fraction`` of observed types by training frequency."""
    n = len(table.rank)
    return set(table.rank[n - int(n * fraction) :])


def run_comparison(config: FixtureConfig) -> FixtureResult:
    """Run the full pretrain / three-way finetune / evaluate pipeline.

    Any stage failure aborts with the stage name attached.
    """
    tracker = _StageTracker()
    try:
        return _run_comparison_stages(config, tracker)
    except FixtureStageError:
        raise
    except Exception as exc:
        raise FixtureStageError(tracker.stage, exc) from exc


def _run_comparison_stages(config: FixtureConfig, stage: _StageTracker) -> FixtureResult:
    cfg = config
    stage("gen-zipf")
    train_corpus, vocab, mapping = generate_zipf_task(
        cfg.vocab_size, cfg.zipf_exponent, cfg.train_pairs, cfg.length_range, seed=cfg.seed
    )
    test_corpus, _, _ = generate_zipf_task(
        cfg.vocab_size,
        cfg.zipf_exponent,
        cfg.test_pairs,
        cfg.length_range,
        seed=cfg.seed + 1000,
        mapping=mapping,
    )
    stage("freq-analyze")
    table = count_frequencies(train_corpus, threads=cfg.threads)

    stage("weights")
    schemes = {
        "uniform": WeightScheme(form="uniform"),
        "exponential": WeightScheme(
            form="exponential",
            amplitude=calibrate_amplitude("exponential", cfg.exponential_temperature),
            temperature=cfg.exponential_temperature,
        ),
        "chi_square": WeightScheme(
            form="chi_square",
            amplitude=calibrate_amplitude("chi_square", cfg.chi_square_temperature),
            temperature=cfg.chi_square_temperature,
        ),
    }
    weight_tables = {name: build_weight_table(table, s) for name, s in schemes.items()}
    criteria = {
        name: validate_criteria(wt, cfg.delta_max) for name, wt in weight_tables.items()
    }

    plain = LossConfig(weighting="uniform", label_smoothing=0.0)
    stage("pretrain")
    pretrain_cfg = TrainConfig(
        phase="pretrain",
        loss=plain,
        learning_rate=cfg.learning_rate,
        max_steps=cfg.pretrain_steps,
        batch_size=cfg.batch_size,
        seed=cfg.seed,
    )
    pretrained, pretrain_log = train(
        train_corpus, [pretrain_cfg], dim=cfg.dim, hidden=cfg.hidden
    )

    finetune_losses = {
        "baseline_ft": plain,
        "our_exp": LossConfig(
            weighting="static", weight_table=weight_tables["exponential"], label_smoothing=0.0
        ),
        "our_k2": LossConfig(
            weighting="static", weight_table=weight_tables["chi_square"], label_smoothing=0.0
        ),
    }

    strata = stratify(test_corpus, table)
    rare_ids = rare_type_bucket(table)
    decode_cfg = DecodeConfig(
        mode="beam",
        beam_size=cfg.beam_size,
        length_penalty=cfg.length_penalty,
        max_length=cfg.max_decode_length,
    )
    sources = [p.source for p in test_corpus.pairs]
    references = [list(p.target) for p in test_corpus.pairs]
    ref_tokens = [vocab.token(t) for ref in references for t in ref]

    rank = table.rank
    cuts = [len(rank) * i // 10 for i in range(11)]
    decile_of = {tid: d for d in range(10) for tid in rank[cuts[d] : cuts[d + 1]]}

    systems: dict[str, SystemMetrics] = {}
    loss_curves: dict[str, list[float]] = {
        "pretrain": [e.mean_loss for e in pretrain_log]
    }
    hypotheses: dict[str, list[list[int]]] = {}
    checkpoints: dict[str, ModelParams] = {"pretrain": pretrained}
    texts_for_distribution: dict[str, list[str]] = {"reference": ref_tokens}

    for name in SYSTEMS:
        stage(f"finetune-{name}")
        finetune_cfg = TrainConfig(
            phase="finetune",
            loss=finetune_losses[name],
            learning_rate=cfg.learning_rate,
            max_steps=cfg.finetune_steps,
            batch_size=cfg.batch_size,
            seed=cfg.seed + 7,
            finetune_lr_ratio=cfg.finetune_lr_ratio,
        )
        params, log = train(train_corpus, [finetune_cfg], initial=pretrained)
        stage(f"evaluate-{name}")
        hyps = decode_corpus(params, sources, decode_cfg, threads=cfg.threads)
        hypotheses[name] = hyps
        checkpoints[name] = params
        loss_curves[name] = [e.mean_loss for e in log]

        hyp_tokens = [vocab.token(t) for hyp in hyps for t in hyp]
        texts_for_distribution[name] = hyp_tokens
        per_bucket = {}
        for bucket, idxs in strata.buckets().items():
            per_bucket[bucket] = bleu4([hyps[i] for i in idxs], [references[i] for i in idxs]).score
        div = diversity_report(hyp_tokens)
        systems[name] = SystemMetrics(
            name=name,
            bleu=bleu4(hyps, references).score,
            bleu_high=per_bucket["High"],
            bleu_middle=per_bucket["Middle"],
            bleu_low=per_bucket["Low"],
            accuracy=teacher_forced_accuracy(params, test_corpus),
            rare_recall=bucket_recall(hyps, references, rare_ids),
            decile10_count=sum(
                1 for hyp in hyps for t in hyp if decile_of.get(t, 9) == 9
            ),
            ttr=div.ttr,
            hdd=div.hdd,
            mtld=div.mtld,
        )

    stage("report")
    ref_div = diversity_report(ref_tokens)
    distribution = distribution_report(texts_for_distribution, table)
    return FixtureResult(
        config=cfg,
        table=table,
        train_corpus=train_corpus,
        test_corpus=test_corpus,
        criteria=criteria,
        systems=systems,
        reference_diversity=(ref_div.ttr, ref_div.hdd, ref_div.mtld),
        distribution=distribution,
        loss_curves=loss_curves,
        hypotheses=hypotheses,
        checkpoints=checkpoints,
        weight_tables=weight_tables,
    )


REPORT_COLUMNS = (
    "system,bleu,bleu_high,bleu_middle,bleu_low,token_accuracy,"
    "rare_recall,decile10_count,ttr,hdd,mtld"
)


def format_report_csv(result: FixtureResult) -> str:
    lines = [REPORT_COLUMNS]
    ref_decile10 = result.distribution.counts["reference"][9]
    ttr_r, hdd_r, mtld_r = result.reference_diversity
    lines.append(
        f"reference,,,,,,,{ref_decile10},{ttr_r:.6f},{hdd_r:.6f},{mtld_r:.6f}"
    )
    for name in SYSTEMS:
        m = result.systems[name]
        lines.append(
            f"{m.name},{m.bleu:.2f},{m.bleu_high:.2f},{m.bleu_middle:.2f},{m.bleu_low:.2f},"
            f"{m.accuracy:.6f},{m.rare_recall:.6f},{m.decile10_count},"
            f"{m.ttr:.6f},{m.hdd:.6f},{m.mtld:.6f}"
        )
    return "\n".join(lines) + "\n"


def format_report_table(result: FixtureResult) -> str:
    """Human-readable comparison table for standard output."""
    header = (
        f"{'system':<12} {'BLEU':>7} {'High':>7} {'Middle':>7} {'Low':>7} "
        f"{'acc':>7} {'rare':>7} {'d10':>5} {'TTR':>7} {'HD-D':>6} {'MTLD':>7}"
    )
    rows = [header, "-" * len(header)]
    for name in SYSTEMS:
        m = result.systems[name]
        rows.append(
            f"{m.name:<12} {m.bleu:>7.2f} {m.bleu_high:>7.2f} {m.bleu_middle:>7.2f} "
            f"{m.bleu_low:>7.2f} {m.accuracy:>7.4f} {m.rare_recall:>7.4f} "
            f"{m.decile10_count:>5d} {m.ttr:>7.4f} {m.hdd:>6.3f} "
            + (f"{m.mtld:>7.1f}" if math.isfinite(m.mtld) else f"{'inf':>7}")
        )
    ttr_r, hdd_r, mtld_r = result.reference_diversity
    rows.append(
        f"{'reference':<12} {'-':>7} {'-':>7} {'-':>7} {'-':>7} {'-':>7} {'-':>7} "
        f"{result.distribution.counts['reference'][9]:>5d} {ttr_r:>7.4f} {hdd_r:>6.3f} "
        + (f"{mtld_r:>7.1f}" if math.isfinite(mtld_r) else f"{'inf':>7}")
    )
    return "\n".join(rows)


def write_fixture_artifacts(result: FixtureResult, out_dir: str | Path) -> Path:
    """Write corpora, tables, checkpoints, hypotheses, reports, figures.

    Returns the path of the main comparison table (report.csv).
    """
    from .metrics import write_distribution_csv
    from .plots import plot_distribution_report, plot_loss_curves, plot_weight_curve

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    vocab = result.train_corpus.target_vocab

    for stem, corpus in (("train", result.train_corpus), ("test", result.test_corpus)):
        write_sentences(
            [decode_sentence(p.source, corpus.source_vocab) for p in corpus.pairs],
            out / f"{stem}.src",
        )
        write_sentences(
            [decode_sentence(p.target, corpus.target_vocab) for p in corpus.pairs],
            out / f"{stem}.tgt",
        )
    write_frequency_tsv(result.table, out / "freq.tsv")

    for name, wt in result.weight_tables.items():
        write_weight_tsv(wt, out / f"weights_{name}.tsv")
    plot_weight_curve(result.weight_tables["exponential"].scheme, out / "weights.png")

    scores = rarity_scores(result.test_corpus, result.table)
    strata = stratify(result.test_corpus, result.table)
    bucket_of = {}
    for bucket, idxs in strata.buckets().items():
        for i in idxs:
            bucket_of[i] = bucket
    with open(out / "rarity.tsv", "w", encoding="utf-8") as fh:
        for s in scores:
            fh.write(f"{s.sentence_index}\t{s.value:.6f}\t{bucket_of[s.sentence_index]}\n")

    for name, params in result.checkpoints.items():
        save_checkpoint(params, vocab, vocab, out / f"ckpt_{name}.txt")
    for name, hyps in result.hypotheses.items():
        write_sentences([decode_sentence(h, vocab) for h in hyps], out / f"hyp_{name}.txt")

    write_distribution_csv(result.distribution, out / "distribution.csv")
    plot_distribution_report(result.distribution, out / "distribution.png")
    plot_loss_curves(result.loss_curves, out / "loss_curves.png")

    report_path = out / "report.csv"
    report_path.write_text(format_report_csv(result), encoding="utf-8")
    return report_path
