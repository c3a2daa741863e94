"""Command multiplexer wiring all modules into reproducible pipelines.

One binary, subcommand style.  Every command is a pure function of its
inputs, flags, and seed; commands that write outputs also write a
``<output>.manifest.json`` recording the resolved configuration, input
digests, tool version, and seed.  Exit status is 0 on success, 1 on
user error (message on standard error), 2 on internal error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from . import __version__
from .fixture import FixtureStageError
from .corpus import (
    CorpusFormatError,
    count_frequencies,
    decode_sentence,
    encode_sentence,
    frequency_intervals,
    load_corpus,
    read_frequency_tsv,
    read_sentences,
    vocabulary_from_sentences,
    write_frequency_tsv,
    write_sentences,
)
from .loss import LossConfig
from .weighting import (
    DEFAULT_DELTA_MAX,
    WeightScheme,
    build_weight_table,
    calibrate_amplitude,
    read_weight_tsv,
    search_temperature,
    validate_criteria,
    write_weight_tsv,
)
from .model import (
    DecodeConfig,
    TrainConfig,
    TrainingDiverged,
    decode_corpus,
    generate_zipf_task,
    load_checkpoint,
    save_checkpoint,
    train,
)
from . import bpe, metrics, rarity

DEFAULT_SEED = 17

SUBCOMMANDS = (
    "freq-analyze",
    "bpe-learn",
    "bpe-apply",
    "weights",
    "validate-criteria",
    "search-T",
    "rarity-split",
    "gen-zipf",
    "train",
    "translate",
    "bleu",
    "diversity",
    "dist-report",
    "reproduce-fixture",
)


def _sha256(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(output: str | Path, command: str, args: argparse.Namespace, inputs) -> None:
    """Record the resolved run next to its primary output."""
    config = {
        k: v for k, v in sorted(vars(args).items()) if k != "func" and not k.startswith("_")
    }
    manifest = {
        "command": command,
        "version": __version__,
        "seed": config.get("seed"),
        "configuration": config,
        "inputs": {str(p): _sha256(p) for p in inputs},
    }
    path = Path(str(output) + ".manifest.json")
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _parse_float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x]
    except ValueError:
        raise ValueError(f"expected a comma-separated list of numbers, got {text!r}") from None


def _parse_int_pair(text: str) -> tuple[int, int]:
    parts = text.split(",")
    if len(parts) != 2:
        raise ValueError(f"expected lo,hi - got {text!r}")
    return int(parts[0]), int(parts[1])


def cmd_freq_analyze(args) -> int:
    sentences = read_sentences(args.input)
    vocab = vocabulary_from_sentences(sentences)
    encoded = [encode_sentence(s, vocab) for s in sentences]
    table = count_frequencies(encoded, vocab, threads=args.threads)
    write_frequency_tsv(table, args.out)
    print(f"types={len(table.rank)} total={table.total} median={table.median}")
    if args.intervals:
        bounds = _parse_float_list(args.intervals)
        summary = frequency_intervals(table, bounds)
        lines = ["interval,low_pct,high_pct,types,average_frequency"]
        for i, iv in enumerate(summary, start=1):
            lines.append(
                f"{i},{iv.low_pct:g},{iv.high_pct:g},{len(iv.token_ids)},{iv.average:.6f}"
            )
        text = "\n".join(lines) + "\n"
        if args.intervals_out:
            Path(args.intervals_out).write_text(text, encoding="utf-8")
        else:
            print(text, end="")
    write_manifest(args.out, "freq-analyze", args, [args.input])
    return 0


def cmd_bpe_learn(args) -> int:
    sentences = read_sentences(args.input)
    counts = bpe.word_counts_from_sentences(sentences)
    merges = bpe.learn_merges(counts, args.merges)
    bpe.write_merges(merges, args.out)
    print(f"learned {len(merges)} merges (requested {args.merges})")
    write_manifest(args.out, "bpe-learn", args, [args.input])
    return 0


def cmd_bpe_apply(args) -> int:
    merges = bpe.read_merges(args.merges)
    sentences = read_sentences(args.input)
    tokenized = bpe.apply_merges_corpus(sentences, merges, threads=args.threads)
    write_sentences(tokenized, args.out)
    write_manifest(args.out, "bpe-apply", args, [args.merges, args.input])
    return 0


def cmd_weights(args) -> int:
    table = read_frequency_tsv(args.freq)
    if args.form in ("exponential", "chi_square"):
        amplitude = args.amplitude if args.amplitude else calibrate_amplitude(args.form, args.temperature)
        scheme = WeightScheme(
            form=args.form,
            amplitude=amplitude,
            temperature=args.temperature,
            normalize_by_median=not args.raw_counts,
        )
    else:
        scheme = WeightScheme(form=args.form)
    wt = build_weight_table(table, scheme)
    write_weight_tsv(wt, args.out)
    report = validate_criteria(wt, args.delta_max)
    print(
        f"form={scheme.form} expectation={wt.expectation:.6f} delta={report.delta:.6f} "
        f"min_ok={str(report.min_ok).lower()} expectation_ok={str(report.expectation_ok).lower()}"
    )
    if not args.no_plot:
        from .plots import plot_weight_curve

        plot_weight_curve(scheme, Path(args.out).with_suffix(".png"))
    write_manifest(args.out, "weights", args, [args.freq])
    return 0


def cmd_validate_criteria(args) -> int:
    table = read_frequency_tsv(args.freq)
    wt = read_weight_tsv(args.weights, table=table)
    report = validate_criteria(wt, args.delta_max)
    print(
        f"min_ok={str(report.min_ok).lower()} "
        f"expectation_ok={str(report.expectation_ok).lower()} delta={report.delta:.6f}"
    )
    return 0


def cmd_search_t(args) -> int:
    table = read_frequency_tsv(args.freq)
    grid = _parse_float_list(args.grid)
    candidates = search_temperature(table, args.form, grid, args.delta_max)
    lines = ["T,delta,pass"]
    for c in candidates:
        print(f"T={c.temperature:.4f} delta={c.delta:.6f} pass={str(c.passes).lower()}")
        lines.append(f"{c.temperature:.4f},{c.delta:.6f},{str(c.passes).lower()}")
    if args.out:
        Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
        write_manifest(args.out, "search-T", args, [args.freq])
    return 0


def cmd_rarity_split(args) -> int:
    src_path, tgt_path = args.input.split(",", 1)
    table = read_frequency_tsv(args.freq)
    src_sentences = read_sentences(src_path)
    src_vocab = vocabulary_from_sentences(src_sentences)
    corpus = load_corpus(src_path, tgt_path, src_vocab, table.vocab)
    scores = rarity.rarity_scores(corpus, table)

    prefix = Path(args.out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)

    def dump(name: str, pairs) -> None:
        write_sentences(
            [decode_sentence(p.source, src_vocab) for p in pairs], f"{prefix}.{name}.src"
        )
        write_sentences(
            [decode_sentence(p.target, table.vocab) for p in pairs], f"{prefix}.{name}.tgt"
        )

    bucket_of: dict[int, str] = {}
    if args.mode == "thirds":
        strata = rarity.stratify(corpus, table)
        for bucket, idxs in strata.buckets().items():
            for i in idxs:
                bucket_of[i] = bucket
            dump(bucket.lower(), [corpus.pairs[i] for i in idxs])
    elif args.mode == "subset":
        subset = rarity.select_rare_subset(corpus, table, args.fraction)
        selected = {id(p) for p in subset.pairs}
        for i, p in enumerate(corpus.pairs):
            bucket_of[i] = "selected" if id(p) in selected else "rest"
        dump("subset", subset.pairs)
    else:
        resampled = rarity.oversample_concat(corpus, table, args.fraction, args.factor)
        subset = rarity.select_rare_subset(corpus, table, args.fraction)
        selected = {id(p) for p in subset.pairs}
        for i, p in enumerate(corpus.pairs):
            bucket_of[i] = "selected" if id(p) in selected else "rest"
        dump("oversampled", resampled.pairs)

    sidecar = f"{prefix}.rarity.tsv"
    with open(sidecar, "w", encoding="utf-8") as fh:
        for s in scores:
            fh.write(f"{s.sentence_index}\t{s.value:.6f}\t{bucket_of[s.sentence_index]}\n")
    write_manifest(sidecar, "rarity-split", args, [src_path, tgt_path, args.freq])
    return 0


def cmd_gen_zipf(args) -> int:
    lo, hi = _parse_int_pair(args.length_range)
    corpus, vocab, mapping = generate_zipf_task(
        args.vocab_size, args.exponent, args.pairs, (lo, hi), seed=args.seed, mapping=args.mapping
    )
    prefix = Path(args.out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    write_sentences(
        [decode_sentence(p.source, vocab) for p in corpus.pairs], f"{prefix}.src"
    )
    write_sentences(
        [decode_sentence(p.target, vocab) for p in corpus.pairs], f"{prefix}.tgt"
    )
    with open(f"{prefix}.mapping.tsv", "w", encoding="utf-8") as fh:
        for src_id in sorted(mapping):
            fh.write(f"{vocab.token(src_id)}\t{vocab.token(mapping[src_id])}\n")
    write_manifest(f"{prefix}.src", "gen-zipf", args, [])
    return 0


def _parse_config_file(path: str | Path) -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").split("\n"), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


_BOOL = {"true": True, "false": False, "1": True, "0": False, "yes": True, "no": False}


def _build_loss_config(section: dict[str, str], freq_table) -> LossConfig:
    weighting = section.get("weighting", "uniform")
    weight_table = None
    if weighting == "static":
        if "weights_path" not in section:
            raise ValueError("static weighting requires weights_path")
        weight_table = read_weight_tsv(section["weights_path"], table=freq_table)
    return LossConfig(
        weighting=weighting,
        weight_table=weight_table,
        focal_gamma=float(section.get("focal_gamma", 1.0)),
        focal_plus_one=_BOOL[section.get("focal_plus_one", "false")],
        label_smoothing=float(section.get("label_smoothing", 0.1)),
        entropy_alpha=float(section.get("entropy_alpha", 0.0)),
        entropy_full=_BOOL[section.get("entropy_full", "true")],
    )


def cmd_train(args) -> int:
    values = _parse_config_file(args.config)
    for key in ("source_path", "target_path"):
        if key not in values:
            raise ValueError(f"config is missing {key}")
    src_sentences = read_sentences(values["source_path"])
    tgt_sentences = read_sentences(values["target_path"])
    src_vocab = vocabulary_from_sentences(src_sentences)
    tgt_vocab = vocabulary_from_sentences(tgt_sentences)
    corpus = load_corpus(
        values["source_path"], values["target_path"], src_vocab, tgt_vocab
    )
    freq_table = count_frequencies(corpus)

    sections: dict[int, dict[str, str]] = {}
    for key, value in values.items():
        if key.startswith("phase") and "." in key:
            head, field = key.split(".", 1)
            index = int(head[5:])
            sections.setdefault(index, {})[field] = value
    if not sections:
        raise ValueError("config defines no phase sections (phase1.<field> = value)")

    schedule = []
    for index in sorted(sections):
        section = sections[index]
        schedule.append(
            TrainConfig(
                phase=section.get("phase", "pretrain"),
                loss=_build_loss_config(section, freq_table),
                learning_rate=float(section.get("learning_rate", 1.0)),
                max_steps=int(section.get("max_steps", 1000)),
                batch_size=int(section.get("batch_size", 64)),
                seed=int(section.get("seed", DEFAULT_SEED)),
                finetune_lr_ratio=float(section.get("finetune_lr_ratio", 0.1)),
                data_mode=section.get("data_mode", "full"),
                data_fraction=float(section.get("data_fraction", 1.0 / 3.0)),
                oversample_factor=int(section.get("oversample_factor", 3)),
            )
        )

    initial = None
    if "initial_ckpt" in values:
        initial, _, _ = load_checkpoint(values["initial_ckpt"])

    def checkpoint_callback(phase_index, params):
        save_checkpoint(params, src_vocab, tgt_vocab, f"{args.out}.phase{phase_index + 1}")

    try:
        params, log = train(
            corpus,
            schedule,
            dim=int(values.get("dim", 32)),
            hidden=int(values.get("hidden", 64)),
            initial=initial,
            checkpoint_callback=checkpoint_callback,
        )
    except TrainingDiverged as exc:
        save_checkpoint(exc.last_good, src_vocab, tgt_vocab, f"{args.out}.diverged")
        raise ValueError(f"{exc} (last good checkpoint written to {args.out}.diverged)") from exc
    for entry in log:
        print(
            f"phase {entry.phase_index + 1} ({entry.phase}) epoch {entry.epoch}: "
            f"loss {entry.mean_loss:.6f} steps {entry.steps_completed}"
        )
    save_checkpoint(params, src_vocab, tgt_vocab, args.out)
    inputs = [values["source_path"], values["target_path"], args.config]
    write_manifest(args.out, "train", args, inputs)
    return 0


def cmd_translate(args) -> int:
    params, src_vocab, tgt_vocab = load_checkpoint(args.ckpt)
    sentences = read_sentences(args.input)
    config_values = _parse_config_file(args.config) if args.config else {}
    decode_cfg = DecodeConfig(
        mode="greedy" if args.greedy else config_values.get("decode.mode", "beam"),
        beam_size=args.beam if args.beam else int(config_values.get("decode.beam_size", 4)),
        length_penalty=(
            args.lenpen if args.lenpen is not None
            else float(config_values.get("decode.length_penalty", 0.6))
        ),
        max_length=(
            args.max_length if args.max_length
            else int(config_values.get("decode.max_length", 50))
        ),
    )
    sources = [encode_sentence(s, src_vocab) for s in sentences]
    outputs = decode_corpus(params, sources, decode_cfg, threads=args.threads)
    write_sentences([decode_sentence(o, tgt_vocab) for o in outputs], args.out)
    write_manifest(args.out, "translate", args, [args.ckpt, args.input])
    return 0


def cmd_bleu(args) -> int:
    hyps = read_sentences(args.hyp, allow_empty=True)
    refs = read_sentences(args.ref, allow_empty=True)
    print(metrics.bleu4(hyps, refs).format_line())
    return 0


def cmd_diversity(args) -> int:
    sentences = read_sentences(args.input)
    if args.level == "word":
        sentences = [bpe.detokenize(s) for s in sentences]
    tokens = [t for s in sentences for t in s]
    report = metrics.diversity_report(tokens, args.hdd_sample, args.mtld_threshold)
    print(f"tokens={len(tokens)} types={len(set(tokens))}")
    print(f"ttr={report.ttr:.6f} hdd={report.hdd:.6f} mtld={report.mtld:.6f}")
    return 0


def cmd_dist_report(args) -> int:
    table = read_frequency_tsv(args.freq)
    texts = {}
    for item in args.texts.split(","):
        if "=" not in item:
            raise ValueError(f"expected name=path, got {item!r}")
        name, path = item.split("=", 1)
        texts[name] = [t for s in read_sentences(path, allow_empty=True) for t in s]
    report = metrics.distribution_report(texts, table)
    metrics.write_distribution_csv(report, args.out)
    from .plots import plot_distribution_report

    plot_distribution_report(report, Path(args.out).with_suffix(".png"))
    inputs = [args.freq] + [item.split("=", 1)[1] for item in args.texts.split(",")]
    write_manifest(args.out, "dist-report", args, inputs)
    return 0


def cmd_reproduce_fixture(args) -> int:
    from .fixture import FixtureConfig, format_report_table, run_comparison, write_fixture_artifacts

    lo, hi = _parse_int_pair(args.length_range)
    config = FixtureConfig(
        vocab_size=args.vocab_size,
        zipf_exponent=args.exponent,
        train_pairs=args.pairs,
        test_pairs=args.test_pairs,
        length_range=(lo, hi),
        seed=args.seed,
        dim=args.dim,
        hidden=args.hidden,
        learning_rate=args.learning_rate,
        pretrain_steps=args.pretrain_steps,
        finetune_steps=args.finetune_steps,
        finetune_lr_ratio=args.finetune_lr_ratio,
        batch_size=args.batch_size,
        exponential_temperature=args.exp_temperature,
        chi_square_temperature=args.chi_temperature,
        threads=args.threads,
    )
    result = run_comparison(config)
    report_path = write_fixture_artifacts(result, args.out)
    print(format_report_table(result))
    for name, crit in sorted(result.criteria.items()):
        print(
            f"criteria[{name}]: min_ok={str(crit.min_ok).lower()} "
            f"expectation_ok={str(crit.expectation_ok).lower()} delta={crit.delta:.6f}"
        )
    write_manifest(report_path, "reproduce-fixture", args, [])
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tokweight",
        description="Frequency-adaptive token weighting toolkit for small seq2seq training.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="<command>")

    p = sub.add_parser("freq-analyze", help="count token frequencies and rank intervals")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--intervals", default="", help="rank percentiles, e.g. 10,30,50,70,100")
    p.add_argument("--intervals-out", default="")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_freq_analyze)

    p = sub.add_parser("bpe-learn", help="learn byte-pair merges from a corpus")
    p.add_argument("--input", required=True)
    p.add_argument("--merges", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bpe_learn)

    p = sub.add_parser("bpe-apply", help="apply learned merges to a corpus")
    p.add_argument("--merges", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_bpe_apply)

    p = sub.add_parser("weights", help="build a weight table from a frequency table")
    p.add_argument("--freq", required=True)
    p.add_argument("--form", required=True, choices=["uniform", "exponential", "chi_square", "linear"])
    p.add_argument("--T", dest="temperature", type=float, default=1.0)
    p.add_argument("--A", dest="amplitude", type=float, default=0.0,
                   help="override the calibrated amplitude")
    p.add_argument("--raw-counts", action="store_true", help="skip median normalization")
    p.add_argument("--delta-max", type=float, default=DEFAULT_DELTA_MAX)
    p.add_argument("--out", required=True)
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=cmd_weights)

    p = sub.add_parser("validate-criteria", help="check the two weight-design criteria")
    p.add_argument("--weights", required=True)
    p.add_argument("--freq", required=True)
    p.add_argument("--delta-max", type=float, default=DEFAULT_DELTA_MAX)
    p.set_defaults(func=cmd_validate_criteria)

    p = sub.add_parser("search-T", help="evaluate criteria over a temperature grid")
    p.add_argument("--freq", required=True)
    p.add_argument("--form", required=True, choices=["exponential", "chi_square"])
    p.add_argument("--grid", required=True, help="comma-separated temperatures")
    p.add_argument("--delta-max", type=float, default=DEFAULT_DELTA_MAX)
    p.add_argument("--out", default="")
    p.set_defaults(func=cmd_search_t)

    p = sub.add_parser("rarity-split", help="rarity scoring and data selection")
    p.add_argument("--input", required=True, help="source,target file pair")
    p.add_argument("--freq", required=True)
    p.add_argument("--mode", required=True, choices=["thirds", "subset", "oversample"])
    p.add_argument("--fraction", type=float, default=1.0 / 3.0)
    p.add_argument("--factor", type=int, default=3)
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_rarity_split)

    p = sub.add_parser("gen-zipf", help="generate a synthetic Zipf translation task")
    p.add_argument("--vocab-size", type=int, default=200)
    p.add_argument("--exponent", type=float, default=1.0)
    p.add_argument("--pairs", type=int, default=10000)
    p.add_argument("--length-range", default="2,6")
    p.add_argument("--mapping", default="permutation", choices=["permutation", "identity"])
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_gen_zipf)

    p = sub.add_parser("train", help="train the reference model from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("translate", help="decode a corpus with a trained checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default="", help="optional config file with decode.* keys")
    p.add_argument("--beam", type=int, default=0, help="beam size (default 4)")
    p.add_argument("--lenpen", type=float, default=None, help="length penalty (default 0.6)")
    p.add_argument("--max-length", type=int, default=0)
    p.add_argument("--greedy", action="store_true")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("bleu", help="corpus-level 4-gram BLEU")
    p.add_argument("--hyp", required=True)
    p.add_argument("--ref", required=True)
    p.set_defaults(func=cmd_bleu)

    p = sub.add_parser("diversity", help="TTR, HD-D, and MTLD of a tokenized file")
    p.add_argument("--input", required=True)
    p.add_argument("--level", default="subword", choices=["subword", "word"])
    p.add_argument("--hdd-sample", type=int, default=metrics.HDD_DEFAULT_SAMPLE_SIZE)
    p.add_argument("--mtld-threshold", type=float, default=metrics.MTLD_DEFAULT_THRESHOLD)
    p.set_defaults(func=cmd_diversity)

    p = sub.add_parser("dist-report", help="token counts per training-frequency decile")
    p.add_argument("--freq", required=True)
    p.add_argument("--texts", required=True, help="name=path[,name=path...]")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_dist_report)

    p = sub.add_parser("reproduce-fixture", help="run the end-to-end desk-scale experiment")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--vocab-size", type=int, default=200)
    p.add_argument("--exponent", type=float, default=1.0)
    p.add_argument("--pairs", type=int, default=10000)
    p.add_argument("--test-pairs", type=int, default=500)
    p.add_argument("--length-range", default="2,6")
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--hidden", type=int, default=160)
    p.add_argument("--learning-rate", type=float, default=2.0)
    p.add_argument("--pretrain-steps", type=int, default=1500)
    p.add_argument("--finetune-steps", type=int, default=1500)
    p.add_argument("--finetune-lr-ratio", type=float, default=0.3)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--exp-temperature", type=float, default=1.0)
    p.add_argument("--chi-temperature", type=float, default=5.0)
    p.set_defaults(func=cmd_reproduce_fixture)

    return parser


def dispatch(argv) -> int:
    """Run one subcommand; returns the process exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    if not hasattr(args, "func"):
        parser.print_usage(sys.stderr)
        return 1
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError, CorpusFormatError, FixtureStageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc!r}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
