"""Frequency-adaptive token weight functions and their design criteria.

Two weighting forms map a training-set count to a loss weight:

* exponential:  ``w(c) = A * exp(-T * c) + 1``, strictly decreasing,
  largest for the rarest tokens;
* chi-square:   ``w(c) = A * c^2 * exp(-T * c) + 1``, equal to 1 at
  ``c = 0``, peaked at ``c = 2/T``, so both the most frequent and the
  extremely rare (noise-prone) tokens keep small weights.

``c`` is the raw count divided by the median type count (the default;
raw counts are kept behind a flag for ablation).  Amplitudes are
calibrated so each form's weights span exactly [1, e].

Two criteria make a weight table safe to train with: every weight must
be at least 1, and the corpus-weighted mean of the weights must stay in
[1, 1 + delta_max] for a small delta_max.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

from .corpus import FrequencyTable, Vocabulary

WEIGHT_FORMS = ("uniform", "exponential", "chi_square", "linear")

#: Exponential amplitude putting w(0) at e exactly.
AMPLITUDE_EXPONENTIAL = math.e - 1.0

#: Default bound on the weight-expectation excess delta.
DEFAULT_DELTA_MAX = 0.2

#: Tolerance used by the minimum-weight criterion.
MIN_WEIGHT_TOLERANCE = 1e-12


@dataclass(frozen=True)
class WeightScheme:
    """Configuration selecting a weighting form and its hyperparameters."""

    form: str
    amplitude: float = AMPLITUDE_EXPONENTIAL
    temperature: float = 1.0
    normalize_by_median: bool = True

    def __post_init__(self):
        if self.form not in WEIGHT_FORMS:
            raise ValueError(f"unknown weighting form {self.form!r}")
        if self.form in ("exponential", "chi_square"):
            if self.amplitude <= 0:
                raise ValueError("amplitude must be positive")
            if self.temperature <= 0:
                raise ValueError("temperature must be positive")


@dataclass(frozen=True)
class WeightTable:
    """Per-type loss weights plus the corpus-weighted mean that produced them.

    ``weights`` holds one entry per vocabulary id, reserved ids included.
    Reserved and unseen types get weight 1 and are excluded from the
    expectation, which ranges over corpus occurrences of observed types.
    """

    weights: dict[int, float]
    scheme: WeightScheme
    expectation: float
    vocab: Vocabulary

    def weight(self, token_id: int) -> float:
        return self.weights[token_id]

    def as_vector(self):
        import numpy as np

        vec = np.ones(len(self.vocab), dtype=np.float64)
        for token_id, w in self.weights.items():
            vec[token_id] = w
        return vec


def _normalized_count(count: int, table: FrequencyTable, normalize_by_median: bool) -> float:
    if normalize_by_median:
        if table.median <= 0:
            raise ValueError("median count must be positive")
        return count / table.median
    return float(count)


def weight_exponential(
    count: int,
    table: FrequencyTable,
    amplitude: float,
    temperature: float,
    normalize_by_median: bool = True,
) -> float:
    """Exponential weight ``A * exp(-T * c) + 1`` of a token count."""
    if amplitude <= 0 or temperature <= 0:
        raise ValueError("amplitude and temperature must be positive")
    c = _normalized_count(count, table, normalize_by_median)
    return amplitude * math.exp(-temperature * c) + 1.0


def weight_chisquare(
    count: int,
    table: FrequencyTable,
    amplitude: float,
    temperature: float,
    normalize_by_median: bool = True,
) -> float:
    """Chi-square-shaped weight ``A * c^2 * exp(-T * c) + 1`` of a token count."""
    if amplitude <= 0 or temperature <= 0:
        raise ValueError("amplitude and temperature must be positive")
    c = _normalized_count(count, table, normalize_by_median)
    return amplitude * c * c * math.exp(-temperature * c) + 1.0


def weight_linear_raw(count: int, max_count: int) -> float:
    """Raw linear weight ``-count/max_count + 1`` before mean normalization."""
    if max_count <= 0:
        raise ValueError("max_count must be positive")
    return -count / max_count + 1.0


def calibrate_amplitude(form: str, temperature: float) -> float:
    """Amplitude putting the form's maximum weight at e exactly.

    The exponential form peaks at count 0, so ``A = e - 1``.  The
    chi-square form peaks at ``c = 2/T`` where ``A c^2 exp(-T c)``
    equals ``4 A / (T^2 e^2)``; solving for a peak of ``e - 1`` gives
    ``A = (e - 1) T^2 e^2 / 4``.
    """
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    if form == "exponential":
        return AMPLITUDE_EXPONENTIAL
    if form == "chi_square":
        return AMPLITUDE_EXPONENTIAL * temperature * temperature * math.e * math.e / 4.0
    raise ValueError(f"no amplitude calibration for form {form!r}")


def _expectation(weights: dict[int, float], table: FrequencyTable) -> float:
    num = 0.0
    den = 0
    for token_id in table.rank:
        cnt = table.counts[token_id]
        num += cnt * weights[token_id]
        den += cnt
    return num / den


def build_weight_table(table: FrequencyTable, scheme: WeightScheme) -> WeightTable:
    """Evaluate a scheme over every vocabulary type.

    Unseen (count 0) and reserved types get weight 1: they never occur
    as training targets, so their weight multiplies nothing.  Per-token
    weight functions still evaluate count 0 on request; the table policy
    applies only here.
    """
    vocab = table.vocab
    weights = {i: 1.0 for i in range(len(vocab))}

    if scheme.form == "uniform":
        pass
    elif scheme.form == "linear":
        if not table.rank:
            raise ValueError("linear weighting needs at least one observed type")
        max_count = max(table.counts[i] for i in table.rank)
        raw = {i: weight_linear_raw(table.counts[i], max_count) for i in table.rank}
        mean_raw = sum(raw.values()) / len(raw)
        if mean_raw <= 0:
            raise ValueError("linear weights degenerate: all observed counts are equal")
        for i, w in raw.items():
            weights[i] = w / mean_raw
    else:
        fn = weight_exponential if scheme.form == "exponential" else weight_chisquare
        for i in table.rank:
            weights[i] = fn(
                table.counts[i],
                table,
                scheme.amplitude,
                scheme.temperature,
                scheme.normalize_by_median,
            )

    return WeightTable(
        weights=weights,
        scheme=scheme,
        expectation=_expectation(weights, table),
        vocab=vocab,
    )


@dataclass(frozen=True)
class CriteriaReport:
    min_ok: bool
    expectation_ok: bool
    delta: float


def validate_criteria(wt: WeightTable, delta_max: float = DEFAULT_DELTA_MAX) -> CriteriaReport:
    """Check the two weight-design criteria.

    ``min_ok`` holds when every weight is at least 1 (within 1e-12);
    ``delta`` is the weight expectation minus 1, and ``expectation_ok``
    holds when 0 <= delta <= delta_max.
    """
    min_ok = all(w >= 1.0 - MIN_WEIGHT_TOLERANCE for w in wt.weights.values())
    delta = wt.expectation - 1.0
    expectation_ok = -MIN_WEIGHT_TOLERANCE <= delta <= delta_max
    return CriteriaReport(min_ok=min_ok, expectation_ok=expectation_ok, delta=delta)


@dataclass(frozen=True)
class TemperatureCandidate:
    temperature: float
    delta: float
    passes: bool


def search_temperature(
    table: FrequencyTable,
    form: str,
    temperature_grid: Sequence[float],
    delta_max: float = DEFAULT_DELTA_MAX,
) -> list[TemperatureCandidate]:
    """Evaluate the criteria at each grid temperature with calibrated amplitude.

    Returns every candidate with its pass flag, sorted by delta ascending
    (ties by temperature).  Final selection among passing candidates is a
    downstream validation-score decision that this search does not make.
    """
    if not temperature_grid:
        raise ValueError("temperature grid must be non-empty")
    candidates = []
    for t in temperature_grid:
        scheme = WeightScheme(form=form, amplitude=calibrate_amplitude(form, t), temperature=t)
        report = validate_criteria(build_weight_table(table, scheme), delta_max)
        candidates.append(
            TemperatureCandidate(
                temperature=float(t),
                delta=report.delta,
                passes=report.min_ok and report.expectation_ok,
            )
        )
    return sorted(candidates, key=lambda c: (c.delta, c.temperature))


def write_weight_tsv(wt: WeightTable, path: str | Path) -> None:
    """Export ``token<TAB>weight`` rows (6 decimal places) for regular types.

    The header line records the scheme and the expectation at full
    precision.  Reserved ids are implicit (always weight 1).
    """
    s = wt.scheme
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            "# form={}\tA={!r}\tT={!r}\tnormalize_by_median={}\texpectation={!r}\n".format(
                s.form, s.amplitude, s.temperature,
                "true" if s.normalize_by_median else "false", wt.expectation,
            )
        )
        for token in wt.vocab.tokens:
            fh.write(f"{token}\t{wt.weights[wt.vocab.lookup(token)]:.6f}\n")


def read_weight_tsv(
    path: str | Path,
    table: FrequencyTable | None = None,
    vocab: Vocabulary | None = None,
) -> WeightTable:
    """Load a weight TSV written by :func:`write_weight_tsv`.

    With a frequency table the expectation is recomputed against it;
    otherwise the header value is trusted.  Without an explicit
    vocabulary one is built from the file rows in order, so writing the
    result back reproduces the input bytes.
    """
    header: dict[str, str] = {}
    rows: list[tuple[str, float]] = []
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().rstrip("\n")
        if not first.startswith("# "):
            raise ValueError(f"{path}: missing weight-table header")
        for item in first[2:].split("\t"):
            key, value = item.split("=", 1)
            header[key] = value
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            try:
                token, weight = line.split("\t")
                rows.append((token, float(weight)))
            except ValueError:
                raise ValueError(f"{path}:{lineno}: expected token<TAB>weight") from None

    scheme = WeightScheme(
        form=header["form"],
        amplitude=float(header["A"]),
        temperature=float(header["T"]),
        normalize_by_median=header["normalize_by_median"] == "true",
    )
    if table is not None:
        vocab = table.vocab
    elif vocab is None:
        vocab = Vocabulary(tok for tok, _ in rows)
    weights = {i: 1.0 for i in range(len(vocab))}
    for token, w in rows:
        token_id = vocab.lookup(token)
        if not Vocabulary.is_reserved(token_id):
            weights[token_id] = w
    expectation = _expectation(weights, table) if table is not None else float(header["expectation"])
    return WeightTable(weights=weights, scheme=scheme, expectation=expectation, vocab=vocab)
