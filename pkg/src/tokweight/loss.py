"""Cross-entropy variants with per-token weights and exact gradients.

The general per-position objective is

    L = (1/I) * sum_i w_i * [-(1-eps) * log p_i(t_i) - (eps/V) * sum_v log p_i(v)]
        + alpha * (1/I) * sum_i sum_v p_i(v) * log p_i(v)

where ``w_i`` is either a fixed per-type weight, a focal weight
``(1 - p_i(t_i))^gamma`` (optionally plus one) recomputed from live
probabilities, or 1.  ``eps`` is uniform-mixture label smoothing and the
``alpha`` term is a confidence penalty (the added quantity is the
negative entropy, so minimizing the total pushes entropy up).  Label
smoothing is disabled whenever the confidence penalty is active, since
the two have overlapping effects.

Gradients are analytic and treat the focal weight's dependence on the
probability exactly (product rule through ``(1-p)^gamma``).

Probabilities inside log terms are floored at :data:`PROBABILITY_FLOOR`;
each floored target probability increments a module-level counter
instead of crashing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .weighting import WeightTable

PROBABILITY_FLOOR = 1e-12

_clamp_count = 0


def clamp_count() -> int:
    """Number of target probabilities floored since the last reset."""
    return _clamp_count


def reset_clamp_count() -> None:
    global _clamp_count
    _clamp_count = 0


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - np.max(logits, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


@dataclass(frozen=True)
class StepDistribution:
    """Model output distribution at one target position."""

    logits: np.ndarray
    probabilities: np.ndarray
    target_id: int

    @classmethod
    def from_logits(cls, logits: np.ndarray, target_id: int) -> "StepDistribution":
        logits = np.asarray(logits, dtype=np.float64)
        return cls(logits=logits, probabilities=softmax(logits), target_id=int(target_id))


@dataclass(frozen=True)
class LossConfig:
    """Selects exactly one weighting mode plus optional regularizers.

    ``weighting`` is one of ``uniform``, ``static`` (requires
    ``weight_table``), or ``focal``.  ``label_smoothing`` defaults to 0.1
    and is treated as 0 whenever ``entropy_alpha`` is positive.
    ``entropy_full`` selects full-distribution negative entropy for the
    confidence penalty; the target-only variant is kept for fidelity
    experiments.
    """

    weighting: str = "uniform"
    weight_table: WeightTable | None = None
    focal_gamma: float = 1.0
    focal_plus_one: bool = False
    label_smoothing: float = 0.1
    entropy_alpha: float = 0.0
    entropy_full: bool = True

    def __post_init__(self):
        if self.weighting not in ("uniform", "static", "focal"):
            raise ValueError(f"unknown weighting mode {self.weighting!r}")
        if self.weighting == "static" and self.weight_table is None:
            raise ValueError("static weighting requires a weight table")
        if self.weighting == "focal" and self.focal_gamma <= 0:
            raise ValueError("focal gamma must be positive")
        if not 0.0 <= self.label_smoothing < 1.0:
            raise ValueError("label smoothing must lie in [0, 1)")
        if self.entropy_alpha < 0:
            raise ValueError("entropy penalty coefficient must be non-negative")

    @property
    def effective_label_smoothing(self) -> float:
        return 0.0 if self.entropy_alpha > 0 else self.label_smoothing


def focal_weight(p: float, gamma: float, plus_one: bool = False) -> float:
    """Focal weight ``(1-p)^gamma``, plus 1 when ``plus_one``."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    w = (1.0 - p) ** gamma
    return w + 1.0 if plus_one else w


def _stack_steps(steps) -> tuple[np.ndarray, np.ndarray]:
    if not steps:
        raise ValueError("need at least one step")
    logits = np.stack([np.asarray(s.logits, dtype=np.float64) for s in steps])
    targets = np.array([s.target_id for s in steps], dtype=np.intp)
    return logits, targets


def _weights_for(
    config: LossConfig,
    targets: np.ndarray,
    p_target: np.ndarray,
    weight_vector: np.ndarray | None,
) -> np.ndarray:
    if config.weighting == "uniform":
        return np.ones_like(p_target)
    if config.weighting == "static":
        if weight_vector is None:
            weight_vector = config.weight_table.as_vector()
        if targets.max(initial=-1) >= weight_vector.shape[0]:
            raise ValueError("target id missing from the weight table")
        return weight_vector[targets]
    w = (1.0 - p_target) ** config.focal_gamma
    return w + 1.0 if config.focal_plus_one else w


def loss_and_gradient(
    logits: np.ndarray,
    targets: np.ndarray,
    config: LossConfig,
    weight_vector: np.ndarray | None = None,
    want_gradient: bool = True,
) -> tuple[float, np.ndarray | None]:
    """Loss value and its gradient with respect to the logits.

    ``logits`` has shape (positions, vocabulary); ``targets`` holds one
    id per position.  This array kernel backs the step-sequence API and
    the trainer, so both share one accumulation order.
    """
    global _clamp_count
    logits = np.asarray(logits, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.intp)
    n, vsize = logits.shape
    idx = np.arange(n)

    eps = config.effective_label_smoothing
    alpha = config.entropy_alpha

    p = softmax(logits)
    p_t = p[idx, targets]
    _clamp_count += int(np.sum(p_t < PROBABILITY_FLOOR))
    logp_t = np.log(np.maximum(p_t, PROBABILITY_FLOOR))
    logp = None
    if eps > 0 or alpha > 0:
        logp = np.log(np.maximum(p, PROBABILITY_FLOOR))

    w = _weights_for(config, targets, p_t, weight_vector)

    # per-position loss core before weighting
    if eps > 0:
        core = -(1.0 - eps) * logp_t - (eps / vsize) * np.sum(logp, axis=1)
    else:
        core = -logp_t
    loss = float(np.dot(w, core) / n)

    if alpha > 0:
        if config.entropy_full:
            loss += alpha * float(np.sum(p * logp) / n)
        else:
            loss += alpha * float(np.dot(p_t, logp_t) / n)

    if not want_gradient:
        return loss, None

    # p_minus_onehot = p - one_hot(target), built in place
    p_minus_onehot = p.copy()
    p_minus_onehot[idx, targets] -= 1.0

    if eps > 0:
        # p - q with q the smoothed target mixture
        grad = w[:, None] * ((1.0 - eps) * p_minus_onehot + eps * (p - 1.0 / vsize))
    else:
        grad = w[:, None] * p_minus_onehot
    if config.weighting == "focal":
        dw = -config.focal_gamma * (1.0 - p_t) ** (config.focal_gamma - 1.0)
        grad -= (dw * core * p_t)[:, None] * p_minus_onehot
    if alpha > 0:
        if config.entropy_full:
            p_logp = p * logp
            grad += alpha * p * (logp - np.sum(p_logp, axis=1, keepdims=True))
        else:
            grad -= alpha * ((logp_t + 1.0) * p_t)[:, None] * p_minus_onehot
    grad /= n
    return loss, grad


def cross_entropy(steps) -> float:
    """Mean negative log-probability of the targets (natural log)."""
    logits, targets = _stack_steps(steps)
    plain = LossConfig(weighting="uniform", label_smoothing=0.0, entropy_alpha=0.0)
    value, _ = loss_and_gradient(logits, targets, plain, want_gradient=False)
    return value


def weighted_cross_entropy(steps, config: LossConfig) -> float:
    """Configured loss over a step sequence.

    With uniform weights, no smoothing, and no penalty this reduces to
    :func:`cross_entropy` through the same kernel, bit for bit.
    """
    logits, targets = _stack_steps(steps)
    value, _ = loss_and_gradient(logits, targets, config, want_gradient=False)
    return value


def entropy_penalty(steps) -> float:
    """Mean negative entropy ``(1/I) sum_i sum_v p(v) log p(v)``.

    Always <= 0, and 0 exactly when every position is one-hot
    (``0 * log 0`` is 0).  A training objective adds ``alpha`` times this
    value, so minimizing it penalizes low entropy.
    """
    if not steps:
        raise ValueError("need at least one step")
    total = 0.0
    for s in steps:
        p = np.asarray(s.probabilities, dtype=np.float64)
        total += float(np.sum(p * np.log(np.maximum(p, PROBABILITY_FLOOR))))
    return total / len(steps)


def loss_gradient(steps, config: LossConfig) -> np.ndarray:
    """Gradient of the configured loss with respect to the logits.

    Returns one row per step, same shape as the stacked logits.
    """
    logits, targets = _stack_steps(steps)
    _, grad = loss_and_gradient(logits, targets, config)
    return grad
