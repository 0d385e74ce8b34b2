"""Quality-scoring primitives: softmax, KL divergence, and Jensen-Shannon divergence.

All divergences are in nats, which makes the JSD upper bound exactly ln 2.
Inputs are plain 1-D arrays (or sequences) of logits or probabilities.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

LN2 = float(np.log(2.0))


def _as_logits(z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.ndim != 1 or z.size < 2:
        raise ValueError("logit vector must be 1-D with at least 2 entries")
    if not np.isfinite(z).all():
        raise ValueError("logit vector contains non-finite entries")
    return z


def softmax(z) -> np.ndarray:
    """Exponential normalization with max-shift so large logits cannot overflow."""
    z = _as_logits(z)
    e = np.exp(z - z.max())
    return e / e.sum()


def kl_divergence(p, q) -> float:
    """KL(p || q) = sum_i p_i ln(p_i / q_i), with 0 ln 0 := 0 by continuity.

    Raises:
        ValueError: on length mismatch, or when some p_i > 0 has q_i = 0
            (the divergence is undefined there).
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {q.shape}")
    support = p > 0.0
    if np.any(q[support] <= 0.0):
        raise ValueError("divergence undefined: p has mass where q is zero")
    ps = p[support]
    return float(np.dot(ps, np.log(ps / q[support])))


def jsd(z, z_hat) -> float:
    """Jensen-Shannon divergence between two logit vectors, in nats.

    Both inputs are passed through softmax; the divergence is
    (KL(s||m) + KL(s_hat||m)) / 2 with m the equal-weight mixture.
    The result lies in [0, ln 2].
    """
    s = softmax(z)
    s_hat = softmax(z_hat)
    if s.shape != s_hat.shape:
        raise ValueError(f"length mismatch: {s.shape} vs {s_hat.shape}")
    m = 0.5 * (s + s_hat)
    value = 0.5 * (kl_divergence(s, m) + kl_divergence(s_hat, m))
    # Guard against tiny negative rounding on identical inputs.
    return max(0.0, value)


def quality_score(pairs: Iterable[tuple[Sequence, Sequence]]) -> float:
    """Mean JSD over (reference, degraded) logit pairs.  Lower is better."""
    total = 0.0
    count = 0
    for z, z_hat in pairs:
        total += jsd(z, z_hat)
        count += 1
    if count == 0:
        raise ValueError("quality_score needs at least one logit pair")
    return total / count
