"""Shared test utilities: instrumented evaluators, rank statistics, oracles."""

from __future__ import annotations

import hashlib
import json

import numpy as np

from bitpareto import Evaluator, LayerSpec, SearchSpace


def make_space(n_layers=8, params=100, choices=(2, 3, 4), frozen=None, group=128):
    layers = [
        LayerSpec(f"blk.{i}.mod", params if np.isscalar(params) else params[i], tuple(choices))
        for i in range(n_layers)
    ]
    from bitpareto import QuantOverhead

    return SearchSpace(layers, QuantOverhead(group_size=group), frozen or {})


class CountingEvaluator(Evaluator):
    """Wraps another evaluator and counts every scored config."""

    def __init__(self, inner: Evaluator):
        self.inner = inner
        self.calls = 0
        self.batches = 0

    def evaluate_batch(self, configs):
        self.calls += len(configs)
        self.batches += 1
        return self.inner.evaluate_batch(configs)


class ConstantEvaluator(Evaluator):
    def __init__(self, value: float):
        self.value = value

    def evaluate_batch(self, configs):
        return [self.value] * len(configs)


class HashEvaluator(Evaluator):
    """Deterministic pseudo-random scores, optionally anti-correlated with bits.

    With slope != 0 the score trends with the summed bits, which keeps
    genetic populations spread across the whole trade-off curve.
    """

    def __init__(self, seed=0, slope=0.0, jitter=1.0):
        self.seed = seed
        self.slope = slope
        self.jitter = jitter

    def evaluate_batch(self, configs):
        out = []
        for c in configs:
            payload = json.dumps([self.seed, list(c.bits)]).encode()
            h = hashlib.blake2b(payload, digest_size=8).digest()
            u = int.from_bytes(h, "big") / 2**64
            out.append(self.slope * sum(c.bits) + self.jitter * u)
        return out


def spearman(a, b) -> float:
    """Spearman rank correlation with average ranks for ties."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)

    def ranks(x):
        order = np.argsort(x, kind="stable")
        r = np.empty(len(x))
        r[order] = np.arange(len(x), dtype=float)
        # average ranks over exact ties
        vals, inv, counts = np.unique(x, return_inverse=True, return_counts=True)
        sums = np.zeros(len(vals))
        np.add.at(sums, inv, r)
        return sums[inv] / counts[inv]

    ra, rb = ranks(a), ranks(b)
    ra -= ra.mean()
    rb -= rb.mean()
    denom = np.sqrt((ra**2).sum() * (rb**2).sum())
    return float((ra * rb).sum() / denom)


def brute_force_front_indices(scores, bits):
    """O(N^2) non-dominated filter, the oracle for fast front computation."""
    scores = np.asarray(scores, dtype=float)
    bits = np.asarray(bits, dtype=float)
    n = len(scores)
    keep = []
    for i in range(n):
        dominated = False
        for j in range(n):
            if j == i:
                continue
            if (
                scores[j] <= scores[i]
                and bits[j] <= bits[i]
                and (scores[j] < scores[i] or bits[j] < bits[i])
            ):
                dominated = True
                break
        if not dominated:
            keep.append(i)
    return keep


def grid_hypervolume(points, reference, resolution=2000):
    """Rectangle-union area by dense grid quadrature (independent oracle)."""
    ref_s, ref_b = reference
    pts = [(float(s), float(b)) for s, b in points]
    lo_s = min(s for s, _ in pts)
    lo_b = min(b for _, b in pts)
    xs = np.linspace(lo_s, ref_s, resolution, endpoint=False) + (ref_s - lo_s) / (
        2 * resolution
    )
    ys = np.linspace(lo_b, ref_b, resolution, endpoint=False) + (ref_b - lo_b) / (
        2 * resolution
    )
    covered = np.zeros((resolution, resolution), dtype=bool)
    for s, b in pts:
        covered |= (xs[:, None] >= s) & (ys[None, :] >= b)
    cell = ((ref_s - lo_s) / resolution) * ((ref_b - lo_b) / resolution)
    return covered.sum() * cell
