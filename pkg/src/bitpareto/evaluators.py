"""Evaluator contract plus in-process synthetic evaluators.

An evaluator scores a batch of candidate configs; lower scores are better.
Scores must be deterministic for a fixed evaluator instance, since the
archive assumes each config has one true value.  The synthetic models here
are desk-scale stand-ins for a real quantized-model scorer: a separable
per-layer penalty, optionally with pairwise interactions, and optional
seeded observation noise that is a pure function of the config.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .space import BitConfig


class EvaluatorError(RuntimeError):
    """Raised when an evaluator cannot produce scores for a batch."""


class Evaluator:
    """Behavioral contract: evaluate_batch returns one finite score per config."""

    def evaluate_batch(self, configs: Sequence[BitConfig]) -> list[float]:
        raise NotImplementedError

    def evaluate(self, config: BitConfig) -> float:
        return self.evaluate_batch([config])[0]


def _config_seed(bits: tuple[int, ...], salt: int) -> int:
    """Stable 64-bit seed derived from a bits vector, for repeatable noise."""
    payload = json.dumps([salt, list(bits)]).encode()
    return int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), "big")


@dataclass
class SyntheticModel:
    """Parameters of a synthetic quality landscape over bit configs.

    penalty maps each bit-width to a positive cost, strictly decreasing in
    the bit-width; weights scale each layer's contribution.  The interaction
    matrix (if any) adds symmetric pairwise terms.  noise is the standard
    deviation of a Gaussian perturbation seeded per config, so repeated
    evaluation of the same config returns the same score.
    """

    kind: str  # "separable" or "interaction"
    weights: tuple[float, ...]
    penalty: dict[int, float]
    interaction: np.ndarray | None = None
    noise: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("separable", "interaction"):
            raise ValueError(f"unknown synthetic kind {self.kind!r}")
        self.weights = tuple(float(w) for w in self.weights)
        if not all(np.isfinite(self.weights)):
            raise ValueError("weights must be finite")
        self.penalty = {int(b): float(p) for b, p in self.penalty.items()}
        items = sorted(self.penalty.items())
        for (b1, p1), (b2, p2) in zip(items, items[1:]):
            if p2 >= p1:
                raise ValueError("penalty must be strictly decreasing in bit-width")
        if any(p < 0 for _, p in items):
            raise ValueError("penalties must be non-negative")
        if self.kind == "interaction":
            m = np.asarray(self.interaction, dtype=float)
            if m.shape != (len(self.weights), len(self.weights)):
                raise ValueError("interaction matrix shape mismatch")
            if not np.allclose(m, m.T):
                raise ValueError("interaction matrix must be symmetric")
            if (m < 0).any():
                raise ValueError("interaction entries must be non-negative")
            self.interaction = m
        if self.noise < 0:
            raise ValueError("noise must be >= 0")

    @classmethod
    def from_dict(cls, data: Mapping) -> "SyntheticModel":
        return cls(
            kind=data.get("kind", "separable"),
            weights=tuple(data["weights"]),
            penalty={int(k): float(v) for k, v in data["penalty"].items()},
            interaction=data.get("interaction"),
            noise=float(data.get("noise", 0.0)),
            seed=int(data.get("seed", 0)),
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "SyntheticModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


class SyntheticEvaluator(Evaluator):
    """Scores configs against a :class:`SyntheticModel`."""

    def __init__(self, model: SyntheticModel):
        self.model = model
        self._weights = np.asarray(model.weights, dtype=float)

    def _penalties(self, config: BitConfig) -> np.ndarray:
        try:
            return np.array([self.model.penalty[b] for b in config.bits])
        except KeyError as exc:
            raise EvaluatorError(
                f"no penalty defined for bit-width {exc.args[0]}"
            ) from None

    def _noise(self, config: BitConfig) -> float:
        if self.model.noise == 0.0:
            return 0.0
        rng = np.random.default_rng(_config_seed(config.bits, self.model.seed))
        return float(rng.normal(0.0, self.model.noise))

    def evaluate_batch(self, configs: Sequence[BitConfig]) -> list[float]:
        return [self._score(c) for c in configs]

    def _score(self, config: BitConfig) -> float:
        raise NotImplementedError


class SeparableEvaluator(SyntheticEvaluator):
    """score = sum_i weight_i * penalty(bits_i), plus seeded noise."""

    def __init__(self, model: SyntheticModel):
        if model.kind != "separable":
            raise ValueError("SeparableEvaluator needs a separable model")
        super().__init__(model)

    def _score(self, config: BitConfig) -> float:
        if len(config.bits) != len(self._weights):
            raise EvaluatorError(
                f"config length {len(config.bits)} != model size {len(self._weights)}"
            )
        p = self._penalties(config)
        return float(np.dot(self._weights, p)) + self._noise(config)


class InteractionEvaluator(SyntheticEvaluator):
    """Separable term plus sum_{i<j} M_ij * penalty(bits_i) * penalty(bits_j)."""

    def __init__(self, model: SyntheticModel):
        if model.kind != "interaction":
            raise ValueError("InteractionEvaluator needs an interaction model")
        super().__init__(model)

    def _score(self, config: BitConfig) -> float:
        if len(config.bits) != len(self._weights):
            raise EvaluatorError(
                f"config length {len(config.bits)} != model size {len(self._weights)}"
            )
        p = self._penalties(config)
        separable = float(np.dot(self._weights, p))
        m = self.model.interaction
        # Full quadratic form counts each (i, j) pair twice; halve it and
        # drop the diagonal (which is zero by convention for i < j sums).
        pairwise = 0.5 * (float(p @ m @ p) - float(np.dot(np.diag(m), p * p)))
        return separable + pairwise + self._noise(config)


def separable_eval(model: SyntheticModel, config: BitConfig) -> float:
    """Convenience one-off scoring with a separable model."""
    return SeparableEvaluator(model).evaluate(config)


def interaction_eval(model: SyntheticModel, config: BitConfig) -> float:
    """Convenience one-off scoring with an interaction model."""
    return InteractionEvaluator(model).evaluate(config)


def make_synthetic_evaluator(model: SyntheticModel) -> SyntheticEvaluator:
    if model.kind == "separable":
        return SeparableEvaluator(model)
    return InteractionEvaluator(model)


class TransformedEvaluator(Evaluator):
    """Applies a scalar transform to another evaluator's scores.

    Used to exercise the front-coincidence property: a strictly increasing
    transform must leave Pareto fronts unchanged as config sets.
    """

    def __init__(self, base: Evaluator, transform: Callable[[float], float]):
        self.base = base
        self.transform = transform

    def evaluate_batch(self, configs: Sequence[BitConfig]) -> list[float]:
        return [self.transform(s) for s in self.base.evaluate_batch(configs)]


class PooledEvaluator(Evaluator):
    """Fans a batch out across several evaluator instances in parallel.

    Results are reassembled in input order, so determinism is preserved as
    long as each worker is itself deterministic.  Workers must be safe to
    call concurrently (synthetic evaluators are pure; external ones each own
    a private process).
    """

    def __init__(self, workers: Sequence[Evaluator]):
        if not workers:
            raise ValueError("need at least one worker")
        self.workers = list(workers)

    def evaluate_batch(self, configs: Sequence[BitConfig]) -> list[float]:
        n = len(self.workers)
        if n == 1 or len(configs) <= 1:
            return self.workers[0].evaluate_batch(configs)
        chunks = [list(configs[i::n]) for i in range(n)]
        with ThreadPoolExecutor(max_workers=n) as pool:
            results = list(
                pool.map(lambda wc: wc[0].evaluate_batch(wc[1]), zip(self.workers, chunks))
            )
        out: list[float] = [0.0] * len(configs)
        for offset, scores in enumerate(results):
            for j, s in enumerate(scores):
                out[offset + j * n] = s
        return out

    def close(self):
        for w in self.workers:
            close = getattr(w, "close", None)
            if close:
                close()
