"""Toy quantization-degradation model backing the reference evaluator.

The model holds fixed reference logits for a small calibration set and one
fixed perturbation direction per layer.  A bit configuration perturbs the
reference logits by each layer's direction scaled by that layer's
(bit-width dependent) degradation factor; the quality score is the mean
Jensen-Shannon divergence between the reference and perturbed logits over
calibration tokens.  Everything is a pure function of (model params,
config), so repeated evaluation of one config always returns one score.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
import numpy as np


@dataclass
class ToyModelParams:
    """Serializable knobs; see params.example.json for the file format."""

    vocab_size: int = 64
    num_tokens: int = 32
    seed: int = 0
    bit_scale: dict[int, float] = field(
        default_factory=lambda: {2: 1.0, 3: 0.3, 4: 0.05}
    )
    layer_scale: list[float] | None = None
    config_jitter: float = 0.0

    def __post_init__(self):
        if self.vocab_size < 2:
            raise ValueError("vocab_size must be >= 2")
        if self.num_tokens < 1:
            raise ValueError("num_tokens must be >= 1")
        self.bit_scale = {int(b): float(s) for b, s in self.bit_scale.items()}
        ordered = sorted(self.bit_scale.items())
        for (_, lo_scale), (_, hi_scale) in zip(ordered, ordered[1:]):
            if hi_scale >= lo_scale:
                raise ValueError("bit_scale must be strictly decreasing in bit-width")
        if any(s < 0 for s in self.bit_scale.values()):
            raise ValueError("bit_scale entries must be >= 0")
        if self.config_jitter < 0:
            raise ValueError("config_jitter must be >= 0")

    @classmethod
    def from_file(cls, path: str | Path) -> "ToyModelParams":
        data = json.loads(Path(path).read_text())
        return cls(
            vocab_size=int(data.get("vocab_size", 64)),
            num_tokens=int(data.get("num_tokens", 32)),
            seed=int(data.get("seed", 0)),
            bit_scale={int(k): float(v) for k, v in data.get(
                "bit_scale", {"2": 1.0, "3": 0.3, "4": 0.05}
            ).items()},
            layer_scale=(
                [float(v) for v in data["layer_scale"]]
                if data.get("layer_scale") is not None
                else None
            ),
            config_jitter=float(data.get("config_jitter", 0.0)),
        )


def _softmax_rows(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def mean_jsd(ref_logits: np.ndarray, other_logits: np.ndarray) -> float:
    """Mean Jensen-Shannon divergence across logit rows, in nats."""
    p = _softmax_rows(ref_logits)
    q = _softmax_rows(other_logits)
    m = 0.5 * (p + q)

    def kl_rows(a, b):
        ratio = np.zeros_like(a)
        mask = a > 0
        ratio[mask] = a[mask] * np.log(a[mask] / b[mask])
        return ratio.sum(axis=1)

    per_row = 0.5 * (kl_rows(p, m) + kl_rows(q, m))
    return float(np.maximum(per_row, 0.0).mean())


def _config_seed(bits: tuple[int, ...], salt: int) -> int:
    payload = json.dumps([salt, list(bits)]).encode()
    return int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), "big")


class ToyModel:
    """Assembled model for a specific layer count.

    Each layer owns a disjoint block of calibration tokens (token t belongs
    to layer t mod L) and one fixed perturbation direction over that block,
    both derived from the model seed.  Raising a layer's bit-width shrinks
    the perturbation of its own tokens and touches nothing else, so the
    mean JSD never increases under a single-layer promotion.
    """

    def __init__(self, params: ToyModelParams, n_layers: int, choices: set[int]):
        missing = sorted(b for b in choices if b not in params.bit_scale)
        if missing:
            raise ValueError(f"bit_scale has no entry for bit-widths {missing}")
        if params.layer_scale is not None and len(params.layer_scale) != n_layers:
            raise ValueError(
                f"layer_scale has {len(params.layer_scale)} entries, "
                f"space has {n_layers} layers"
            )
        if params.num_tokens < n_layers:
            raise ValueError(
                f"num_tokens ({params.num_tokens}) must be >= the layer count "
                f"({n_layers}) so every layer owns at least one token"
            )
        self.params = params
        self.n_layers = n_layers
        rng = np.random.default_rng(params.seed)
        self.reference = rng.normal(
            0.0, 1.0, size=(params.num_tokens, params.vocab_size)
        )
        self.directions = rng.normal(
            0.0, 1.0, size=(params.num_tokens, params.vocab_size)
        ) / np.sqrt(params.vocab_size)
        self.token_owner = np.arange(params.num_tokens) % n_layers
        if params.layer_scale is not None:
            self.layer_scale = np.asarray(params.layer_scale, dtype=float)
        else:
            self.layer_scale = rng.uniform(0.5, 1.5, size=n_layers)

    def perturbed_logits(self, bits: tuple[int, ...]) -> np.ndarray:
        if len(bits) != self.n_layers:
            raise ValueError(f"config has {len(bits)} layers, model has {self.n_layers}")
        scales = self.layer_scale * np.array(
            [self.params.bit_scale[int(b)] for b in bits]
        )
        per_token = scales[self.token_owner]
        perturbed = self.reference + per_token[:, None] * self.directions
        if self.params.config_jitter > 0.0:
            jitter_rng = np.random.default_rng(
                _config_seed(tuple(int(b) for b in bits), self.params.seed)
            )
            perturbed = perturbed + jitter_rng.normal(
                0.0, self.params.config_jitter, size=perturbed.shape
            )
        return perturbed

    def score(self, bits) -> float:
        bits = tuple(int(b) for b in bits)
        return mean_jsd(self.reference, self.perturbed_logits(bits))
