"""Per-layer sensitivity probing and outlier-based space pruning.

A layer's sensitivity is the evaluator score of the config that puts that
layer alone at its minimum bit-width while every other layer sits at its
maximum.  Layers whose sensitivity exceeds a multiple of the median are
outliers and get frozen at maximum precision, shrinking the search space
before the main loop runs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .evaluators import Evaluator, EvaluatorError
from .space import BitConfig, SearchSpace


@dataclass
class SensitivityProfile:
    """Raw per-layer probe scores plus the derived median."""

    scores: np.ndarray
    median: float
    threshold_multiplier: float = 2.0

    def outliers(self, multiplier: float | None = None) -> list[int]:
        """Indices of layers whose score strictly exceeds multiplier * median."""
        m = self.threshold_multiplier if multiplier is None else multiplier
        if m <= 0:
            raise ValueError("multiplier must be positive")
        return [int(i) for i in np.flatnonzero(self.scores > m * self.median)]


def _probe_config(space: SearchSpace, target: int) -> BitConfig:
    """All layers at max choice, `target` at min choice; frozen layers pinned."""
    bits = []
    for i, layer in enumerate(space.layers):
        if i in space.frozen:
            bits.append(space.frozen[i])
        elif i == target:
            bits.append(layer.min_choice)
        else:
            bits.append(layer.max_choice)
    return BitConfig(tuple(bits))


def measure_sensitivity(space: SearchSpace, evaluator: Evaluator) -> SensitivityProfile:
    """Probe every layer once (L evaluations for L layers).

    Probes use each layer's own min/max choices, so alphabets other than
    {2, 3, 4} work unchanged.  For a layer that is already frozen the probe
    cannot move it, so its score is just the pinned baseline.  Scores are
    the raw evaluator outputs; no baseline subtraction is applied.
    """
    probes = [_probe_config(space, i) for i in range(len(space.layers))]
    try:
        scores = evaluator.evaluate_batch(probes)
    except Exception:
        # Re-run one at a time to attribute the failure to a layer.
        for i, probe in enumerate(probes):
            try:
                evaluator.evaluate_batch([probe])
            except Exception as exc:
                raise EvaluatorError(
                    f"sensitivity probe failed at layer {i} "
                    f"({space.layers[i].name!r}): {exc}"
                ) from exc
        raise
    scores = np.asarray(scores, dtype=float)
    if not np.isfinite(scores).all():
        raise EvaluatorError("sensitivity probe returned non-finite scores")
    return SensitivityProfile(scores=scores, median=float(np.median(scores)))


def prune_space(
    space: SearchSpace, profile: SensitivityProfile, multiplier: float = 2.0
) -> tuple[SearchSpace, float]:
    """Freeze outlier layers at their maximum choice.

    Returns the pruned space and the excluded fraction (newly frozen layers
    over total layers).  Already-frozen layers are left untouched.  Pruning
    twice with the same profile is a no-op the second time.
    """
    if multiplier <= 0:
        raise ValueError("multiplier must be positive")
    if len(profile.scores) != len(space.layers):
        raise ValueError("profile does not match the space")
    extra = {
        i: space.layers[i].max_choice
        for i in profile.outliers(multiplier)
        if i not in space.frozen
    }
    fraction = len(extra) / len(space.layers)
    if not extra:
        return space, 0.0
    return space.with_frozen(extra), fraction


def profile_report(
    space: SearchSpace,
    profile: SensitivityProfile,
    multiplier: float = 2.0,
) -> dict:
    """JSON-ready summary of a profile at one threshold multiplier."""
    outliers = profile.outliers(multiplier)
    return {
        "scores": [float(s) for s in profile.scores],
        "median": profile.median,
        "frozen": [space.layers[i].name for i in outliers],
        "excluded_fraction": len(outliers) / len(space.layers),
    }
