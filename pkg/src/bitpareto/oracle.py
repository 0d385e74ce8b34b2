"""Ground truth for small spaces: exhaustive fronts, hypervolume, coincidence.

Exhaustive enumeration is the yardstick the search is graded against, and
the front-coincidence check validates that any strictly increasing
transform of the quality score leaves the Pareto front unchanged as a set
of configs (which is what justifies searching with a proxy score).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .engine import ArchiveEntry, ParetoFront
from .evaluators import Evaluator
from .moea import pareto_indices
from .space import BitConfig, SearchSpace, effective_bits_matrix


class SpaceTooLargeError(RuntimeError):
    """Enumeration refused: the space exceeds the configured cap."""


DEFAULT_CAP = 1_000_000


def iter_configs(space: SearchSpace):
    """Yield every config in deterministic lexicographic order."""
    free = space.free_indices
    choice_lists = [space.layers[i].choices for i in free]
    template = list(space.max_config().bits)
    for i, v in space.frozen.items():
        template[i] = v
    for combo in itertools.product(*choice_lists):
        bits = list(template)
        for i, b in zip(free, combo):
            bits[i] = b
        yield BitConfig(tuple(bits))


def enumerate_front(
    space: SearchSpace, evaluator: Evaluator, cap: int = DEFAULT_CAP, batch: int = 4096
) -> ParetoFront:
    """Evaluate every config and return the exact non-dominated set.

    Refuses (rather than silently sampling) when the space has more than
    `cap` configs.  The front is sorted ascending by effective bits.
    """
    count = space.config_count()
    if count > cap:
        raise SpaceTooLargeError(
            f"space has {count} configs, enumeration cap is {cap}"
        )
    configs: list[BitConfig] = []
    scores: list[float] = []
    pending: list[BitConfig] = []
    for cfg in iter_configs(space):
        pending.append(cfg)
        if len(pending) >= batch:
            scores.extend(evaluator.evaluate_batch(pending))
            configs.extend(pending)
            pending = []
    if pending:
        scores.extend(evaluator.evaluate_batch(pending))
        configs.extend(pending)

    bits_mat = np.asarray([c.bits for c in configs], dtype=np.int64)
    eff = effective_bits_matrix(bits_mat, space)
    score_arr = np.asarray(scores)
    front = [
        ArchiveEntry(config=configs[i], score=float(score_arr[i]), bits=float(eff[i]))
        for i in pareto_indices(score_arr, eff)
    ]
    front.sort(key=lambda e: (e.bits, e.score))
    return front


def hypervolume(front, reference: tuple[float, float]) -> float:
    """Area dominated by the front, bounded by the reference point.

    Computed as the union of the rectangles [score_i, ref_score] x
    [bits_i, ref_bits] via a single sorted sweep; dominated points add
    nothing.  Every point must dominate the reference.
    """
    ref_score, ref_bits = float(reference[0]), float(reference[1])
    pairs = [_point(p) for p in front]
    if not pairs:
        return 0.0
    for s, b in pairs:
        if s > ref_score or b > ref_bits or (s == ref_score and b == ref_bits):
            raise ValueError(
                f"front point ({s}, {b}) does not dominate reference "
                f"({ref_score}, {ref_bits})"
            )
    pairs.sort()
    area = 0.0
    ceiling = ref_bits
    for s, b in pairs:
        if b < ceiling:
            area += (ref_score - s) * (ceiling - b)
            ceiling = b
    return area


def _point(p) -> tuple[float, float]:
    if isinstance(p, ArchiveEntry):
        return p.score, p.bits
    if hasattr(p, "score"):
        return float(p.score), float(p.bits)
    return float(p[0]), float(p[1])


@dataclass
class FrontComparison:
    """Outcome of comparing a candidate front against a reference front."""

    hypervolume_ratio: float
    missing_points: list[ArchiveEntry] = field(default_factory=list)
    spurious_points: list[ArchiveEntry] = field(default_factory=list)
    reference_point: tuple[float, float] = (0.0, 0.0)

    @property
    def coincident(self) -> bool:
        return not self.missing_points and not self.spurious_points

    def to_dict(self) -> dict:
        return {
            "hypervolume_ratio": self.hypervolume_ratio,
            "coincident": self.coincident,
            "missing": [list(e.config.bits) for e in self.missing_points],
            "spurious": [list(e.config.bits) for e in self.spurious_points],
            "reference_point": list(self.reference_point),
        }


def default_reference(fronts, space: SearchSpace | None = None) -> tuple[float, float]:
    """Reference point covering every supplied front.

    Score: the largest observed score plus a 10% margin (margin taken on
    the magnitude, so negative scores still get a reference above them).
    Bits: the space's maximum effective bits plus 0.1 when a space is
    given, else the largest observed bits plus 0.1.
    """
    max_score = max((_point(p)[0] for f in fronts for p in f), default=0.0)
    score_ref = max_score + max(0.1 * abs(max_score), 1e-9)
    if space is not None:
        hi = max(l.max_choice for l in space.layers) + space.overhead.bits_per_weight
    else:
        hi = max((_point(p)[1] for f in fronts for p in f), default=0.0)
    return score_ref, hi + 0.1


def compare_fronts(
    reference_front: ParetoFront,
    candidate_front: ParetoFront,
    reference_point: tuple[float, float] | None = None,
    space: SearchSpace | None = None,
) -> FrontComparison:
    """Config-set difference plus the hypervolume ratio candidate / reference."""
    if reference_point is None:
        reference_point = default_reference(
            [reference_front, candidate_front], space
        )
    ref_keys = {e.config.bits for e in reference_front}
    cand_keys = {e.config.bits for e in candidate_front}
    missing = [e for e in reference_front if e.config.bits not in cand_keys]
    spurious = [e for e in candidate_front if e.config.bits not in ref_keys]
    hv_ref = hypervolume(reference_front, reference_point)
    hv_cand = hypervolume(candidate_front, reference_point)
    if hv_ref == 0.0:
        ratio = 1.0 if not missing and not spurious else 0.0
    else:
        ratio = hv_cand / hv_ref
    return FrontComparison(
        hypervolume_ratio=ratio,
        missing_points=missing,
        spurious_points=spurious,
        reference_point=reference_point,
    )


def verify_front_coincidence(
    space: SearchSpace,
    q1: Evaluator,
    q2: Evaluator,
    cap: int = DEFAULT_CAP,
) -> FrontComparison:
    """Exhaustively check whether two evaluators share one Pareto front.

    Both fronts are compared as config sets.  For the hypervolume ratio the
    q2 front is re-scored under q1, so the ratio is 1 exactly when the sets
    coincide.
    """
    front1 = enumerate_front(space, q1, cap=cap)
    front2 = enumerate_front(space, q2, cap=cap)
    rescored = [
        ArchiveEntry(config=e.config, score=s, bits=e.bits)
        for e, s in zip(front2, q1.evaluate_batch([e.config for e in front2]))
    ]
    ref_point = default_reference([front1, rescored], space)
    comparison = compare_fronts(front1, rescored, ref_point, space)
    return comparison
