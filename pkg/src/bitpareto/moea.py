"""Two-objective NSGA-II over bit configs.

Both objectives are minimized: quality loss (score) and effective bits.
Sorting and crowding are vectorized; the genetic operators exist both as
public per-config functions and as the batched forms the generation loop
uses.  Runs are fully deterministic given the seed population order and
the params seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .space import BitConfig, SearchSpace


@dataclass(frozen=True)
class ObjectivePoint:
    """A (score, bits) objective pair, optionally carrying its config."""

    score: float
    bits: float
    payload: BitConfig | None = None


@dataclass
class NsgaParams:
    population: int = 200
    generations: int = 20
    crossover_prob: float = 0.9
    mutation_prob: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.population < 4 or self.population % 2 != 0:
            raise ValueError("population must be even and >= 4")
        if self.generations < 0:
            raise ValueError("generations must be >= 0")
        for name in ("crossover_prob", "mutation_prob"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")


def _as_pair(p) -> tuple[float, float]:
    if isinstance(p, ObjectivePoint):
        return p.score, p.bits
    score, bits = p[0], p[1]
    return float(score), float(bits)


def dominates(a, b) -> bool:
    """True iff a is no worse in both objectives and strictly better in one."""
    a_score, a_bits = _as_pair(a)
    b_score, b_bits = _as_pair(b)
    if a_score > b_score or a_bits > b_bits:
        return False
    return a_score < b_score or a_bits < b_bits


def _objective_arrays(points) -> tuple[np.ndarray, np.ndarray]:
    pairs = [_as_pair(p) for p in points]
    arr = np.asarray(pairs, dtype=float).reshape(len(pairs), 2)
    return arr[:, 0], arr[:, 1]


def non_dominated_sort(points: Sequence) -> list[list[int]]:
    """Partition point indices into fronts; within-front order is input order."""
    n = len(points)
    if n == 0:
        return []
    scores, bits = _objective_arrays(points)
    return _sort_objectives(scores, bits)


def _sort_objectives(scores: np.ndarray, bits: np.ndarray) -> list[list[int]]:
    n = scores.shape[0]
    le_s = scores[:, None] <= scores[None, :]
    le_b = bits[:, None] <= bits[None, :]
    strict = (scores[:, None] < scores[None, :]) | (bits[:, None] < bits[None, :])
    dom = le_s & le_b & strict  # dom[i, j]: i dominates j
    counts = dom.sum(axis=0)

    fronts: list[list[int]] = []
    remaining = np.ones(n, dtype=bool)
    while remaining.any():
        members = np.flatnonzero(remaining & (counts == 0))
        fronts.append(members.tolist())
        remaining[members] = False
        counts = counts - dom[members].sum(axis=0)
    return fronts


def pareto_indices(scores, bits) -> list[int]:
    """Indices of the non-dominated points, by a sorted sweep.

    Equal-objective duplicates are all kept: neither dominates the other.
    Scales to large archives where the pairwise matrix would not.
    """
    scores = np.asarray(scores, dtype=float)
    bits = np.asarray(bits, dtype=float)
    order = np.lexsort((bits, scores))
    out: list[int] = []
    best_bits = np.inf
    i = 0
    n = len(order)
    while i < n:
        j = i
        s = scores[order[i]]
        while j < n and scores[order[j]] == s:
            j += 1
        group = order[i:j]  # bits ascending within the group
        group_min = bits[group[0]]
        if group_min < best_bits:
            for idx in group:
                if bits[idx] != group_min:
                    break
                out.append(int(idx))
            best_bits = group_min
        i = j
    return out


def crowding_distance(front: Sequence) -> np.ndarray:
    """NSGA-II crowding distances for one front.

    Boundary points of each objective get +inf; interiors accumulate
    normalized neighbor gaps.  An objective with zero range contributes
    nothing, and fronts of size <= 2 are all +inf.
    """
    n = len(front)
    if n == 0:
        raise ValueError("front must be non-empty")
    if n <= 2:
        return np.full(n, np.inf)
    scores, bits = _objective_arrays(front)
    dist = np.zeros(n)
    for values in (scores, bits):
        order = np.argsort(values, kind="stable")
        span = values[order[-1]] - values[order[0]]
        if span == 0.0:
            continue
        dist[order[0]] = dist[order[-1]] = np.inf
        gaps = (values[order[2:]] - values[order[:-2]]) / span
        dist[order[1:-1]] += gaps
    return dist


# -- genetic operators -------------------------------------------------------


def crossover(
    a: BitConfig, b: BitConfig, rng: np.random.Generator, prob: float
) -> tuple[BitConfig, BitConfig]:
    """Uniform crossover: with probability prob, swap each gene independently
    at rate 0.5; otherwise return the parents unchanged.

    Frozen genes are identical in any two valid parents, so swaps cannot
    alter them.
    """
    if len(a.bits) != len(b.bits):
        raise ValueError("parents come from different spaces")
    if rng.random() >= prob:
        return a, b
    mask = rng.random(len(a.bits)) < 0.5
    ab = np.asarray(a.bits)
    bb = np.asarray(b.bits)
    c1 = np.where(mask, bb, ab)
    c2 = np.where(mask, ab, bb)
    return BitConfig(tuple(int(v) for v in c1)), BitConfig(tuple(int(v) for v in c2))


def mutate(
    config: BitConfig, space: SearchSpace, rng: np.random.Generator, prob: float
) -> BitConfig:
    """Two-level mutation: gate the individual at prob, then resample each
    free gene with probability 1/L to a uniformly random different value."""
    if rng.random() >= prob:
        return config
    n_free = space.num_free
    mask = rng.random(n_free) < 1.0 / n_free
    if not mask.any():
        return config
    bits = list(config.bits)
    for k in np.flatnonzero(mask):
        i = space.free_indices[k]
        choices = space.layers[i].choices
        if len(choices) < 2:
            continue
        cur = choices.index(bits[i])
        j = int(rng.integers(len(choices) - 1))
        if j >= cur:
            j += 1
        bits[i] = choices[j]
    return BitConfig(tuple(bits))


# -- generation loop ---------------------------------------------------------


@dataclass
class NsgaResult:
    population: list[BitConfig]
    objectives: np.ndarray        # (P, 2): score, bits
    fronts: list[list[int]]
    ranks: np.ndarray             # (P,) front index per individual
    crowding: np.ndarray          # (P,) within-front crowding distance
    n_objective_calls: int
    history: list[tuple[float, float]] = field(default_factory=list)
    """Per-generation (best score, best bits) among survivors."""


def _rank_and_crowding(
    scores: np.ndarray, bits: np.ndarray
) -> tuple[list[list[int]], np.ndarray, np.ndarray]:
    fronts = _sort_objectives(scores, bits)
    n = scores.shape[0]
    ranks = np.empty(n, dtype=int)
    crowd = np.empty(n)
    for r, front in enumerate(fronts):
        ranks[front] = r
        pts = list(zip(scores[front], bits[front]))
        crowd[front] = crowding_distance(pts)
    return fronts, ranks, crowd


def _environmental_selection(
    scores: np.ndarray,
    bits: np.ndarray,
    capacity: int,
    duplicate: np.ndarray | None = None,
) -> np.ndarray:
    """Pick `capacity` pool indices by front rank, then crowding, then index.

    When a duplicate mask is given, repeated configs are considered only
    after every unique config, which keeps selection pressure alive on
    plateau-heavy discrete objectives where exact copies would otherwise
    flood the population.
    """
    idx = np.arange(scores.shape[0])
    if duplicate is not None and duplicate.any():
        unique_idx = idx[~duplicate]
        chosen = _fill_by_fronts(scores, bits, unique_idx, capacity)
        if len(chosen) < capacity:
            spare = [int(i) for i in idx[duplicate]]
            chosen = np.concatenate([chosen, spare[: capacity - len(chosen)]])
        return chosen.astype(int)
    return _fill_by_fronts(scores, bits, idx, capacity)


def _fill_by_fronts(
    scores: np.ndarray, bits: np.ndarray, candidates: np.ndarray, capacity: int
) -> np.ndarray:
    fronts = _sort_objectives(scores[candidates], bits[candidates])
    chosen: list[int] = []
    for front in fronts:
        members = [int(candidates[k]) for k in front]
        if len(chosen) + len(members) <= capacity:
            chosen.extend(members)
            if len(chosen) == capacity:
                break
            continue
        pts = list(zip(scores[members], bits[members]))
        crowd = crowding_distance(pts)
        # Larger crowding first; stable ties fall back to pool order.
        order = np.argsort(-crowd, kind="stable")
        need = capacity - len(chosen)
        chosen.extend(members[k] for k in order[:need])
        break
    return np.asarray(chosen, dtype=int)


def _tournament(
    ranks: np.ndarray, crowd: np.ndarray, n_picks: int, rng: np.random.Generator
) -> np.ndarray:
    pool = ranks.shape[0]
    draws = rng.integers(pool, size=(n_picks, 2))
    a, b = draws[:, 0], draws[:, 1]
    a_wins = (ranks[a] < ranks[b]) | (
        (ranks[a] == ranks[b]) & (crowd[a] > crowd[b])
    ) | ((ranks[a] == ranks[b]) & (crowd[a] == crowd[b]) & (a <= b))
    return np.where(a_wins, a, b)


def _variation(
    parent_bits: np.ndarray,
    space: SearchSpace,
    params: NsgaParams,
    rng: np.random.Generator,
) -> np.ndarray:
    p, n_layers = parent_bits.shape
    children = parent_bits.copy()

    # Uniform crossover on consecutive pairs.  Masks are drawn for every
    # pair so the rng consumption pattern does not depend on the gates.
    gates = rng.random(p // 2) < params.crossover_prob
    masks = rng.random((p // 2, n_layers)) < 0.5
    masks &= gates[:, None]
    a = children[0::2]
    b = children[1::2]
    swapped_a = np.where(masks, b, a)
    swapped_b = np.where(masks, a, b)
    children[0::2] = swapped_a
    children[1::2] = swapped_b

    # Two-level mutation over free genes only.
    free = space.free_indices
    n_free = len(free)
    gate = rng.random(p) < params.mutation_prob
    gene_mask = rng.random((p, n_free)) < 1.0 / n_free
    gene_mask &= gate[:, None]
    for row, k in np.argwhere(gene_mask):
        i = free[k]
        choices = space.layers[i].choices
        if len(choices) < 2:
            continue
        cur = choices.index(int(children[row, i]))
        j = int(rng.integers(len(choices) - 1))
        if j >= cur:
            j += 1
        children[row, i] = choices[j]
    return children


def nsga2_run(
    space: SearchSpace,
    seed_population: Sequence[BitConfig],
    objective_fn: Callable[[BitConfig], tuple[float, float]],
    params: NsgaParams,
    rng: np.random.Generator | None = None,
) -> NsgaResult:
    """Run the elitist generation loop and return the final sorted population.

    Each generation evaluates `population` individuals and keeps the best
    `population` of (previous survivors + fresh individuals) by rank and
    crowding, so the objective function is invoked exactly
    population * max(generations, 1) times per run.  The seed population is
    evaluated inside the first generation; variation happens between
    generations, giving generations - 1 variation rounds.
    """
    if rng is None:
        rng = np.random.default_rng(params.seed)
    p = params.population
    if len(seed_population) != p:
        raise ValueError(
            f"seed population size {len(seed_population)} != population {p}"
        )
    n_layers = len(space.layers)
    for cfg in seed_population:
        if len(cfg.bits) != n_layers:
            raise ValueError("seed config does not match the space")

    def evaluate(bits_mat: np.ndarray) -> tuple[list[BitConfig], np.ndarray]:
        configs = [BitConfig(tuple(row)) for row in bits_mat.tolist()]
        objs = np.empty((len(configs), 2))
        for idx, cfg in enumerate(configs):
            score, bits = objective_fn(cfg)
            objs[idx, 0] = score
            objs[idx, 1] = bits
        return configs, objs

    n_calls = 0
    current = np.asarray([c.bits for c in seed_population], dtype=np.int64)

    if params.generations == 0:
        configs, objs = evaluate(current)
        n_calls += p
        fronts, ranks, crowd = _rank_and_crowding(objs[:, 0], objs[:, 1])
        order = np.lexsort((np.arange(p), -crowd, ranks))
        return _finalize(configs, objs, order, n_calls, [])

    surv_bits: np.ndarray | None = None
    surv_objs: np.ndarray | None = None
    surv_configs: list[BitConfig] = []
    history: list[tuple[float, float]] = []

    for gen in range(1, params.generations + 1):
        configs, objs = evaluate(current)
        n_calls += p
        if surv_bits is None:
            pool_bits, pool_objs = current, objs
            pool_configs = configs
        else:
            pool_bits = np.vstack([surv_bits, current])
            pool_objs = np.vstack([surv_objs, objs])
            pool_configs = surv_configs + configs
        seen: set[tuple[int, ...]] = set()
        dup = np.zeros(len(pool_configs), dtype=bool)
        for k, cfg in enumerate(pool_configs):
            if cfg.bits in seen:
                dup[k] = True
            else:
                seen.add(cfg.bits)
        keep = _environmental_selection(pool_objs[:, 0], pool_objs[:, 1], p, dup)
        surv_bits = pool_bits[keep]
        surv_objs = pool_objs[keep]
        surv_configs = [pool_configs[i] for i in keep]
        history.append((float(surv_objs[:, 0].min()), float(surv_objs[:, 1].min())))
        if gen == params.generations:
            break
        _, ranks, crowd = _rank_and_crowding(surv_objs[:, 0], surv_objs[:, 1])
        parents = _tournament(ranks, crowd, p, rng)
        current = _variation(surv_bits[parents], space, params, rng)

    order = np.arange(p)
    return _finalize(surv_configs, surv_objs, order, n_calls, history)


def _finalize(
    configs: list[BitConfig],
    objs: np.ndarray,
    order: np.ndarray,
    n_calls: int,
    history: list[tuple[float, float]],
) -> NsgaResult:
    configs = [configs[i] for i in order]
    objs = objs[order]
    fronts, ranks, crowd = _rank_and_crowding(objs[:, 0], objs[:, 1])
    return NsgaResult(
        population=configs,
        objectives=objs,
        fronts=fronts,
        ranks=ranks,
        crowding=crowd,
        n_objective_calls=n_calls,
        history=history,
    )
