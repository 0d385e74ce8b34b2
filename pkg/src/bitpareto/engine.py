"""The outer search loop: sample, fit predictor, evolve, verify, repeat.

The archive holds every config whose score has been verified by the true
evaluator.  Each iteration refits the surrogate on the whole archive,
seeds the genetic inner search from the archive's Pareto front, selects a
diverse batch of unseen candidates from the inner-search output, verifies
them, and inserts them.  The final answer for a memory budget is the
lowest-score archive entry whose effective bits land within a small
tolerance of the target.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import moea, surrogate
from .evaluators import Evaluator, EvaluatorError
from .sensitivity import SensitivityProfile, measure_sensitivity, prune_space
from .space import (
    BitConfig,
    SearchSpace,
    distinct_random_configs,
    effective_bits,
    random_config,
)


class NoCandidateError(LookupError):
    """No archive entry lands within tolerance of the requested target."""


class TargetUnreachableError(ValueError):
    """The requested effective-bits target is outside the achievable range."""


@dataclass(frozen=True)
class ArchiveEntry:
    config: BitConfig
    score: float
    bits: float
    iteration: int = 0


class Archive:
    """Verified (config, score, bits) samples, deduplicated by config."""

    def __init__(self, space: SearchSpace):
        self.space = space
        self._entries: dict[tuple[int, ...], ArchiveEntry] = {}

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, config: BitConfig) -> bool:
        return config.bits in self._entries

    def add(self, entry: ArchiveEntry) -> bool:
        """Insert an entry; returns False if the config was already present."""
        if entry.config.bits in self._entries:
            return False
        self._entries[entry.config.bits] = entry
        return True

    def entries(self) -> list[ArchiveEntry]:
        return list(self._entries.values())

    def bits_matrix(self) -> np.ndarray:
        return np.asarray([e.config.bits for e in self._entries.values()], dtype=np.int64)

    def scores(self) -> np.ndarray:
        return np.asarray([e.score for e in self._entries.values()])

    def eff_bits(self) -> np.ndarray:
        return np.asarray([e.bits for e in self._entries.values()])

    # -- persistence (JSON Lines, one entry per line) ------------------------

    def dump_jsonl(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            for e in self._entries.values():
                fh.write(
                    json.dumps(
                        {
                            "bits": list(e.config.bits),
                            "score": e.score,
                            "eff_bits": e.bits,
                            "iter": e.iteration,
                        }
                    )
                    + "\n"
                )

    @classmethod
    def load_jsonl(cls, path: str | Path, space: SearchSpace) -> "Archive":
        archive = cls(space)
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                rec = json.loads(line)
                archive.add(
                    ArchiveEntry(
                        config=BitConfig(tuple(rec["bits"])),
                        score=float(rec["score"]),
                        bits=float(rec["eff_bits"]),
                        iteration=int(rec.get("iter", 0)),
                    )
                )
        return archive


ParetoFront = list[ArchiveEntry]


def pareto_front(archive: Archive) -> ParetoFront:
    """Non-dominated archive entries under (score, bits), ascending by bits."""
    entries = archive.entries()
    if not entries:
        raise ValueError("archive is empty")
    scores = np.asarray([e.score for e in entries])
    bits = np.asarray([e.bits for e in entries])
    idx = moea.pareto_indices(scores, bits)
    front = [entries[i] for i in idx]
    front.sort(key=lambda e: (e.bits, e.score))
    return front


@dataclass
class SearchParams:
    """Knobs of the outer loop; defaults sized for a 7B-scale space."""

    initial_samples: int = 250
    iterations: int = 200
    candidates_per_iter: int = 50
    nsga: moea.NsgaParams = field(default_factory=moea.NsgaParams)
    subset_pool: int = 100
    prune_multiplier: float | None = None
    seed: int = 0
    rbf_regularization: float = 1e-8

    def __post_init__(self):
        if self.initial_samples < 1:
            raise ValueError("initial_samples must be >= 1")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if not 1 <= self.candidates_per_iter <= self.nsga.population:
            raise ValueError("candidates_per_iter must be in [1, population]")
        if self.candidates_per_iter > self.subset_pool:
            raise ValueError("candidates_per_iter must be <= subset_pool")
        if self.prune_multiplier is not None and self.prune_multiplier <= 0:
            raise ValueError("prune_multiplier must be positive")


@dataclass
class SearchResult:
    archive: Archive
    front: ParetoFront
    status: str = "ok"                      # "ok" or "error"
    error: str | None = None
    iterations_completed: int = 0
    true_evaluations: int = 0
    sensitivity_evaluations: int = 0
    space: SearchSpace | None = None        # post-pruning space actually searched

    def __iter__(self):
        return iter((self.archive, self.front))


def initialize_archive(
    space: SearchSpace,
    evaluator: Evaluator,
    n: int,
    rng: np.random.Generator,
    iteration: int = 0,
) -> Archive:
    """Verify up to n distinct random configs and archive them.

    Duplicate draws are resampled before evaluation, so exactly one true
    evaluation is spent per archived entry.  If the space cannot yield n
    distinct configs, a warning is raised and the partial archive returned.
    """
    archive = Archive(space)
    configs = distinct_random_configs(space, n, rng)
    scores = evaluator.evaluate_batch(configs)
    for cfg, score in zip(configs, scores):
        archive.add(
            ArchiveEntry(
                config=cfg,
                score=float(score),
                bits=effective_bits(cfg, space),
                iteration=iteration,
            )
        )
    return archive


def _seed_population(
    front: ParetoFront,
    space: SearchSpace,
    size: int,
    rng: np.random.Generator,
) -> list[BitConfig]:
    """Front members first; leftover slots split between mutated front copies
    and uniform random configs."""
    if len(front) >= size:
        picks = np.linspace(0, len(front) - 1, size).round().astype(int)
        return [front[i].config for i in picks]
    seeds = [e.config for e in front]
    remaining = size - len(seeds)
    n_mutants = remaining // 2
    for k in range(n_mutants):
        base = front[k % len(front)].config
        seeds.append(moea.mutate(base, space, rng, prob=1.0))
    while len(seeds) < size:
        seeds.append(random_config(space, rng))
    return seeds


def select_candidates(
    nsga_result: moea.NsgaResult,
    archive: Archive,
    k: int,
    subset_pool: int,
) -> list[BitConfig]:
    """Pick up to k unseen configs from the inner-search output.

    The final population is ranked by (front, crowding, index); the best
    `subset_pool` form the pool.  Archived configs and in-pool duplicates
    are dropped, then a greedy farthest-first pass over the predicted
    objective space keeps the k most spread-out survivors.
    """
    if k > subset_pool:
        raise ValueError("k must be <= subset_pool")
    n = len(nsga_result.population)
    order = np.lexsort(
        (np.arange(n), -nsga_result.crowding, nsga_result.ranks)
    )
    pool_idx = order[:subset_pool]

    seen: set[tuple[int, ...]] = set()
    survivors: list[int] = []
    for i in pool_idx:
        cfg = nsga_result.population[i]
        if cfg.bits in seen or cfg in archive:
            continue
        seen.add(cfg.bits)
        survivors.append(int(i))
    if len(survivors) <= k:
        return [nsga_result.population[i] for i in survivors]

    objs = nsga_result.objectives[survivors]
    span = objs.max(axis=0) - objs.min(axis=0)
    span[span == 0.0] = 1.0
    norm = (objs - objs.min(axis=0)) / span

    chosen = [0]  # best-ranked survivor anchors the selection
    min_dist = np.linalg.norm(norm - norm[0], axis=1)
    while len(chosen) < k:
        min_dist[chosen] = -1.0
        nxt = int(np.argmax(min_dist))
        chosen.append(nxt)
        min_dist = np.minimum(min_dist, np.linalg.norm(norm - norm[nxt], axis=1))
    chosen.sort()
    return [nsga_result.population[survivors[i]] for i in chosen]


SurrogateFactory = Callable[[np.ndarray, np.ndarray], Callable[[np.ndarray], float]]


def _default_surrogate_factory(regularization: float) -> SurrogateFactory:
    def factory(X: np.ndarray, y: np.ndarray):
        model = surrogate.fit_rbf(X, y, regularization=regularization)
        return model.predict
    return factory


def search(
    space: SearchSpace,
    evaluator: Evaluator,
    params: SearchParams,
    *,
    surrogate_factory: SurrogateFactory | None = None,
    checkpoint_dir: str | Path | None = None,
    resume: bool = False,
    progress: Callable[[int, Archive], None] | None = None,
) -> SearchResult:
    """Run the full iterative search and return the archive plus its front.

    True-evaluator spend is exactly initial_samples plus the number of
    verified candidates (candidate dedup may push an iteration below
    candidates_per_iter).  Each iteration refits the surrogate from scratch
    on the whole archive.  With `checkpoint_dir` set, the archive, the rng
    state, and the iteration counter are persisted every iteration;
    `resume=True` picks up from the saved state after a crash.
    """
    result = SearchResult(archive=Archive(space), front=[], space=space)

    if params.prune_multiplier is not None:
        profile = measure_sensitivity(space, evaluator)
        result.sensitivity_evaluations = len(space.layers)
        space, _ = prune_space(space, profile, params.prune_multiplier)
        result.space = space

    if surrogate_factory is None:
        surrogate_factory = _default_surrogate_factory(params.rbf_regularization)

    rng = np.random.default_rng(params.seed)
    start_iteration = 1

    ckpt = Path(checkpoint_dir) if checkpoint_dir is not None else None
    if resume:
        if ckpt is None:
            raise ValueError("resume requires checkpoint_dir")
        archive, rng, start_iteration = _load_checkpoint(ckpt, space)
        result.archive = archive
        result.true_evaluations = len(archive)
    else:
        try:
            archive = initialize_archive(space, evaluator, params.initial_samples, rng)
        except EvaluatorError as exc:
            result.status = "error"
            result.error = f"initial sampling failed: {exc}"
            return result
        result.archive = archive
        result.true_evaluations = len(archive)
        if ckpt is not None:
            _save_checkpoint(ckpt, archive, rng, 1)

    for iteration in range(start_iteration, params.iterations + 1):
        X = surrogate.encode_matrix(archive.bits_matrix(), space)
        y = archive.scores()
        predict = surrogate_factory(X, y)

        front = pareto_front(archive)
        nsga_rng = np.random.default_rng(int(rng.integers(2**63)))
        seeds = _seed_population(front, space, params.nsga.population, nsga_rng)

        free = space._free_arr
        lo, span = space._feat_lo, space._feat_span
        ovh = space.overhead.bits_per_weight
        weights, total = space._params, space._total_params

        def objective(cfg: BitConfig) -> tuple[float, float]:
            arr = np.asarray(cfg.bits, dtype=float)
            feats = (arr[free] - lo) / span
            eff = float((arr + ovh) @ weights) / total
            return float(predict(feats)), eff

        nsga_result = moea.nsga2_run(
            space, seeds, objective, params.nsga, rng=nsga_rng
        )
        candidates = select_candidates(
            nsga_result, archive, params.candidates_per_iter, params.subset_pool
        )
        if candidates:
            try:
                scores = evaluator.evaluate_batch(candidates)
            except EvaluatorError as exc:
                result.status = "error"
                result.error = f"iteration {iteration}: {exc}"
                result.front = pareto_front(archive)
                return result
            for cfg, score in zip(candidates, scores):
                archive.add(
                    ArchiveEntry(
                        config=cfg,
                        score=float(score),
                        bits=effective_bits(cfg, space),
                        iteration=iteration,
                    )
                )
            result.true_evaluations += len(candidates)
        result.iterations_completed = iteration
        if ckpt is not None:
            _save_checkpoint(ckpt, archive, rng, iteration + 1)
        if progress is not None:
            progress(iteration, archive)

    result.front = pareto_front(archive)
    return result


def _save_checkpoint(
    ckpt: Path, archive: Archive, rng: np.random.Generator, next_iteration: int
) -> None:
    ckpt.mkdir(parents=True, exist_ok=True)
    archive.dump_jsonl(ckpt / "archive.jsonl")
    state = {
        "next_iteration": next_iteration,
        "rng_state": rng.bit_generator.state,
    }
    (ckpt / "checkpoint.json").write_text(json.dumps(state))


def _load_checkpoint(
    ckpt: Path, space: SearchSpace
) -> tuple[Archive, np.random.Generator, int]:
    archive = Archive.load_jsonl(ckpt / "archive.jsonl", space)
    state = json.loads((ckpt / "checkpoint.json").read_text())
    rng = np.random.default_rng()
    rng.bit_generator.state = state["rng_state"]
    return archive, rng, int(state["next_iteration"])


def select_optimal(
    archive: Archive, target_bits: float, tolerance: float = 0.005
) -> ArchiveEntry:
    """Lowest-score entry whose effective bits are within +/- tolerance of the
    target; score ties break toward lower bits, then insertion order."""
    if tolerance < 0:
        raise ValueError("tolerance must be >= 0")
    best: ArchiveEntry | None = None
    nearest: float | None = None
    for entry in archive.entries():
        gap = abs(entry.bits - target_bits)
        if nearest is None or gap < abs(nearest - target_bits):
            nearest = entry.bits
        if gap > tolerance:
            continue
        if best is None or (entry.score, entry.bits) < (best.score, best.bits):
            best = entry
    if best is None:
        raise NoCandidateError(
            f"no entry within {tolerance} bits of target {target_bits} "
            f"(nearest available: {nearest})"
        )
    return best


def one_shot_search(
    space: SearchSpace, profile: SensitivityProfile, target_bits: float
) -> BitConfig:
    """Single-pass assignment: rank free layers by sensitivity, give the most
    sensitive ones max bits and the rest min bits, cutting where effective
    bits come closest to the target.

    Needs no evaluator calls beyond the ones that built the profile.
    """
    if len(profile.scores) != len(space.layers):
        raise ValueError("profile does not match the space")
    free = list(space.free_indices)
    # Descending sensitivity, ties by layer index.
    free.sort(key=lambda i: (-profile.scores[i], i))

    lo = effective_bits(space.min_config(), space)
    hi = effective_bits(space.max_config(), space)
    if not lo - 1e-9 <= target_bits <= hi + 1e-9:
        raise TargetUnreachableError(
            f"target {target_bits} outside achievable range [{lo:.6g}, {hi:.6g}]"
        )

    best_bits: tuple[int, ...] | None = None
    best_key: tuple[float, float] | None = None
    for cut in range(len(free) + 1):
        assignment = list(space.min_config().bits)
        for i in free[:cut]:
            assignment[i] = space.layers[i].max_choice
        cfg_bits = tuple(assignment)
        eff = effective_bits(BitConfig(cfg_bits), space)
        key = (abs(eff - target_bits), eff)  # tie toward lower memory
        if best_key is None or key < best_key:
            best_key = key
            best_bits = cfg_bits
    assert best_bits is not None
    return BitConfig(best_bits)


@dataclass
class GreedyResult:
    config: BitConfig
    score: float | None          # None when the target was met with zero rounds
    evaluations: int
    rounds: int


def greedy_search(
    space: SearchSpace,
    evaluator: Evaluator,
    target_bits: float,
    tolerance: float = 1e-9,
) -> GreedyResult:
    """Demote one layer per round, choosing the least-harmful demotion.

    Starts from every free layer at max bits; each round trials demoting
    each remaining max-bit layer straight to its minimum (one evaluation
    per trial), keeps the demotion with the smallest score, and stops as
    soon as effective bits reach the target.
    """
    lo = effective_bits(space.min_config(), space)
    if target_bits < lo - 1e-9:
        raise TargetUnreachableError(
            f"target {target_bits} below minimum achievable {lo:.6g}"
        )

    bits = list(space.max_config().bits)
    current = BitConfig(tuple(bits))
    evaluations = 0
    rounds = 0
    score: float | None = None

    while effective_bits(current, space) > target_bits + tolerance:
        candidates = [
            i
            for i in space.free_indices
            if bits[i] == space.layers[i].max_choice
            and space.layers[i].min_choice != space.layers[i].max_choice
        ]
        if not candidates:
            raise TargetUnreachableError(
                f"exhausted demotions at {effective_bits(current, space):.6g} bits, "
                f"target {target_bits}"
            )
        trials = []
        for i in candidates:
            t = list(bits)
            t[i] = space.layers[i].min_choice
            trials.append(BitConfig(tuple(t)))
        trial_scores = evaluator.evaluate_batch(trials)
        evaluations += len(trials)
        rounds += 1
        best = int(np.argmin(trial_scores))  # ties: lowest layer index
        bits[candidates[best]] = space.layers[candidates[best]].min_choice
        current = trials[best]
        score = float(trial_scores[best])

    return GreedyResult(config=current, score=score, evaluations=evaluations, rounds=rounds)
