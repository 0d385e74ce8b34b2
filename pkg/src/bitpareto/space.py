"""Search-space description: layers, bit-width alphabets, and the memory objective.

A search space lists the quantizable layers of a model together with the
bit-widths each layer may take, plus the per-group quantization overhead
(scale/zero-point bits) that turns nominal bit-widths into effective
bits per weight.  Candidate solutions are full-length bit vectors.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np


class SpaceError(ValueError):
    """Raised when a search-space description violates its invariants."""


@dataclass(frozen=True)
class LayerSpec:
    """One quantizable layer: a name, its weight count, and its bit alphabet."""

    name: str
    param_count: int
    choices: tuple[int, ...]

    def __post_init__(self):
        if self.param_count < 1:
            raise SpaceError(f"layer {self.name!r}: param_count must be >= 1")
        choices = tuple(int(c) for c in self.choices)
        if not choices:
            raise SpaceError(f"layer {self.name!r}: empty bit-width choices")
        if any(c < 1 for c in choices):
            raise SpaceError(f"layer {self.name!r}: bit-widths must be >= 1")
        if any(b <= a for a, b in zip(choices, choices[1:])):
            raise SpaceError(
                f"layer {self.name!r}: choices must be strictly ascending, got {choices}"
            )
        object.__setattr__(self, "choices", choices)

    @property
    def min_choice(self) -> int:
        return self.choices[0]

    @property
    def max_choice(self) -> int:
        return self.choices[-1]


@dataclass(frozen=True)
class QuantOverhead:
    """Per-group quantization parameter cost (scale and zero-point bits)."""

    group_size: int = 128
    scale_bits: int = 16
    zero_bits: int = 16

    def __post_init__(self):
        if self.group_size < 1:
            raise SpaceError("group_size must be >= 1")
        if self.scale_bits < 0 or self.zero_bits < 0:
            raise SpaceError("scale_bits and zero_bits must be >= 0")

    @property
    def bits_per_weight(self) -> float:
        """Extra storage per weight contributed by group metadata."""
        return (self.scale_bits + self.zero_bits) / self.group_size


@dataclass(frozen=True)
class BitConfig:
    """A candidate assignment: one bit-width per layer, in layer order.

    Frozen layers are stored explicitly so a serialized config is
    self-describing.  Equality and hashing use the full bits vector,
    which is what archive deduplication relies on.
    """

    bits: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "bits", tuple(map(int, self.bits)))

    def __len__(self) -> int:
        return len(self.bits)


class SearchSpace:
    """An ordered list of layers with optional frozen bit assignments."""

    def __init__(
        self,
        layers: Iterable[LayerSpec],
        overhead: QuantOverhead | None = None,
        frozen: Mapping[int, int] | None = None,
    ):
        self.layers: tuple[LayerSpec, ...] = tuple(layers)
        self.overhead = overhead if overhead is not None else QuantOverhead()
        self.frozen: dict[int, int] = dict(frozen or {})

        if not self.layers:
            raise SpaceError("search space needs at least one layer")
        names = [l.name for l in self.layers]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise SpaceError(f"duplicate layer names: {dupes}")
        n = len(self.layers)
        for idx, value in self.frozen.items():
            if not 0 <= idx < n:
                raise SpaceError(f"frozen index {idx} out of range")
            if value not in self.layers[idx].choices:
                raise SpaceError(
                    f"layer {self.layers[idx].name!r}: frozen value {value} "
                    f"not in choices {self.layers[idx].choices}"
                )
        self.free_indices: tuple[int, ...] = tuple(
            i for i in range(n) if i not in self.frozen
        )
        if not self.free_indices:
            raise SpaceError("all layers are frozen; nothing to search")

        # Cached arrays for the effective-bits and feature computations.
        self._params = np.array([l.param_count for l in self.layers], dtype=float)
        self._total_params = float(self._params.sum())
        free = np.asarray(self.free_indices, dtype=np.intp)
        self._free_arr = free
        self._feat_lo = np.array(
            [self.layers[i].min_choice for i in free], dtype=float
        )
        self._feat_span = np.array(
            [max(self.layers[i].max_choice - self.layers[i].min_choice, 1) for i in free],
            dtype=float,
        )

    # -- basic structure ----------------------------------------------------

    def __len__(self) -> int:
        return len(self.layers)

    @property
    def num_free(self) -> int:
        return len(self.free_indices)

    def layer_index(self, name: str) -> int:
        for i, layer in enumerate(self.layers):
            if layer.name == name:
                return i
        raise KeyError(name)

    def config_count(self) -> int:
        """Number of distinct configs (product of free-layer alphabet sizes)."""
        count = 1
        for i in self.free_indices:
            count *= len(self.layers[i].choices)
        return count

    def with_frozen(self, extra: Mapping[int, int]) -> "SearchSpace":
        """A copy of this space with additional frozen assignments."""
        merged = dict(self.frozen)
        merged.update(extra)
        return SearchSpace(self.layers, self.overhead, merged)

    # -- configs ------------------------------------------------------------

    def validate_config(self, config: BitConfig) -> None:
        if len(config.bits) != len(self.layers):
            raise SpaceError(
                f"config length {len(config.bits)} != layer count {len(self.layers)}"
            )
        for i, (b, layer) in enumerate(zip(config.bits, self.layers)):
            if b not in layer.choices:
                raise SpaceError(
                    f"layer {layer.name!r}: bit-width {b} not in {layer.choices}"
                )
            if i in self.frozen and b != self.frozen[i]:
                raise SpaceError(
                    f"layer {layer.name!r}: frozen at {self.frozen[i]}, got {b}"
                )

    def min_config(self) -> BitConfig:
        return BitConfig(
            tuple(
                self.frozen.get(i, layer.min_choice)
                for i, layer in enumerate(self.layers)
            )
        )

    def max_config(self) -> BitConfig:
        return BitConfig(
            tuple(
                self.frozen.get(i, layer.max_choice)
                for i, layer in enumerate(self.layers)
            )
        )

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        out = {
            "group_size": self.overhead.group_size,
            "scale_bits": self.overhead.scale_bits,
            "zero_bits": self.overhead.zero_bits,
            "layers": [
                {"name": l.name, "params": l.param_count, "choices": list(l.choices)}
                for l in self.layers
            ],
        }
        if self.frozen:
            out["frozen"] = {
                self.layers[i].name: v for i, v in sorted(self.frozen.items())
            }
        return out

    @classmethod
    def from_dict(cls, data: Mapping) -> "SearchSpace":
        try:
            raw_layers = data["layers"]
        except KeyError:
            raise SpaceError("space file missing 'layers'") from None
        layers = []
        for entry in raw_layers:
            try:
                layers.append(
                    LayerSpec(
                        name=str(entry["name"]),
                        param_count=int(entry["params"]),
                        choices=tuple(int(c) for c in entry["choices"]),
                    )
                )
            except KeyError as exc:
                raise SpaceError(
                    f"layer entry {entry.get('name', '?')!r} missing field {exc}"
                ) from None
        overhead = QuantOverhead(
            group_size=int(data.get("group_size", 128)),
            scale_bits=int(data.get("scale_bits", 16)),
            zero_bits=int(data.get("zero_bits", 16)),
        )
        frozen_by_name = data.get("frozen", {}) or {}
        name_to_idx = {l.name: i for i, l in enumerate(layers)}
        frozen: dict[int, int] = {}
        for name, value in frozen_by_name.items():
            if name not in name_to_idx:
                raise SpaceError(f"frozen entry names unknown layer {name!r}")
            frozen[name_to_idx[name]] = int(value)
        return cls(layers, overhead, frozen)


def load_search_space(path: str | Path) -> SearchSpace:
    """Load and validate a search-space JSON file.

    Raises:
        SpaceError: on parse failure or any invariant violation; messages
            name the offending layer where one is identifiable.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise SpaceError(f"cannot read space file {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpaceError(f"space file {path} is not valid JSON: {exc}") from exc
    return SearchSpace.from_dict(data)


def effective_bits(config: BitConfig, space: SearchSpace) -> float:
    """Average storage cost per weight, including group-metadata overhead.

    Parameter-count weighted: layers with more weights contribute
    proportionally more, which is what makes the result track memory.
    """
    bits = np.asarray(config.bits, dtype=float)
    ovh = space.overhead.bits_per_weight
    return float(np.dot(space._params, bits + ovh) / space._total_params)


def effective_bits_matrix(bits_matrix: np.ndarray, space: SearchSpace) -> np.ndarray:
    """Vectorized :func:`effective_bits` over rows of an (n, L) bit matrix."""
    bits = np.asarray(bits_matrix, dtype=float)
    ovh = space.overhead.bits_per_weight
    return (bits + ovh) @ space._params / space._total_params


def random_config(space: SearchSpace, rng: np.random.Generator) -> BitConfig:
    """Draw a uniform random config; frozen layers keep their pinned value."""
    bits = []
    for i, layer in enumerate(space.layers):
        if i in space.frozen:
            bits.append(space.frozen[i])
        else:
            bits.append(layer.choices[rng.integers(len(layer.choices))])
    return BitConfig(tuple(bits))


def random_bits_matrix(
    space: SearchSpace, n: int, rng: np.random.Generator
) -> np.ndarray:
    """Draw n uniform random configs at once as an (n, L) int matrix."""
    cols = []
    for i, layer in enumerate(space.layers):
        if i in space.frozen:
            cols.append(np.full(n, space.frozen[i], dtype=np.int64))
        else:
            choices = np.asarray(layer.choices, dtype=np.int64)
            cols.append(choices[rng.integers(len(choices), size=n)])
    return np.stack(cols, axis=1)


def distinct_random_configs(
    space: SearchSpace,
    n: int,
    rng: np.random.Generator,
    exclude: Iterable[tuple[int, ...]] = (),
    max_rounds: int = 1000,
) -> list[BitConfig]:
    """Draw up to n distinct configs, resampling on collision.

    Collisions are resolved before any evaluation happens, so callers pay
    exactly one evaluation per returned config.  When the space (minus the
    excluded set) cannot supply n distinct configs within the retry budget,
    a warning is issued and the partial list is returned.
    """
    seen: set[tuple[int, ...]] = set(exclude)
    out: list[BitConfig] = []
    reachable = space.config_count()
    for _ in range(max_rounds):
        if len(out) >= n:
            break
        if len(seen) >= reachable:
            break
        batch = random_bits_matrix(space, n - len(out), rng)
        for row in batch:
            key = tuple(int(v) for v in row)
            if key in seen:
                continue
            seen.add(key)
            out.append(BitConfig(key))
            if len(out) >= n:
                break
    if len(out) < n:
        warnings.warn(
            f"requested {n} distinct configs but only {len(out)} available",
            stacklevel=2,
        )
    return out
