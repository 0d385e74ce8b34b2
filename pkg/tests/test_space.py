import json

import numpy as np
import pytest

from bitpareto import (
    BitConfig,
    LayerSpec,
    QuantOverhead,
    SearchSpace,
    SpaceError,
    effective_bits,
    load_search_space,
    random_config,
)
from bitpareto.space import effective_bits_matrix, random_bits_matrix

from helpers import make_space


def write_space(tmp_path, data):
    path = tmp_path / "space.json"
    path.write_text(json.dumps(data))
    return path


def test_load_round_trip(tmp_path):
    data = {
        "group_size": 128,
        "scale_bits": 16,
        "zero_bits": 16,
        "layers": [
            {"name": f"l{i}", "params": 100, "choices": [2, 3, 4]} for i in range(4)
        ],
    }
    space = load_search_space(write_space(tmp_path, data))
    assert len(space.layers) == 4
    assert space.overhead == QuantOverhead(128, 16, 16)
    assert space.layers[0].choices == (2, 3, 4)
    assert space.to_dict()["layers"] == data["layers"]


def test_empty_choices_names_layer(tmp_path):
    data = {
        "layers": [
            {"name": "good", "params": 10, "choices": [2, 4]},
            {"name": "broken", "params": 10, "choices": []},
        ]
    }
    with pytest.raises(SpaceError, match="broken"):
        load_search_space(write_space(tmp_path, data))


def test_large_space_size(tmp_path):
    data = {
        "layers": [
            {"name": f"l{i}", "params": 4096, "choices": [2, 3, 4]} for i in range(224)
        ]
    }
    space = load_search_space(write_space(tmp_path, data))
    assert space.config_count() == 3**224


def test_missing_file():
    with pytest.raises(SpaceError, match="missing.json"):
        load_search_space("missing.json")


def test_invalid_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(SpaceError, match="not valid JSON"):
        load_search_space(path)


def test_duplicate_names():
    layers = [LayerSpec("x", 1, (2,)), LayerSpec("x", 1, (2, 3))]
    with pytest.raises(SpaceError, match="duplicate"):
        SearchSpace(layers)


def test_choices_must_ascend():
    with pytest.raises(SpaceError, match="ascending"):
        LayerSpec("l", 1, (4, 2))


def test_frozen_validation():
    layers = [LayerSpec("a", 1, (2, 3, 4)), LayerSpec("b", 1, (2, 3, 4))]
    with pytest.raises(SpaceError, match="frozen value"):
        SearchSpace(layers, frozen={0: 5})
    with pytest.raises(SpaceError, match="out of range"):
        SearchSpace(layers, frozen={7: 2})
    with pytest.raises(SpaceError, match="all layers are frozen"):
        SearchSpace(layers, frozen={0: 2, 1: 4})


# -- effective bits ----------------------------------------------------------


def test_effective_bits_endpoints():
    space = make_space(8)
    assert effective_bits(space.min_config(), space) == pytest.approx(2.25, abs=1e-12)
    assert effective_bits(space.max_config(), space) == pytest.approx(4.25, abs=1e-12)


def test_effective_bits_two_equal_layers():
    space = make_space(2)
    cfg = BitConfig((2, 4))
    assert effective_bits(cfg, space) == pytest.approx(3.25, abs=1e-12)


def test_effective_bits_weighted_no_overhead():
    layers = [LayerSpec("a", 3, (2, 3, 4)), LayerSpec("b", 1, (2, 3, 4))]
    space = SearchSpace(layers, QuantOverhead(group_size=128, scale_bits=0, zero_bits=0))
    assert effective_bits(BitConfig((2, 4)), space) == pytest.approx(2.5, abs=1e-12)


def test_effective_bits_matches_scalar_oracle():
    rng = np.random.default_rng(3)
    params = rng.integers(1, 10_000, size=12)
    space = make_space(12, params=params)
    for _ in range(50):
        cfg = random_config(space, rng)
        # independent scalar summation
        ovh = (16 + 16) / 128
        total = sum(
            p * (b + ovh) for p, b in zip(params, cfg.bits)
        ) / float(params.sum())
        got = effective_bits(cfg, space)
        assert got == pytest.approx(total, rel=1e-12)


def test_effective_bits_monotone_in_single_layer():
    rng = np.random.default_rng(4)
    space = make_space(6, params=rng.integers(1, 500, size=6))
    cfg = random_config(space, rng)
    base = effective_bits(cfg, space)
    for i, layer in enumerate(space.layers):
        pos = layer.choices.index(cfg.bits[i])
        if pos + 1 < len(layer.choices):
            raised = list(cfg.bits)
            raised[i] = layer.choices[pos + 1]
            assert effective_bits(BitConfig(tuple(raised)), space) > base


def test_effective_bits_matrix_matches_scalar():
    rng = np.random.default_rng(5)
    space = make_space(7, params=rng.integers(1, 100, size=7))
    mat = random_bits_matrix(space, 40, rng)
    vec = effective_bits_matrix(mat, space)
    for row, v in zip(mat, vec):
        assert v == pytest.approx(effective_bits(BitConfig(tuple(row)), space), rel=1e-12)


# -- random configs ----------------------------------------------------------


def test_random_config_singleton_choice():
    layers = [LayerSpec("a", 1, (3,)), LayerSpec("b", 1, (2, 3, 4))]
    space = SearchSpace(layers)
    rng = np.random.default_rng(0)
    for _ in range(100):
        assert random_config(space, rng).bits[0] == 3


def test_random_config_uniform():
    space = make_space(1)
    rng = np.random.default_rng(11)
    n = 10_000
    draws = [random_config(space, rng).bits[0] for _ in range(n)]
    sigma = np.sqrt((1 / 3) * (2 / 3) / n)
    for value in (2, 3, 4):
        freq = draws.count(value) / n
        assert abs(freq - 1 / 3) < 3 * sigma


def test_random_config_deterministic():
    space = make_space(10)
    a = [random_config(space, np.random.default_rng(42)) for _ in range(5)]
    b = [random_config(space, np.random.default_rng(42)) for _ in range(5)]
    assert a == b


def test_random_config_respects_frozen():
    space = make_space(6, frozen={2: 4, 5: 2})
    rng = np.random.default_rng(1)
    for _ in range(10_000):
        cfg = random_config(space, rng)
        assert cfg.bits[2] == 4 and cfg.bits[5] == 2
    mat = random_bits_matrix(space, 10_000, rng)
    assert (mat[:, 2] == 4).all() and (mat[:, 5] == 2).all()


def test_validate_config():
    space = make_space(3, frozen={1: 4})
    space.validate_config(BitConfig((2, 4, 3)))
    with pytest.raises(SpaceError):
        space.validate_config(BitConfig((2, 3, 3)))  # frozen violated
    with pytest.raises(SpaceError):
        space.validate_config(BitConfig((5, 4, 3)))  # not in choices
    with pytest.raises(SpaceError):
        space.validate_config(BitConfig((2, 4)))  # wrong length


def test_config_hash_equality():
    a = BitConfig((2, 3, 4))
    b = BitConfig((2, 3, 4))
    c = BitConfig((2, 3, 3))
    assert a == b and hash(a) == hash(b)
    assert a != c
    assert len({a, b, c}) == 2


def test_dict_round_trip():
    space = make_space(5, frozen={1: 4})
    clone = SearchSpace.from_dict(space.to_dict())
    assert clone.to_dict() == space.to_dict()
    assert clone.frozen == space.frozen
