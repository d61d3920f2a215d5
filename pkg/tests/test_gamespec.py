import json

import numpy as np
import pytest

from mfg_imitation import (
    InvalidInputError,
    PolicySequence,
    alpha_policy,
    build_attractor,
    dump_game,
    exploitability,
    game_from_dict,
    game_to_dict,
    load_game,
    population_flow,
)
from mfg_imitation.experiments import random_coupled_game, random_policy, random_tabular_game


def test_round_trip_preserves_every_float(tmp_path):
    rng = np.random.default_rng(0)
    for make in (random_tabular_game, random_coupled_game):
        game = make(rng)
        expert = random_policy(rng, game.shape)
        path = tmp_path / "g.json"
        dump_game(game, path, expert)
        loaded, loaded_expert = load_game(path)
        assert loaded_expert == expert
        a = population_flow(game, expert).state_action_dists
        b = population_flow(loaded, loaded_expert).state_action_dists
        assert np.array_equal(a, b)


def test_attractor_spec(tmp_path):
    path = tmp_path / "a.json"
    dump_game(build_attractor(2.0, 4), path)
    spec = json.loads(path.read_text())
    assert spec["kernel"] == {"type": "attractor", "lipschitz": 2.0}
    game, expert = load_game(path)
    assert expert is None
    assert exploitability(game, alpha_policy(0.0, 4)) == 0.0


def test_missing_field():
    spec = game_to_dict(build_attractor(1.0, 2))
    del spec["rho0"]
    with pytest.raises(InvalidInputError, match="rho0"):
        game_from_dict(spec)


def test_unknown_kernel():
    spec = game_to_dict(build_attractor(1.0, 2))
    spec["kernel"] = {"type": "magic"}
    with pytest.raises(InvalidInputError):
        game_from_dict(spec)


def test_expert_shape_checked():
    spec = game_to_dict(build_attractor(1.0, 2), PolicySequence.uniform(2, 2, 2))
    spec["horizon"] = 3
    with pytest.raises(InvalidInputError):
        game_from_dict(spec)


def test_invalid_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(InvalidInputError):
        load_game(path)
