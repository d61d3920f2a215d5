"""JSON game-spec files.

Layout::

    {
      "num_states": 2, "num_actions": 2, "horizon": 3,
      "rho0": [1.0, 0.0],
      "kernel": {"type": "tabular", "table": [[[...]]]}                       # S x A x S
             |  {"type": "linear_coupling", "base": [...], "coupled": [...],  # S x A x S each
                 "coeffs": [...]}                                            # one per state
             |  {"type": "attractor", "lipschitz": 1.0},
      "reward": {"base": [[...]], "congestion_coeff": 0.0},                  # S x A
      "expert": [[[...]]]                                                    # optional, H x S x A
    }

The reward is ``base[s][a] - congestion_coeff * rho(s)``. Floats are written
with ``repr`` precision so load/dump round-trips losslessly.
"""

from __future__ import annotations

import json
from pathlib import Path

from .core import (
    AttractorKernel,
    CongestionReward,
    FiniteMfg,
    LinearCouplingKernel,
    PolicySequence,
    TabularKernel,
)
from .errors import InvalidInputError


def kernel_from_dict(spec: dict):
    kind = spec.get("type")
    if kind == "tabular":
        return TabularKernel(spec["table"])
    if kind == "linear_coupling":
        return LinearCouplingKernel(spec["base"], spec["coupled"], spec["coeffs"])
    if kind == "attractor":
        return AttractorKernel(spec["lipschitz"])
    raise InvalidInputError(f"unknown kernel type {kind!r}")


def game_from_dict(spec: dict) -> tuple[FiniteMfg, PolicySequence | None]:
    """Build the game and, when present, the expert policy."""
    try:
        reward = spec["reward"]
        mfg = FiniteMfg(
            num_states=spec["num_states"],
            num_actions=spec["num_actions"],
            horizon=spec["horizon"],
            initial_distribution=spec["rho0"],
            kernel=kernel_from_dict(spec["kernel"]),
            reward=CongestionReward(reward["base"], reward.get("congestion_coeff", 0.0)),
        )
    except KeyError as exc:
        raise InvalidInputError(f"game spec is missing field {exc.args[0]!r}") from None
    expert = spec.get("expert")
    if expert is not None:
        expert = PolicySequence(expert)
        if expert.shape != mfg.shape:
            raise InvalidInputError(f"expert policy has shape {expert.shape}, game expects {mfg.shape}")
    return mfg, expert


def game_to_dict(mfg: FiniteMfg, expert: PolicySequence | None = None) -> dict:
    spec = {
        "num_states": mfg.num_states,
        "num_actions": mfg.num_actions,
        "horizon": mfg.horizon,
        "rho0": mfg.initial_distribution.tolist(),
        "kernel": mfg.kernel.to_dict(),
        "reward": mfg.reward.to_dict(),
    }
    if expert is not None:
        spec["expert"] = expert.probabilities.tolist()
    return spec


def load_game(path) -> tuple[FiniteMfg, PolicySequence | None]:
    with open(path) as fh:
        try:
            spec = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f"{path}: invalid JSON ({exc})") from None
    return game_from_dict(spec)


def dump_game(mfg: FiniteMfg, path, expert: PolicySequence | None = None) -> None:
    Path(path).write_text(json.dumps(game_to_dict(mfg, expert), indent=2) + "\n")
