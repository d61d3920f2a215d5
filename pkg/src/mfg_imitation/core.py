"""Finite-state, finite-horizon mean-field games.

A game is the tuple (S, A, P, r, H, rho0) where both the transition kernel
``P(s'|s, a, rho)`` and the reward ``r(s, a, rho)`` may depend on the
population state distribution ``rho``. Everything here is exact forward /
backward recursion in double precision; nothing is learned.

Array conventions used throughout:

* state distributions: ``(H, S)``
* policies and state-action occupancies: ``(H, S, A)``, ``pi[n, s, a] = pi_n(a|s)``
* kernels: ``(S, A, S)``, ``P[s, a, s']``

Kernel and reward ``matrix`` methods broadcast over leading batch axes of
``rho`` so that a whole mean-field sequence can be evaluated in one call.
"""

from __future__ import annotations

import dataclasses
from typing import Union

import numpy as np

from .errors import InvalidInputError

DIST_TOL = 1e-12
TIE_TOL = 1e-12


def _as_float_array(x, ndim: int, name: str) -> np.ndarray:
    arr = np.array(x, dtype=float)
    if arr.ndim != ndim:
        raise InvalidInputError(f"{name} must have {ndim} dimensions, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return arr


def _check_simplex(arr: np.ndarray, name: str, tol: float = DIST_TOL) -> None:
    """Raise unless every slice along the last axis is a probability vector."""
    if np.any(arr < -tol):
        raise InvalidInputError(f"{name} has negative entries (min {arr.min():.3g})")
    sums = arr.sum(axis=-1)
    worst = float(np.max(np.abs(sums - 1.0))) if sums.size else 0.0
    if worst > tol:
        raise InvalidInputError(f"{name} rows do not sum to 1 (max deviation {worst:.3g})")


# ---------------------------------------------------------------------------
# Kernels and rewards
# ---------------------------------------------------------------------------


class TabularKernel:
    """Population-independent kernel ``T[s, a, s']`` (the L_P = 0 regime)."""

    kind = "tabular"
    population_dependent = False

    def __init__(self, table):
        table = _as_float_array(table, 3, "tabular kernel")
        if table.shape[0] != table.shape[2]:
            raise InvalidInputError(f"tabular kernel must be S x A x S, got {table.shape}")
        _check_simplex(table, "tabular kernel")
        self.table = table
        self.num_states, self.num_actions = table.shape[:2]

    def matrix(self, rho: np.ndarray) -> np.ndarray:
        rho = np.asarray(rho)
        return np.broadcast_to(self.table, rho.shape[:-1] + self.table.shape)

    def lipschitz(self) -> float:
        return 0.0

    def to_dict(self) -> dict:
        return {"type": self.kind, "table": self.table.tolist()}


class LinearCouplingKernel:
    """Mixture of two tables with a population-driven weight.

    ``P(.|s,a,rho) = (1 - w) * base[s,a] + w * coupled[s,a]`` with
    ``w = clip(coeffs @ rho, 0, 1)``.
    """

    kind = "linear_coupling"
    population_dependent = True

    def __init__(self, base, coupled, coeffs):
        base = _as_float_array(base, 3, "linear-coupling base table")
        coupled = _as_float_array(coupled, 3, "linear-coupling coupled table")
        coeffs = _as_float_array(coeffs, 1, "linear-coupling coefficients")
        if base.shape != coupled.shape or base.shape[0] != base.shape[2]:
            raise InvalidInputError(
                f"base/coupled tables must share an S x A x S shape, got {base.shape} and {coupled.shape}"
            )
        if coeffs.shape[0] != base.shape[0]:
            raise InvalidInputError("one coupling coefficient per state is required")
        _check_simplex(base, "linear-coupling base table")
        _check_simplex(coupled, "linear-coupling coupled table")
        self.base, self.coupled, self.coeffs = base, coupled, coeffs
        self.num_states, self.num_actions = base.shape[:2]

    def weight(self, rho: np.ndarray) -> np.ndarray:
        return np.clip(np.asarray(rho) @ self.coeffs, 0.0, 1.0)

    def matrix(self, rho: np.ndarray) -> np.ndarray:
        w = self.weight(rho)[..., None, None, None]
        return (1.0 - w) * self.base + w * self.coupled

    def lipschitz(self) -> float:
        # |c.(rho - rho')| <= (max c - min c)/2 * ||rho - rho'||_1 because the difference sums to zero.
        spread = 0.5 * float(self.coeffs.max() - self.coeffs.min())
        gap = float(np.abs(self.coupled - self.base).sum(axis=-1).max())
        return spread * gap

    def to_dict(self) -> dict:
        return {
            "type": self.kind,
            "base": self.base.tolist(),
            "coupled": self.coupled.tolist(),
            "coeffs": self.coeffs.tolist(),
        }


class AttractorKernel:
    """Two-state attractor dynamics parameterized by ``lipschitz_l``.

    State 1 is absorbing, action 1 in state 0 moves to state 1 surely, and
    action 0 in state 0 moves to state 1 with probability
    ``min(1, lipschitz_l * rho(s1))``.
    """

    kind = "attractor"
    population_dependent = True
    num_states = 2
    num_actions = 2

    def __init__(self, lipschitz_l: float):
        lipschitz_l = float(lipschitz_l)
        if not np.isfinite(lipschitz_l) or lipschitz_l < 0:
            raise InvalidInputError(f"attractor Lipschitz parameter must be >= 0, got {lipschitz_l}")
        self.lipschitz_l = lipschitz_l

    def fall_probability(self, rho: np.ndarray) -> np.ndarray:
        return np.minimum(1.0, self.lipschitz_l * np.asarray(rho)[..., 1])

    def matrix(self, rho: np.ndarray) -> np.ndarray:
        rho = np.asarray(rho)
        p = self.fall_probability(rho)
        out = np.zeros(rho.shape[:-1] + (2, 2, 2))
        out[..., 0, 0, 0] = 1.0 - p
        out[..., 0, 0, 1] = p
        out[..., 0, 1, 1] = 1.0
        out[..., 1, :, 1] = 1.0
        return out

    def lipschitz(self) -> float:
        return self.lipschitz_l

    def to_dict(self) -> dict:
        return {"type": self.kind, "lipschitz": self.lipschitz_l}


Kernel = Union[TabularKernel, LinearCouplingKernel, AttractorKernel]


class CongestionReward:
    """``r(s, a, rho) = base[s, a] - congestion_coeff * rho(s)``."""

    def __init__(self, base, congestion_coeff: float = 0.0):
        self.base = _as_float_array(base, 2, "reward base")
        self.congestion_coeff = float(congestion_coeff)
        if not np.isfinite(self.congestion_coeff):
            raise InvalidInputError("congestion coefficient must be finite")

    def matrix(self, rho: np.ndarray) -> np.ndarray:
        rho = np.asarray(rho)
        return self.base - self.congestion_coeff * rho[..., :, None]

    def lipschitz(self) -> float:
        return abs(self.congestion_coeff)

    def sup_abs(self) -> float:
        """Largest |r(s, a, rho)| over every distribution rho."""
        # rho(s) ranges over [0, 1] and r is affine in it.
        return float(
            np.maximum(np.abs(self.base), np.abs(self.base - self.congestion_coeff)).max()
        )

    def to_dict(self) -> dict:
        return {"base": self.base.tolist(), "congestion_coeff": self.congestion_coeff}


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True, eq=False)
class FiniteMfg:
    num_states: int
    num_actions: int
    horizon: int
    initial_distribution: np.ndarray
    kernel: Kernel
    reward: CongestionReward

    def __post_init__(self):
        for name in ("num_states", "num_actions", "horizon"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise InvalidInputError(f"{name} must be a positive integer, got {value}")
            object.__setattr__(self, name, int(value))
        rho0 = _as_float_array(self.initial_distribution, 1, "initial distribution")
        if rho0.shape != (self.num_states,):
            raise InvalidInputError(f"initial distribution must have {self.num_states} entries")
        _check_simplex(rho0, "initial distribution")
        object.__setattr__(self, "initial_distribution", rho0)
        if (self.kernel.num_states, self.kernel.num_actions) != (self.num_states, self.num_actions):
            raise InvalidInputError("kernel dimensions do not match the game")
        if self.reward.base.shape != (self.num_states, self.num_actions):
            raise InvalidInputError("reward base must be S x A")
        # Rows are stochastic by construction for every supported kernel family;
        # probe a few distributions anyway to catch custom kernels.
        probes = np.vstack([rho0, np.full(self.num_states, 1.0 / self.num_states), np.eye(self.num_states)])
        _check_simplex(self.kernel.matrix(probes), "kernel rows")

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.horizon, self.num_states, self.num_actions

    def transition(self, rho) -> np.ndarray:
        return self.kernel.matrix(rho)

    def reward_matrix(self, rho) -> np.ndarray:
        return self.reward.matrix(rho)


@dataclasses.dataclass(frozen=True, eq=False)
class PolicySequence:
    """Non-stationary stochastic policy, ``probabilities[n, s, a] = pi_n(a|s)``."""

    probabilities: np.ndarray

    def __post_init__(self):
        probs = _as_float_array(self.probabilities, 3, "policy")
        _check_simplex(probs, "policy")
        probs.setflags(write=False)
        object.__setattr__(self, "probabilities", probs)

    @property
    def horizon(self) -> int:
        return self.probabilities.shape[0]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.probabilities.shape

    @classmethod
    def uniform(cls, horizon: int, num_states: int, num_actions: int) -> "PolicySequence":
        return cls(np.full((horizon, num_states, num_actions), 1.0 / num_actions))

    @classmethod
    def deterministic(cls, actions, num_actions: int) -> "PolicySequence":
        """Build from an ``(H, S)`` integer array of chosen actions."""
        actions = np.asarray(actions, dtype=int)
        if actions.ndim != 2 or np.any(actions < 0) or np.any(actions >= num_actions):
            raise InvalidInputError("deterministic actions must be an H x S array of valid action indices")
        return cls(np.eye(num_actions)[actions])

    @classmethod
    def stationary(cls, table, horizon: int) -> "PolicySequence":
        table = _as_float_array(table, 2, "stationary policy")
        return cls(np.broadcast_to(table, (horizon,) + table.shape))

    def __eq__(self, other):
        if not isinstance(other, PolicySequence):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.probabilities, other.probabilities))

    __hash__ = None


@dataclasses.dataclass(frozen=True, eq=False)
class FlowSequence:
    """State distributions ``rho_n`` and state-action occupancies ``mu_n`` for n < H."""

    state_dists: np.ndarray
    state_action_dists: np.ndarray

    @property
    def horizon(self) -> int:
        return self.state_dists.shape[0]


@dataclasses.dataclass(frozen=True, eq=False)
class NonStationaryReward:
    """Population-independent reward ``f_n(s, a)`` with entries in [-1, 1]."""

    values: np.ndarray

    def __post_init__(self):
        values = _as_float_array(self.values, 3, "non-stationary reward")
        if np.any(np.abs(values) > 1.0):
            raise InvalidInputError("non-stationary reward entries must lie in [-1, 1]")
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, horizon: int, num_states: int, num_actions: int) -> "NonStationaryReward":
        return cls(np.zeros((horizon, num_states, num_actions)))


@dataclasses.dataclass(frozen=True, eq=False)
class TrajectoryBatch:
    """Sampled demonstrations stored column-wise: ``states[i, n]``, ``actions[i, n]``."""

    states: np.ndarray
    actions: np.ndarray
    rng_seed: int
    generating_policy_id: str = "policy"

    @property
    def count(self) -> int:
        return self.states.shape[0]

    @property
    def horizon(self) -> int:
        return self.states.shape[1]

    @property
    def trajectories(self) -> list[list[tuple[int, int]]]:
        return [list(zip(s.tolist(), a.tolist())) for s, a in zip(self.states, self.actions)]

    def empirical_occupancy(self, num_states: int, num_actions: int) -> np.ndarray:
        """Per-step empirical state-action frequencies, shape ``(H, S, A)``."""
        H = self.horizon
        flat = (np.arange(H) * num_states + self.states) * num_actions + self.actions
        counts = np.bincount(flat.ravel(), minlength=H * num_states * num_actions)
        return counts.reshape(H, num_states, num_actions) / self.count


# ---------------------------------------------------------------------------
# Validation helpers
# ---------------------------------------------------------------------------


def _check_policy(mfg: FiniteMfg, policy: PolicySequence, name: str = "policy") -> None:
    if not isinstance(policy, PolicySequence):
        raise InvalidInputError(f"{name} must be a PolicySequence")
    if policy.shape != mfg.shape:
        raise InvalidInputError(f"{name} has shape {policy.shape}, game expects {mfg.shape}")


def _mean_field_array(mfg: FiniteMfg, mean_field) -> np.ndarray:
    if isinstance(mean_field, FlowSequence):
        mean_field = mean_field.state_dists
    arr = _as_float_array(mean_field, 2, "mean field")
    if arr.shape != (mfg.horizon, mfg.num_states):
        raise InvalidInputError(
            f"mean field has shape {arr.shape}, expected {(mfg.horizon, mfg.num_states)}"
        )
    _check_simplex(arr, "mean field", tol=1e-9)
    return arr


def _override_values(mfg: FiniteMfg, reward_override) -> np.ndarray:
    if not isinstance(reward_override, NonStationaryReward):
        raise InvalidInputError("reward_override must be a NonStationaryReward")
    if reward_override.values.shape != mfg.shape:
        raise InvalidInputError(f"reward override has shape {reward_override.values.shape}, expected {mfg.shape}")
    return reward_override.values


# ---------------------------------------------------------------------------
# Recursions
# ---------------------------------------------------------------------------


def _forward(mfg: FiniteMfg, probs: np.ndarray, mean_field: np.ndarray | None = None):
    """Roll agents forward; leading batch axes of ``probs`` are carried along.

    With ``mean_field=None`` each agent is its own population (self-consistent
    flow); otherwise the kernel is evaluated at ``mean_field[..., n, :]``.
    Returns ``(rho, mu, kernels)`` where ``kernels[..., n, :, :, :]`` drives
    the transition n -> n+1.
    """
    H, S, A = mfg.shape
    batch = probs.shape[:-3]
    rho = np.empty(batch + (H, S))
    kernels = np.empty(batch + (max(H - 1, 0), S, A, S))
    rho[..., 0, :] = mfg.initial_distribution
    for n in range(H - 1):
        P = mfg.kernel.matrix(rho[..., n, :] if mean_field is None else mean_field[..., n, :])
        kernels[..., n, :, :, :] = P
        joint = (probs[..., n, :, :] * rho[..., n, :, None]).reshape(batch + (1, S * A))
        rho[..., n + 1, :] = (joint @ P.reshape(P.shape[:-3] + (S * A, S)))[..., 0, :]
    mu = probs * rho[..., None]
    return rho, mu, kernels


def _backward(rho0: np.ndarray, kernels: np.ndarray, rewards: np.ndarray):
    """Backward induction with V_H = 0; returns (deterministic policies, values)."""
    H, S, A = rewards.shape[-3:]
    batch = rewards.shape[:-3]
    policy = np.zeros(rewards.shape)
    values = np.zeros(batch + (S,))
    for n in range(H - 1, -1, -1):
        q = rewards[..., n, :, :]
        if n < H - 1:
            q = q + np.einsum("...sat,...t->...sa", kernels[..., n, :, :, :], values)
        best = q.max(axis=-1)
        # First action within TIE_TOL of the max: deterministic, lowest-index tie-breaking.
        choice = np.argmax(q >= best[..., None] - TIE_TOL, axis=-1)
        policy[..., n, :, :] = np.arange(A) == choice[..., None]
        values = best
    return policy, values @ rho0


def population_flow(mfg: FiniteMfg, policy: PolicySequence) -> FlowSequence:
    """Flow of a population that entirely follows ``policy``."""
    _check_policy(mfg, policy)
    rho, mu, _ = _forward(mfg, policy.probabilities)
    return FlowSequence(rho, mu)


def single_agent_flow(
    mfg: FiniteMfg, population_policy: PolicySequence, agent_policy: PolicySequence
) -> FlowSequence:
    """Flow of one agent following ``agent_policy`` inside a ``population_policy`` crowd."""
    _check_policy(mfg, population_policy, "population_policy")
    _check_policy(mfg, agent_policy, "agent_policy")
    pop_rho, _, _ = _forward(mfg, population_policy.probabilities)
    rho, mu, _ = _forward(mfg, agent_policy.probabilities, pop_rho)
    return FlowSequence(rho, mu)


def value(
    mfg: FiniteMfg,
    agent_policy: PolicySequence,
    mean_field,
    reward_override: NonStationaryReward | None = None,
) -> float:
    """Expected return of ``agent_policy`` against a frozen mean-field sequence.

    ``mean_field`` is an ``(H, S)`` array (or a FlowSequence). With
    ``reward_override`` the population reward is replaced by ``f_n(s, a)``.
    """
    _check_policy(mfg, agent_policy, "agent_policy")
    mf = _mean_field_array(mfg, mean_field)
    _, mu, _ = _forward(mfg, agent_policy.probabilities, mf)
    rewards = mfg.reward.matrix(mf) if reward_override is None else _override_values(mfg, reward_override)
    return float(np.sum(mu * rewards))


def best_response(
    mfg: FiniteMfg, mean_field, reward_override: NonStationaryReward | None = None
) -> tuple[PolicySequence, float]:
    """Optimal deterministic policy against a frozen mean field, and its value."""
    mf = _mean_field_array(mfg, mean_field)
    kernels = mfg.kernel.matrix(mf[:-1])
    rewards = mfg.reward.matrix(mf) if reward_override is None else _override_values(mfg, reward_override)
    probs, v = _backward(mfg.initial_distribution, kernels, rewards)
    return PolicySequence(probs), float(v)


def exploitability(mfg: FiniteMfg, policy: PolicySequence) -> float:
    """Gain of the best unilateral deviation against the flow ``policy`` induces."""
    _check_policy(mfg, policy)
    return float(batch_exploitability(mfg, policy.probabilities))


# Batched variants: ``probs`` carries leading batch axes, ``(..., H, S, A)``.
# They run the same recursions as the single-policy functions above.


def _check_batch(mfg: FiniteMfg, probs) -> np.ndarray:
    probs = np.asarray(probs, dtype=float)
    if probs.shape[-3:] != mfg.shape:
        raise InvalidInputError(f"policy batch has trailing shape {probs.shape[-3:]}, game expects {mfg.shape}")
    _check_simplex(probs, "policy batch")
    return probs


def batch_population_flow(mfg: FiniteMfg, probs) -> tuple[np.ndarray, np.ndarray]:
    """``(rho, mu)`` of self-consistent populations, one per batch entry."""
    rho, mu, _ = _forward(mfg, _check_batch(mfg, probs))
    return rho, mu


def batch_single_agent_flow(mfg: FiniteMfg, population_probs, agent_probs) -> tuple[np.ndarray, np.ndarray]:
    """``(rho, mu)`` of agents among populations; batch axes broadcast."""
    pop_rho, _, _ = _forward(mfg, _check_batch(mfg, population_probs))
    rho, mu, _ = _forward(mfg, _check_batch(mfg, agent_probs), pop_rho)
    return rho, mu


def batch_value(mfg: FiniteMfg, probs, mean_field, reward_override: NonStationaryReward | None = None) -> np.ndarray:
    """Values of a batch of agent policies against one frozen mean field."""
    mf = _mean_field_array(mfg, mean_field)
    _, mu, _ = _forward(mfg, _check_batch(mfg, probs), mf)
    rewards = mfg.reward.matrix(mf) if reward_override is None else _override_values(mfg, reward_override)
    return np.sum(mu * rewards, axis=(-3, -2, -1))


def batch_exploitability(mfg: FiniteMfg, probs) -> np.ndarray:
    rho, mu, kernels = _forward(mfg, _check_batch(mfg, probs))
    rewards = mfg.reward.matrix(rho)
    _, best = _backward(mfg.initial_distribution, kernels, rewards)
    return best - np.sum(mu * rewards, axis=(-3, -2, -1))


def _sample_categorical(rng: np.random.Generator, probs: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(probs, axis=-1)
    cdf /= cdf[..., -1:]
    u = rng.random(probs.shape[0])
    return (u[:, None] >= cdf).sum(axis=-1)


def sample_trajectories(
    mfg: FiniteMfg, policy: PolicySequence, count: int, seed: int, policy_id: str = "policy"
) -> TrajectoryBatch:
    """Simulate ``count`` independent agents in the mean-field limit.

    Agents move against the deterministic population flow of ``policy``;
    the samples never feed back into it.
    """
    _check_policy(mfg, policy)
    if int(count) != count or count < 1:
        raise InvalidInputError(f"count must be a positive integer, got {count}")
    count = int(count)
    H, S, A = mfg.shape
    _, _, kernels = _forward(mfg, policy.probabilities)
    rng = np.random.default_rng(seed)
    states = np.empty((count, H), dtype=np.int64)
    actions = np.empty((count, H), dtype=np.int64)
    s = _sample_categorical(rng, np.broadcast_to(mfg.initial_distribution, (count, S)))
    for n in range(H):
        a = _sample_categorical(rng, policy.probabilities[n][s])
        states[:, n], actions[:, n] = s, a
        if n < H - 1:
            s = _sample_categorical(rng, kernels[n][s, a])
    return TrajectoryBatch(states, actions, int(seed), policy_id)
