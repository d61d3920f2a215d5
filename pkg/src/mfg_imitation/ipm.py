"""l1 occupancy distances as integral probability metrics, and min-max solvers.

For occupancy sequences ``mu^E`` and ``mu``, the sign function
``f_n(s, a) = sign(mu^E_n(s, a) - mu_n(s, a))`` attains
``sum_n ||mu^E_n - mu_n||_1 = max_{f in [-1, 1]} (V_f(expert) - V_f(policy))``.

Two solvers are provided:

* ``solve_vanilla_adversarial``: the population is frozen to the expert's, so
  the reachable occupancies form a polytope and the problem is a bilinear game
  between a reward ``f`` and a policy. It alternates witness updates with
  best responses (double-oracle style) and certifies optimality by duality.
* ``solve_mfc_adversarial``: the population follows the candidate policy. The
  occupancy set need not be convex, so min and max are never swapped; the
  solver enumerates a finite policy family and evaluates each inner max
  exactly.
"""

from __future__ import annotations

import dataclasses
import itertools
from collections.abc import Sequence

import numpy as np
from scipy.optimize import linprog

from .core import (
    FiniteMfg,
    FlowSequence,
    NonStationaryReward,
    PolicySequence,
    _check_policy,
    best_response,
    population_flow,
    single_agent_flow,
)
from .errors import InvalidInputError

DEFAULT_FAMILY_LIMIT = 4096


@dataclasses.dataclass(frozen=True, eq=False)
class IpmResult:
    distance: float
    witness: NonStationaryReward
    gap_check: float
    per_step: np.ndarray


def _occupancies(x) -> np.ndarray:
    if isinstance(x, FlowSequence):
        x = x.state_action_dists
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 3:
        raise InvalidInputError(f"occupancies must be H x S x A, got shape {arr.shape}")
    return arr


def ipm_witness(expert_occupancies, policy_occupancies) -> IpmResult:
    """Sign-function witness for the summed l1 distance between two occupancy sequences."""
    mu_e = _occupancies(expert_occupancies)
    mu_p = _occupancies(policy_occupancies)
    if mu_e.shape != mu_p.shape:
        raise InvalidInputError(f"occupancy shapes differ: {mu_e.shape} vs {mu_p.shape}")
    diff = mu_e - mu_p
    witness = np.sign(diff)
    per_step = np.abs(diff).reshape(diff.shape[0], -1).sum(axis=1)
    distance = float(per_step.sum())
    value_gap = float(np.sum(mu_e * witness) - np.sum(mu_p * witness))
    return IpmResult(distance, NonStationaryReward(witness), abs(distance - value_gap), per_step)


@dataclasses.dataclass(frozen=True, eq=False)
class TraceRecord:
    iteration: int
    params: object
    witness: np.ndarray
    objective: float

    def to_dict(self) -> dict:
        params = self.params.tolist() if isinstance(self.params, np.ndarray) else self.params
        return {
            "iteration": self.iteration,
            "params": params,
            "witness": self.witness.tolist(),
            "objective": self.objective,
        }


@dataclasses.dataclass(frozen=True, eq=False)
class MinMaxTrace:
    mode: str
    iterations: list[TraceRecord]
    converged: bool
    final_policy: PolicySequence
    final_objective: float
    final_params: object = None

    def to_dict(self) -> dict:
        params = self.final_params.tolist() if isinstance(self.final_params, np.ndarray) else self.final_params
        return {
            "mode": self.mode,
            "converged": self.converged,
            "final_objective": self.final_objective,
            "final_params": params,
            "final_policy": self.final_policy.probabilities.tolist(),
            "iterations": [r.to_dict() for r in self.iterations],
        }


def _policy_from_occupancy(mu: np.ndarray) -> PolicySequence:
    mass = mu.sum(axis=2, keepdims=True)
    probs = np.where(mass > 0, mu / np.where(mass > 0, mass, 1.0), 1.0 / mu.shape[2])
    return PolicySequence(probs / probs.sum(axis=2, keepdims=True))


def _closest_mixture(target: np.ndarray, vertices: np.ndarray) -> tuple[np.ndarray, float]:
    """Weights on the simplex minimizing ||target - vertices.T @ w||_1 (vertices: k x d)."""
    k, d = vertices.shape
    # x = [w (k), t (d)];  -t <= target - V^T w <= t
    c = np.concatenate([np.zeros(k), np.ones(d)])
    a_ub = np.block([[vertices.T, -np.eye(d)], [-vertices.T, -np.eye(d)]])
    b_ub = np.concatenate([target, -target])
    a_eq = np.concatenate([np.ones(k), np.zeros(d)])[None, :]
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=[1.0], bounds=(0, None), method="highs")
    if res.status != 0:
        raise RuntimeError(f"restricted master LP failed: {res.message}")
    w = np.clip(res.x[:k], 0.0, None)
    return w / w.sum(), float(res.fun)


def _restricted_witness(target: np.ndarray, vertices: np.ndarray) -> tuple[np.ndarray, float, float]:
    """Optimal reward of the restricted game ``max_f min_i <f, target - v_i>``.

    Returns ``(f, z, value)`` where ``z = max_i <f, v_i>``.
    """
    k, d = vertices.shape
    # x = [f (d), z];  minimize -<f, target> + z  s.t.  <f, v_i> - z <= 0
    c = np.concatenate([-target, [1.0]])
    a_ub = np.hstack([vertices, -np.ones((k, 1))])
    bounds = [(-1.0, 1.0)] * d + [(None, None)]
    res = linprog(c, A_ub=a_ub, b_ub=np.zeros(k), bounds=bounds, method="highs")
    if res.status != 0:
        raise RuntimeError(f"restricted witness LP failed: {res.message}")
    return res.x[:d], float(res.x[d]), float(-res.fun)


def solve_vanilla_adversarial(
    mfg: FiniteMfg,
    expert: PolicySequence,
    max_iters: int = 100,
    tolerance: float = 1e-9,
    init: PolicySequence | None = None,
) -> MinMaxTrace:
    """Minimize sum_n ||mu^(E)E_n - mu^(E)pi_n||_1 over all policies.

    Each iteration records the sign witness of the current policy, then asks
    a best response (in the MDP induced by the expert population) against the
    restricted-game optimal reward. The search stops once that best response
    cannot beat the current mixture by more than ``tolerance`` (a duality
    certificate), when the distance falls below ``tolerance``, or after
    ``max_iters`` iterations; the best iterate is returned.
    """
    _check_policy(mfg, expert, "expert")
    if int(max_iters) != max_iters or max_iters < 1:
        raise InvalidInputError(f"max_iters must be a positive integer, got {max_iters}")
    if init is None:
        init = PolicySequence.uniform(*mfg.shape)
    _check_policy(mfg, init, "init")

    expert_flow = population_flow(mfg, expert)
    mean_field = expert_flow.state_dists
    target = expert_flow.state_action_dists.ravel()
    shape = mfg.shape

    vertices = [single_agent_flow(mfg, expert, init).state_action_dists.ravel()]
    records: list[TraceRecord] = []
    best_policy, best_objective = init, np.inf
    converged = False
    for it in range(1, int(max_iters) + 1):
        weights, _ = _closest_mixture(target, np.array(vertices))
        policy = _policy_from_occupancy((weights @ np.array(vertices)).reshape(shape))
        ipm = ipm_witness(expert_flow, single_agent_flow(mfg, expert, policy))
        records.append(TraceRecord(it, policy.probabilities, ipm.witness.values, ipm.distance))
        if ipm.distance < best_objective:
            best_policy, best_objective = policy, ipm.distance
        if ipm.distance <= tolerance:
            converged = True
            break
        f, z, _ = _restricted_witness(target, np.array(vertices))
        f = np.clip(f, -1.0, 1.0).reshape(shape)
        response, response_value = best_response(mfg, mean_field, NonStationaryReward(f))
        if response_value <= z + tolerance:
            converged = True
            break
        vertices.append(single_agent_flow(mfg, expert, response).state_action_dists.ravel())
    return MinMaxTrace("vanilla", records, converged, best_policy, best_objective, best_policy.probabilities)


def deterministic_family(mfg: FiniteMfg, limit: int = DEFAULT_FAMILY_LIMIT) -> list[tuple[tuple, PolicySequence]]:
    """Every deterministic non-stationary policy, keyed by its ``(H*S)`` action tuple."""
    H, S, A = mfg.shape
    if A ** (S * H) > limit:
        raise InvalidInputError(
            f"{A}^({S}*{H}) deterministic policies exceed the limit of {limit}; pass an explicit family"
        )
    return [
        (choice, PolicySequence.deterministic(np.reshape(choice, (H, S)), A))
        for choice in itertools.product(range(A), repeat=S * H)
    ]


def solve_mfc_adversarial(
    mfg: FiniteMfg,
    expert: PolicySequence,
    policy_family: Sequence[tuple[object, PolicySequence]] | None = None,
) -> MinMaxTrace:
    """Minimize sum_n ||mu^(E)E_n - mu^(pi)pi_n||_1 by enumerating ``policy_family``.

    ``policy_family`` is a sequence of ``(params, policy)`` pairs; by default all
    deterministic policies (when there are at most 4096 of them). Ties go to
    the earliest family member.
    """
    _check_policy(mfg, expert, "expert")
    if policy_family is None:
        policy_family = deterministic_family(mfg)
    if len(policy_family) == 0:
        raise InvalidInputError("policy family is empty")
    expert_flow = population_flow(mfg, expert)
    records: list[TraceRecord] = []
    best = None
    for it, (params, policy) in enumerate(policy_family, start=1):
        _check_policy(mfg, policy, "family member")
        ipm = ipm_witness(expert_flow, population_flow(mfg, policy))
        records.append(TraceRecord(it, params, ipm.witness.values, ipm.distance))
        if best is None or ipm.distance < best[2]:
            best = (params, policy, ipm.distance)
    params, policy, objective = best
    return MinMaxTrace("mfc", records, True, policy, objective, params)


def family_minimax_gap(
    mfg: FiniteMfg, expert: PolicySequence, policy_family: Sequence[tuple[object, PolicySequence]]
) -> tuple[float, float]:
    """``(min_pi max_f, max_f min_pi)`` of the MFC objective over a finite family.

    The first value is the enumerated minimum; the second swaps min and max
    (solved as an LP over rewards). Their difference is the empirical duality
    gap of the family.
    """
    expert_flow = population_flow(mfg, expert)
    target = expert_flow.state_action_dists.ravel()
    occs = np.array([population_flow(mfg, p).state_action_dists.ravel() for _, p in policy_family])
    min_max = float(np.abs(occs - target).sum(axis=1).min())
    _, _, max_min = _restricted_witness(target, occs)
    return min_max, max_min
