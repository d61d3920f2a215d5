"""Imitation-error proxies, Nash-imitation-gap bounds and related checks."""

from __future__ import annotations

import dataclasses
import enum

import numpy as np

from .core import (
    FiniteMfg,
    _check_batch,
    _forward,
    PolicySequence,
    TrajectoryBatch,
    _check_policy,
    exploitability,
    population_flow,
    single_agent_flow,
    value,
)
from .errors import InvalidInputError, PreconditionError, UnsupportedSettingError

BOUND_SLACK = 1e-9
EQUILIBRIUM_TOL = 1e-9


class ProxyKind(str, enum.Enum):
    BC = "BC"
    ADV = "ADV"
    VANILLA_ADV = "VANILLA_ADV"
    MFC_ADV = "MFC_ADV"


@dataclasses.dataclass(frozen=True)
class LipschitzConstants:
    """Constants of the Lipschitz / bounded-reward assumptions.

    ``probed_l_r`` and ``probed_l_p`` are empirical lower bounds from random
    distribution pairs; they are informational and never used in bounds.
    """

    l_r: float
    l_p: float
    r_max: float
    probed_l_r: float | None = None
    probed_l_p: float | None = None

    def __post_init__(self):
        if self.l_r < 0 or self.l_p < 0:
            raise InvalidInputError("Lipschitz constants must be nonnegative")
        if not self.r_max > 0:
            raise InvalidInputError("r_max must be positive")


@dataclasses.dataclass(frozen=True, eq=False)
class ErrorProfile:
    kind: ProxyKind
    per_step: np.ndarray

    @property
    def maximum(self) -> float:
        return float(self.per_step.max())

    @property
    def total(self) -> float:
        return float(self.per_step.sum())

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "per_step": self.per_step.tolist(), "maximum": self.maximum}


@dataclasses.dataclass(frozen=True)
class BoundReport:
    nig: float
    bound_values: dict[str, float]
    satisfied: dict[str, bool]

    @property
    def all_satisfied(self) -> bool:
        return all(self.satisfied.values())

    def tightness(self) -> dict[str, float]:
        return {k: (self.nig / v if v > 0 else float("nan")) for k, v in self.bound_values.items()}

    def to_dict(self) -> dict:
        return {
            "nig": self.nig,
            "bounds": dict(self.bound_values),
            "satisfied": dict(self.satisfied),
            "tightness": self.tightness(),
        }


def _l1_per_step(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    return np.abs(p - q).reshape(p.shape[0], -1).sum(axis=1)


def _check_pair(mfg: FiniteMfg, expert: PolicySequence, apprentice: PolicySequence) -> None:
    _check_policy(mfg, expert, "expert")
    _check_policy(mfg, apprentice, "apprentice")


def bc_error(mfg: FiniteMfg, expert: PolicySequence, apprentice: PolicySequence) -> ErrorProfile:
    """Expected l1 gap between action distributions under the expert state flow."""
    _check_pair(mfg, expert, apprentice)
    rho_e = population_flow(mfg, expert).state_dists
    gaps = np.abs(apprentice.probabilities - expert.probabilities).sum(axis=2)
    return ErrorProfile(ProxyKind.BC, (rho_e * gaps).sum(axis=1))


def adv_error(mfg: FiniteMfg, expert: PolicySequence, apprentice: PolicySequence) -> ErrorProfile:
    """Occupancy l1 distance; only defined when the kernel ignores the population."""
    _check_pair(mfg, expert, apprentice)
    if mfg.kernel.population_dependent:
        raise UnsupportedSettingError(
            "the ADV proxy needs a population-independent kernel; use vanilla_adv_error or mfc_adv_error"
        )
    mu_e = population_flow(mfg, expert).state_action_dists
    mu_a = population_flow(mfg, apprentice).state_action_dists
    return ErrorProfile(ProxyKind.ADV, _l1_per_step(mu_e, mu_a))


def vanilla_adv_error(mfg: FiniteMfg, expert: PolicySequence, apprentice: PolicySequence) -> ErrorProfile:
    """Occupancy distance with the population frozen to the expert's."""
    _check_pair(mfg, expert, apprentice)
    mu_ee = single_agent_flow(mfg, expert, expert).state_action_dists
    mu_ea = single_agent_flow(mfg, expert, apprentice).state_action_dists
    return ErrorProfile(ProxyKind.VANILLA_ADV, _l1_per_step(mu_ee, mu_ea))


def mfc_adv_error(mfg: FiniteMfg, expert: PolicySequence, apprentice: PolicySequence) -> ErrorProfile:
    """Distance between the two self-consistent population occupancies."""
    _check_pair(mfg, expert, apprentice)
    mu_e = population_flow(mfg, expert).state_action_dists
    mu_a = population_flow(mfg, apprentice).state_action_dists
    return ErrorProfile(ProxyKind.MFC_ADV, _l1_per_step(mu_e, mu_a))


def batch_error_profiles(mfg: FiniteMfg, expert: PolicySequence, apprentice_probs) -> dict[ProxyKind, np.ndarray]:
    """Per-step BC, vanilla-ADV and MFC-ADV errors for a batch of apprentices.

    ``apprentice_probs`` has shape ``(..., H, S, A)``; each returned array has
    shape ``(..., H)``. Same quantities as the single-policy functions.
    """
    _check_policy(mfg, expert, "expert")
    probs = _check_batch(mfg, apprentice_probs)
    rho_e, mu_e, _ = _forward(mfg, expert.probabilities)
    _, mu_pop, _ = _forward(mfg, probs)
    _, mu_frozen, _ = _forward(mfg, probs, rho_e)
    gaps = np.abs(probs - expert.probabilities).sum(axis=-1)
    return {
        ProxyKind.BC: (rho_e * gaps).sum(axis=-1),
        ProxyKind.VANILLA_ADV: np.abs(mu_frozen - mu_e).sum(axis=(-2, -1)),
        ProxyKind.MFC_ADV: np.abs(mu_pop - mu_e).sum(axis=(-2, -1)),
    }


THM1_BC_LP0 = "thm1_bc_lp0"
THM2_ADV_LP0 = "thm2_adv_lp0"
THM3_BC = "thm3_bc"
THM4_VANILLA_ADV = "thm4_vanilla_adv"
THM5_MFC_ADV = "thm5_mfc_adv"

_LP0_THEOREMS = {THM1_BC_LP0, THM2_ADV_LP0}
_LP_POSITIVE_THEOREMS = {THM3_BC, THM4_VANILLA_ADV, THM5_MFC_ADV}


def _default_theorem(kind: ProxyKind, l_p: float) -> str:
    if l_p == 0:
        # With a population-independent kernel all three occupancy proxies coincide.
        return THM1_BC_LP0 if kind is ProxyKind.BC else THM2_ADV_LP0
    if kind is ProxyKind.ADV:
        raise UnsupportedSettingError("the ADV proxy has no bound when L_P > 0")
    return {ProxyKind.BC: THM3_BC, ProxyKind.VANILLA_ADV: THM4_VANILLA_ADV, ProxyKind.MFC_ADV: THM5_MFC_ADV}[kind]


_THEOREM_PROXY = {
    THM1_BC_LP0: {ProxyKind.BC},
    THM2_ADV_LP0: {ProxyKind.ADV, ProxyKind.VANILLA_ADV, ProxyKind.MFC_ADV},
    THM3_BC: {ProxyKind.BC},
    THM4_VANILLA_ADV: {ProxyKind.VANILLA_ADV},
    THM5_MFC_ADV: {ProxyKind.MFC_ADV},
}


def bound_value(label: str, consts: LipschitzConstants, horizon: int, eps: float) -> float:
    """Right-hand side of one Nash-imitation-gap bound at max proxy error ``eps``."""
    H, l_r, l_p, r_max = horizon, consts.l_r, consts.l_p, consts.r_max
    if label in _LP0_THEOREMS and l_p != 0:
        raise UnsupportedSettingError(f"{label} only holds when L_P = 0 (got {l_p})")
    if label in _LP_POSITIVE_THEOREMS and l_p <= 0:
        raise UnsupportedSettingError(f"{label} requires L_P > 0")
    if label == THM1_BC_LP0:
        return H**2 * (r_max + 2 * l_r) * eps
    if label == THM2_ADV_LP0:
        return (2 * l_r + r_max) * H * eps
    if label == THM3_BC:
        return (H**2 * r_max + 2 * (1 + l_p) ** H * (l_r + r_max) / l_p**2) * eps
    if label == THM4_VANILLA_ADV:
        return (r_max * H + 2 * (1 + l_p) ** H * (r_max + l_r) / l_p) * eps
    if label == THM5_MFC_ADV:
        return ((2 * l_r + r_max) * H + 3 * l_p * r_max * H**2) * eps
    raise InvalidInputError(f"unknown theorem label {label!r}")


def theorem_bounds(
    consts: LipschitzConstants,
    horizon: int,
    errors: list[ErrorProfile],
    nig: float,
    theorems: list[str] | None = None,
) -> BoundReport:
    """Evaluate the bound for each error profile in its regime.

    Without ``theorems`` the regime is picked from ``consts.l_p``. An explicit
    ``theorems`` list is matched against the profiles by proxy kind; asking for
    a theorem outside its regime raises UnsupportedSettingError.
    """
    bounds: dict[str, float] = {}
    if theorems is None:
        for profile in errors:
            label = _default_theorem(profile.kind, consts.l_p)
            bounds[label] = bound_value(label, consts, horizon, profile.maximum)
    else:
        for label in theorems:
            if label not in _THEOREM_PROXY:
                raise InvalidInputError(f"unknown theorem label {label!r}")
            matching = [p for p in errors if p.kind in _THEOREM_PROXY[label]]
            if not matching:
                raise InvalidInputError(f"{label} needs a profile of kind {sorted(k.value for k in _THEOREM_PROXY[label])}")
            bounds[label] = bound_value(label, consts, horizon, matching[0].maximum)
    satisfied = {k: bool(nig <= v + BOUND_SLACK) for k, v in bounds.items()}
    return BoundReport(float(nig), bounds, satisfied)


def _probe_pairs(rng: np.random.Generator, num_states: int, count: int) -> tuple[np.ndarray, np.ndarray]:
    """Half independent Dirichlet pairs, half nearby pairs (local slopes)."""
    n_far = count - count // 2
    p = rng.dirichlet(np.ones(num_states), size=count)
    q = np.empty_like(p)
    q[:n_far] = rng.dirichlet(np.ones(num_states), size=n_far)
    t = rng.uniform(1e-4, 1e-1, size=(count - n_far, 1))
    q[n_far:] = (1 - t) * p[n_far:] + t * rng.dirichlet(np.ones(num_states), size=count - n_far)
    return p, q


def lipschitz_constants(mfg: FiniteMfg, num_probe_pairs: int = 10_000, seed: int = 0) -> LipschitzConstants:
    """Analytic constants for the supported kernel/reward families, plus empirical probes.

    ``r_max`` is the supremum of |r| over all distributions, which dominates
    the expert-flow-restricted value the bounds need.
    """
    rng = np.random.default_rng(seed)
    probed_l_r = probed_l_p = 0.0
    if num_probe_pairs > 0:
        p, q = _probe_pairs(rng, mfg.num_states, num_probe_pairs)
        dist = np.abs(p - q).sum(axis=1)
        keep = dist > 1e-12
        p, q, dist = p[keep], q[keep], dist[keep]
        dk = np.abs(mfg.kernel.matrix(p) - mfg.kernel.matrix(q)).sum(axis=-1).max(axis=(-1, -2))
        dr = np.abs(mfg.reward.matrix(p) - mfg.reward.matrix(q)).max(axis=(-1, -2))
        probed_l_p = float((dk / dist).max(initial=0.0))
        probed_l_r = float((dr / dist).max(initial=0.0))
    return LipschitzConstants(
        l_r=mfg.reward.lipschitz(),
        l_p=mfg.kernel.lipschitz(),
        r_max=max(mfg.reward.sup_abs(), np.finfo(float).tiny),
        probed_l_r=probed_l_r,
        probed_l_p=probed_l_p,
    )


def bc_fit_from_samples(batch: TrajectoryBatch, num_states: int, num_actions: int, horizon: int) -> PolicySequence:
    """Per-(n, s) empirical action frequencies; unvisited rows become uniform."""
    if batch.count == 0:
        raise InvalidInputError("cannot fit a policy from an empty batch")
    if batch.horizon != horizon:
        raise InvalidInputError(f"batch horizon {batch.horizon} != {horizon}")
    if batch.states.max() >= num_states or batch.actions.max() >= num_actions:
        raise InvalidInputError("batch contains out-of-range states or actions")
    counts = batch.empirical_occupancy(num_states, num_actions) * batch.count
    visits = counts.sum(axis=2, keepdims=True)
    probs = np.where(visits > 0, counts / np.maximum(visits, 1), 1.0 / num_actions)
    return PolicySequence(probs)


@dataclasses.dataclass(frozen=True)
class ValueDiffCheck:
    """Both sides of the value-difference decomposition.

    ``signed_lhs`` is ``V(probe, rho^A) - V(A, rho^A)``; ``lhs`` is its absolute
    value. ``terms`` holds the four summed distances (T1, T2, T3, T4).
    """

    lhs: float
    rhs: float
    signed_lhs: float
    terms: tuple[float, float, float, float]

    @property
    def holds(self) -> bool:
        return self.signed_lhs <= self.rhs + BOUND_SLACK

    @property
    def holds_absolute(self) -> bool:
        return self.lhs <= self.rhs + BOUND_SLACK


def value_diff_decomposition_check(
    mfg: FiniteMfg,
    expert: PolicySequence,
    apprentice: PolicySequence,
    probe: PolicySequence,
    consts: LipschitzConstants,
) -> ValueDiffCheck:
    """Evaluate the value-difference bound around an equilibrium expert.

    rhs = 2 L_r T1 + r_max (T2 + T3 + T4) with
    T1 = sum ||rho^A - rho^E||, T2 = sum ||mu^(E)E - mu^(E)A||,
    T3 = sum ||rho^(A)probe - rho^(E)probe||, T4 = sum ||rho^(A)A - rho^(E)A||.
    """
    _check_pair(mfg, expert, apprentice)
    _check_policy(mfg, probe, "probe")
    gap = exploitability(mfg, expert)
    if gap > EQUILIBRIUM_TOL:
        raise PreconditionError(f"expert is not a Nash equilibrium (exploitability {gap:.3g})")

    def l1_sum(p, q):
        return float(np.abs(p - q).sum())

    flow_e = population_flow(mfg, expert)
    flow_a = population_flow(mfg, apprentice)
    t1 = l1_sum(flow_a.state_dists, flow_e.state_dists)
    t2 = l1_sum(flow_e.state_action_dists, single_agent_flow(mfg, expert, apprentice).state_action_dists)
    t3 = l1_sum(
        single_agent_flow(mfg, apprentice, probe).state_dists,
        single_agent_flow(mfg, expert, probe).state_dists,
    )
    t4 = l1_sum(flow_a.state_dists, single_agent_flow(mfg, expert, apprentice).state_dists)
    rhs = 2 * consts.l_r * t1 + consts.r_max * (t2 + t3 + t4)
    signed = value(mfg, probe, flow_a) - value(mfg, apprentice, flow_a)
    return ValueDiffCheck(abs(signed), rhs, signed, (t1, t2, t3, t4))
