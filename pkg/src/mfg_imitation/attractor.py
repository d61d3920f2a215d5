"""The two-state "attractor" benchmark and its closed-form recursions.

State s1 absorbs and costs -1 per step; state s0 is free. From s0, action a1
falls into s1 surely while a0 falls with probability ``min(1, L * rho(s1))``.
Playing a0 forever is a Nash equilibrium.

``closed_form_profile`` evaluates the scalar recursions for the one-parameter
family ``pi^alpha(a1|s0) = alpha`` directly and never calls into
:mod:`mfg_imitation.core`, so it serves as an independent oracle for the
generic pipeline.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .core import AttractorKernel, CongestionReward, FiniteMfg, PolicySequence
from .errors import InvalidInputError

ATTRACTOR_REWARD = ((0.0, 0.0), (-1.0, -1.0))


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 <= alpha <= 1.0:
        raise InvalidInputError(f"alpha must lie in [0, 1], got {alpha}")
    return alpha


def _check_horizon(horizon) -> int:
    if int(horizon) != horizon or horizon < 1:
        raise InvalidInputError(f"horizon must be a positive integer, got {horizon}")
    return int(horizon)


@dataclasses.dataclass(frozen=True)
class AttractorParams:
    lipschitz_l: float
    horizon: int
    alpha: float

    def __post_init__(self):
        if not self.lipschitz_l >= 0:
            raise InvalidInputError(f"L must be >= 0, got {self.lipschitz_l}")
        object.__setattr__(self, "horizon", _check_horizon(self.horizon))
        object.__setattr__(self, "alpha", _check_alpha(self.alpha))


def build_attractor(lipschitz_l: float, horizon: int) -> FiniteMfg:
    if not lipschitz_l >= 0:
        raise InvalidInputError(f"L must be >= 0, got {lipschitz_l}")
    return FiniteMfg(
        num_states=2,
        num_actions=2,
        horizon=_check_horizon(horizon),
        initial_distribution=np.array([1.0, 0.0]),
        kernel=AttractorKernel(lipschitz_l),
        reward=CongestionReward(ATTRACTOR_REWARD, 0.0),
    )


def alpha_policy(alpha: float, horizon: int) -> PolicySequence:
    """Stationary policy playing a1 in s0 with probability ``alpha``; uniform in s1."""
    alpha = _check_alpha(alpha)
    table = np.array([[1.0 - alpha, alpha], [0.5, 0.5]])
    return PolicySequence.stationary(table, _check_horizon(horizon))


def alpha_family(horizon: int, step: float = 0.01) -> list[tuple[float, PolicySequence]]:
    """``(alpha, policy)`` pairs on a uniform grid over [0, 1]."""
    count = int(round(1.0 / step))
    alphas = [round(k * step, 12) for k in range(count + 1)]
    return [(a, alpha_policy(a, horizon)) for a in alphas]


@dataclasses.dataclass(frozen=True, eq=False)
class ClosedFormProfile:
    """Closed-form quantities for ``pi^alpha`` (all arrays of length H).

    rho_pop_s1        mass in s1 of the population playing pi^alpha
    rho_expertpop_s1  mass in s1 of a pi^alpha agent among the expert population
    rho_deviation_s1  mass in s1 of the best deviator (a0 forever) among the pi^alpha population
    value_gap         V(pi^E, rho^E) - V(pi^alpha, rho^alpha) = sum(rho_pop_s1)
    nig               exploitability of pi^alpha = sum(rho_pop_s1 - rho_deviation_s1)
    """

    params: AttractorParams
    rho_pop_s1: np.ndarray
    rho_expertpop_s1: np.ndarray
    rho_deviation_s1: np.ndarray
    eps_bc: np.ndarray
    eps_vanilla: np.ndarray
    eps_mfc: np.ndarray
    value_gap: float
    nig: float


def closed_form_profile(params: AttractorParams) -> ClosedFormProfile:
    L, H, a = params.lipschitz_l, params.horizon, params.alpha
    pop = [0.0]
    expert_pop = [0.0]
    deviation = [0.0]
    for _ in range(H - 1):
        x, y, z = pop[-1], expert_pop[-1], deviation[-1]
        pull = min(1.0, L * x)
        pop.append(x + (1.0 - x) * (a + (1.0 - a) * pull))
        expert_pop.append(y + (1.0 - y) * a)
        # a0 is optimal in s0 whatever the crowd does: it never falls more often than a1.
        deviation.append(z + (1.0 - z) * pull)
    pop, expert_pop, deviation = np.array(pop), np.array(expert_pop), np.array(deviation)
    return ClosedFormProfile(
        params=params,
        rho_pop_s1=pop,
        rho_expertpop_s1=expert_pop,
        rho_deviation_s1=deviation,
        eps_bc=np.full(H, 2.0 * a),
        eps_vanilla=2.0 * (a + expert_pop * (1.0 - a)),
        eps_mfc=2.0 * (a + pop * (1.0 - a)),
        value_gap=float(pop.sum()),
        nig=float(pop.sum() - deviation.sum()),
    )
