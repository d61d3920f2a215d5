"""Attractor sweeps, bound verification and self-checks.

Everything here composes the library modules; the CLI is a thin wrapper.
Sweep rows are computed twice, once by the closed-form recursions and once
by the generic pipeline, and carry the largest disagreement between them.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
from collections.abc import Callable, Sequence
from pathlib import Path

import numpy as np

from .attractor import AttractorParams, alpha_policy, build_attractor, closed_form_profile
from .core import (
    CongestionReward,
    FiniteMfg,
    LinearCouplingKernel,
    NonStationaryReward,
    PolicySequence,
    TabularKernel,
    _forward,
    batch_exploitability,
    batch_population_flow,
    best_response,
    exploitability,
    population_flow,
    value,
)
from .errors import InvalidInputError
from .ipm import ipm_witness
from .metrics import (
    BOUND_SLACK,
    THM1_BC_LP0,
    THM2_ADV_LP0,
    THM3_BC,
    THM4_VANILLA_ADV,
    THM5_MFC_ADV,
    LipschitzConstants,
    ProxyKind,
    adv_error,
    batch_error_profiles,
    bc_error,
    bound_value,
    lipschitz_constants,
    value_diff_decomposition_check,
)

DEFAULT_LIPSCHITZ = (0.01, 0.1, 0.5, 1.0, 2.0)
DEFAULT_HORIZONS = (3, 25, 50, 75, 100)
AGREEMENT_TOL = 1e-10
FORMATS = ("csv", "json")

AttractorBuilder = Callable[[float, int], FiniteMfg]


def default_alphas(step: float = 0.01) -> tuple[float, ...]:
    count = int(round(1.0 / step))
    return tuple(round(k * step, 12) for k in range(count + 1))


def _fmt(x) -> str:
    return format(x, ".17g") if isinstance(x, float) else str(x)


# ---------------------------------------------------------------------------
# Sweep
# ---------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class SweepConfig:
    alphas: tuple[float, ...] = default_alphas()
    lipschitz_values: tuple[float, ...] = DEFAULT_LIPSCHITZ
    horizons: tuple[int, ...] = DEFAULT_HORIZONS
    output_path: str | None = None
    format: str = "csv"
    seed: int = 0

    def __post_init__(self):
        for name in ("alphas", "lipschitz_values", "horizons"):
            values = tuple(getattr(self, name))
            if not values:
                raise InvalidInputError(f"{name} must be nonempty")
            object.__setattr__(self, name, values)
        if any(not 0.0 <= a <= 1.0 for a in self.alphas):
            raise InvalidInputError("alphas must lie in [0, 1]")
        if any(not L >= 0 for L in self.lipschitz_values):
            raise InvalidInputError("Lipschitz values must be >= 0")
        if any(int(H) != H or H < 1 for H in self.horizons):
            raise InvalidInputError("horizons must be positive integers")
        object.__setattr__(self, "horizons", tuple(int(H) for H in self.horizons))
        if self.format not in FORMATS:
            raise InvalidInputError(f"format must be one of {FORMATS}, got {self.format!r}")


SWEEP_COLUMNS = (
    "alpha",
    "L",
    "H",
    "eps_bc_max",
    "eps_vanilla_max",
    "eps_mfc_max",
    "nig",
    "value_gap",
    "max_deviation",
    "agree",
)


@dataclasses.dataclass(frozen=True)
class SweepRow:
    """One (alpha, L, H) grid point.

    ``nig`` is the exploitability of pi^alpha; ``value_gap`` is the expert's
    value minus pi^alpha's own value. ``max_deviation`` is the largest gap
    between closed-form and generic values over every per-step error, nig and
    value_gap.
    """

    alpha: float
    L: float
    H: int
    eps_bc_max: float
    eps_vanilla_max: float
    eps_mfc_max: float
    nig: float
    value_gap: float
    max_deviation: float

    @property
    def agree(self) -> bool:
        return self.max_deviation <= AGREEMENT_TOL

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["agree"] = self.agree
        return d


def sweep_cell(
    lipschitz_l: float, horizon: int, alphas: Sequence[float], builder: AttractorBuilder = build_attractor
) -> list[SweepRow]:
    """All alpha rows of one (L, H) cell; generic values are computed in one batch."""
    mfg = builder(lipschitz_l, horizon)
    expert = alpha_policy(0.0, horizon)
    probs = np.stack([alpha_policy(a, horizon).probabilities for a in alphas])
    errors = batch_error_profiles(mfg, expert, probs)
    nig = batch_exploitability(mfg, probs)
    rho, mu = batch_population_flow(mfg, probs)
    own_value = np.sum(mu * mfg.reward.matrix(rho), axis=(-3, -2, -1))
    expert_value = value(mfg, expert, population_flow(mfg, expert))
    value_gap = expert_value - own_value

    rows = []
    for k, alpha in enumerate(alphas):
        cf = closed_form_profile(AttractorParams(lipschitz_l, horizon, alpha))
        deviation = max(
            np.abs(cf.eps_bc - errors[ProxyKind.BC][k]).max(),
            np.abs(cf.eps_vanilla - errors[ProxyKind.VANILLA_ADV][k]).max(),
            np.abs(cf.eps_mfc - errors[ProxyKind.MFC_ADV][k]).max(),
            abs(cf.nig - nig[k]),
            abs(cf.value_gap - value_gap[k]),
        )
        rows.append(
            SweepRow(
                alpha=float(alpha),
                L=float(lipschitz_l),
                H=int(horizon),
                eps_bc_max=float(cf.eps_bc.max()),
                eps_vanilla_max=float(cf.eps_vanilla.max()),
                eps_mfc_max=float(cf.eps_mfc.max()),
                nig=cf.nig,
                value_gap=cf.value_gap,
                max_deviation=float(deviation),
            )
        )
    return rows


def run_sweep(config: SweepConfig, builder: AttractorBuilder = build_attractor) -> list[SweepRow]:
    """Rows ordered alpha-major, then L, then H (in config order)."""
    cells = {(L, H): sweep_cell(L, H, config.alphas, builder) for L in config.lipschitz_values for H in config.horizons}
    return [
        cells[(L, H)][k]
        for k in range(len(config.alphas))
        for L in config.lipschitz_values
        for H in config.horizons
    ]


def _write_text(path, text: str) -> None:
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise InvalidInputError(f"cannot write {path}: {exc.strerror or exc}") from None


def rows_to_csv(rows: Sequence[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in columns])
    return buf.getvalue()


def write_records(records: Sequence[dict], columns: Sequence[str], path, fmt: str) -> None:
    if fmt == "csv":
        _write_text(path, rows_to_csv(records, columns))
    elif fmt == "json":
        _write_text(path, json.dumps([{c: r[c] for c in columns} for r in records], indent=1) + "\n")
    else:
        raise InvalidInputError(f"format must be one of {FORMATS}, got {fmt!r}")


def write_sweep(rows: Sequence[SweepRow], path, fmt: str = "csv") -> None:
    write_records([r.to_dict() for r in rows], SWEEP_COLUMNS, path, fmt)


# ---------------------------------------------------------------------------
# NIG-versus-error curves
# ---------------------------------------------------------------------------


def nig_at_eps(eps: np.ndarray, nig: np.ndarray, x: float) -> float:
    """Linear interpolation of ``nig`` at error level ``x`` along a sweep.

    ``eps`` must be nondecreasing; dips below 1e-12 (roundoff on plateaus) are
    flattened. On flat stretches of ``eps`` the first point reaching ``x`` is
    used.
    """
    eps = np.asarray(eps, dtype=float)
    nig = np.asarray(nig, dtype=float)
    if np.any(np.diff(eps) < -1e-12):
        raise InvalidInputError("error levels must be nondecreasing along the sweep")
    eps = np.maximum.accumulate(eps)
    if not eps[0] <= x <= eps[-1]:
        raise InvalidInputError(f"error level {x} outside [{eps[0]}, {eps[-1]}]")
    i = int(np.searchsorted(eps, x, side="left"))
    if eps[i] == x:
        return float(nig[i])
    t = (x - eps[i - 1]) / (eps[i] - eps[i - 1])
    return float(nig[i - 1] + t * (nig[i] - nig[i - 1]))


CURVE_FIELDS = {
    ProxyKind.BC: "eps_bc_max",
    ProxyKind.VANILLA_ADV: "eps_vanilla_max",
    ProxyKind.MFC_ADV: "eps_mfc_max",
}


@dataclasses.dataclass(frozen=True)
class OrderingReport:
    """Worst margins of MFC-ADV <= vanilla-ADV <= BC for one (L, H) cell.

    ``mfc_over_vanilla`` is the largest nig_mfc(eps) - nig_vanilla(eps) over
    the common error levels (positive means the ordering fails), likewise
    ``vanilla_over_bc``. ``worst_eps`` records where each maximum occurs.
    """

    L: float
    H: int
    ordinate: str
    mfc_over_vanilla: float
    vanilla_over_bc: float
    worst_eps: tuple[float, float]
    max_curve_gap: float

    @property
    def ok(self) -> bool:
        return self.mfc_over_vanilla <= BOUND_SLACK and self.vanilla_over_bc <= BOUND_SLACK


def _cells(rows: Sequence[SweepRow]) -> dict[tuple[float, int], list[SweepRow]]:
    cells: dict[tuple[float, int], list[SweepRow]] = {}
    for r in rows:
        cells.setdefault((r.L, r.H), []).append(r)
    return {k: sorted(v, key=lambda r: r.alpha) for k, v in cells.items()}


def ordering_reports(rows: Sequence[SweepRow], ordinate: str = "nig") -> list[OrderingReport]:
    """Compare the three interpolated curves at every common error level.

    Common levels are all sweep error values that every proxy attains, i.e.
    lie within ``[0, min of the three maxima]``. ``ordinate`` is ``"nig"`` or
    ``"value_gap"``.
    """
    if ordinate not in ("nig", "value_gap"):
        raise InvalidInputError(f"ordinate must be 'nig' or 'value_gap', got {ordinate!r}")
    reports = []
    for (L, H), cell in _cells(rows).items():
        y = np.array([getattr(r, ordinate) for r in cell])
        curves = {
            k: np.maximum.accumulate([getattr(r, f) for r in cell]) for k, f in CURVE_FIELDS.items()
        }
        top = min(c.max() for c in curves.values())
        low = max(c.min() for c in curves.values())
        levels = np.unique(np.concatenate([c[(c >= low) & (c <= top)] for c in curves.values()]))
        if levels.size == 0:
            continue
        at = {k: np.array([nig_at_eps(c, y, x) for x in levels]) for k, c in curves.items()}
        d1 = at[ProxyKind.MFC_ADV] - at[ProxyKind.VANILLA_ADV]
        d2 = at[ProxyKind.VANILLA_ADV] - at[ProxyKind.BC]
        reports.append(
            OrderingReport(
                L=L,
                H=H,
                ordinate=ordinate,
                mfc_over_vanilla=float(d1.max()),
                vanilla_over_bc=float(d2.max()),
                worst_eps=(float(levels[d1.argmax()]), float(levels[d2.argmax()])),
                max_curve_gap=float(np.abs(d1).max()),
            )
        )
    return reports


# ---------------------------------------------------------------------------
# Random instances
# ---------------------------------------------------------------------------


def random_policy(rng: np.random.Generator, shape: tuple[int, int, int]) -> PolicySequence:
    H, S, A = shape
    probs = rng.dirichlet(np.ones(A), size=(H, S))
    # Occasionally make some rows deterministic so ties and corners get exercised.
    mask = rng.random((H, S)) < 0.2
    probs[mask] = np.eye(A)[rng.integers(A, size=int(mask.sum()))]
    return PolicySequence(probs)


def random_tabular_game(
    rng: np.random.Generator,
    max_states: int = 3,
    max_actions: int = 3,
    max_horizon: int = 4,
    congestion: float | None = None,
) -> FiniteMfg:
    """Population-independent kernel; reward ``R - c rho(s)`` with ``c`` random unless given."""
    S = int(rng.integers(2, max_states + 1))
    A = int(rng.integers(2, max_actions + 1))
    H = int(rng.integers(1, max_horizon + 1))
    if congestion is None:
        congestion = 0.0 if rng.random() < 0.3 else float(rng.uniform(0.0, 0.5))
    return FiniteMfg(
        num_states=S,
        num_actions=A,
        horizon=H,
        initial_distribution=rng.dirichlet(np.ones(S)),
        kernel=TabularKernel(rng.dirichlet(np.ones(S), size=(S, A))),
        reward=CongestionReward(rng.uniform(-1.0, 1.0, size=(S, A)), congestion),
    )


def random_coupled_game(
    rng: np.random.Generator, max_states: int = 3, max_actions: int = 3, max_horizon: int = 4
) -> FiniteMfg:
    """Like ``random_tabular_game`` but with a population-dependent linear-coupling kernel."""
    base = random_tabular_game(rng, max_states, max_actions, max_horizon)
    S, A = base.num_states, base.num_actions
    kernel = LinearCouplingKernel(
        rng.dirichlet(np.ones(S), size=(S, A)),
        rng.dirichlet(np.ones(S), size=(S, A)),
        rng.uniform(0.0, 1.0, size=S),
    )
    return dataclasses.replace(base, kernel=kernel)


def equilibrium_by_best_response(mfg: FiniteMfg, max_rounds: int = 100) -> PolicySequence | None:
    """Iterate pi <- BR(flow of pi) from the uniform policy.

    Returns the fixed point when one is reached with exploitability at most
    1e-9, otherwise None. Population-independent kernels with weak congestion
    usually settle within a few rounds.
    """
    policy = PolicySequence.uniform(*mfg.shape)
    for _ in range(max_rounds):
        nxt, _ = best_response(mfg, population_flow(mfg, policy))
        if nxt == policy:
            return policy if exploitability(mfg, policy) <= 1e-9 else None
        policy = nxt
    return None


def brute_force_best_value(
    mfg: FiniteMfg, mean_field, reward_override: NonStationaryReward | None = None, chunk: int = 8192
) -> float:
    """Best value over every deterministic non-stationary policy, by forward evaluation."""
    H, S, A = mfg.shape
    mf = population_flow(mfg, PolicySequence.uniform(H, S, A)).state_dists if mean_field is None else mean_field
    mf = np.asarray(getattr(mf, "state_dists", mf), dtype=float)
    rewards = mfg.reward.matrix(mf) if reward_override is None else reward_override.values
    total = A ** (S * H)
    powers = A ** np.arange(S * H - 1, -1, -1)
    best = -np.inf
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total))
        digits = (idx[:, None] // powers) % A
        probs = np.eye(A)[digits].reshape(-1, H, S, A)
        _, mu, _ = _forward(mfg, probs, mf)
        best = max(best, float(np.sum(mu * rewards, axis=(-3, -2, -1)).max()))
    return best


# ---------------------------------------------------------------------------
# Bound verification
# ---------------------------------------------------------------------------

BOUND_COLUMNS = (
    "source",
    "instance",
    "alpha",
    "L",
    "H",
    "nig",
    "theorem",
    "eps",
    "bound",
    "ratio",
    "satisfied",
)


@dataclasses.dataclass(frozen=True)
class BoundRow:
    source: str
    instance: int
    alpha: float
    L: float
    H: int
    nig: float
    theorem: str
    eps: float
    bound: float

    @property
    def satisfied(self) -> bool:
        return self.nig <= self.bound + BOUND_SLACK

    @property
    def ratio(self) -> float:
        return self.nig / self.bound if self.bound > 0 else float("nan")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["ratio"] = self.ratio
        d["satisfied"] = self.satisfied
        return d


def attractor_bound_rows(rows: Sequence[SweepRow]) -> list[BoundRow]:
    """Thms for L_P > 0 (or the L_P = 0 pair when L = 0) on sweep rows.

    Attractor constants: L_r = 0, r_max = 1, L_P = L.
    """
    out = []
    for r in rows:
        consts = LipschitzConstants(l_r=0.0, l_p=r.L, r_max=1.0)
        if r.L > 0:
            pairs = ((THM3_BC, r.eps_bc_max), (THM4_VANILLA_ADV, r.eps_vanilla_max), (THM5_MFC_ADV, r.eps_mfc_max))
        else:
            pairs = ((THM1_BC_LP0, r.eps_bc_max), (THM2_ADV_LP0, r.eps_mfc_max))
        for label, eps in pairs:
            out.append(BoundRow("attractor", 0, r.alpha, r.L, r.H, r.nig, label, eps, bound_value(label, consts, r.H, eps)))
    return out


def tabular_bound_rows(num_games: int = 100, pairs_per_game: int = 3, seed: int = 0) -> list[BoundRow]:
    """Thms 1-2 on random population-independent games around equilibrium experts.

    Games whose best-response iteration does not settle are redrawn. Each
    apprentice mixes the expert with a random policy.
    """
    rng = np.random.default_rng(seed)
    out = []
    game = 0
    while game < num_games:
        mfg = random_tabular_game(rng, max_horizon=5)
        expert = equilibrium_by_best_response(mfg)
        if expert is None:
            continue
        consts = lipschitz_constants(mfg, num_probe_pairs=0)
        for _ in range(pairs_per_game):
            w = rng.random()
            mix = w * expert.probabilities + (1 - w) * random_policy(rng, mfg.shape).probabilities
            apprentice = PolicySequence(mix / mix.sum(axis=2, keepdims=True))
            nig = exploitability(mfg, apprentice)
            for label, profile in (
                (THM1_BC_LP0, bc_error(mfg, expert, apprentice)),
                (THM2_ADV_LP0, adv_error(mfg, expert, apprentice)),
            ):
                eps = profile.maximum
                out.append(
                    BoundRow("tabular", game, float("nan"), 0.0, mfg.horizon, nig, label, eps,
                             bound_value(label, consts, mfg.horizon, eps))
                )
        game += 1
    return out


def write_bound_rows(rows: Sequence[BoundRow], path, fmt: str = "csv") -> None:
    write_records([r.to_dict() for r in rows], BOUND_COLUMNS, path, fmt)


# ---------------------------------------------------------------------------
# Self-check
# ---------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class SuiteResult:
    name: str
    passed: bool
    metric: float
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def _grid_suite(builder: AttractorBuilder) -> SuiteResult:
    rows = run_sweep(SweepConfig(), builder)
    worst = max(r.max_deviation for r in rows)
    bad = sum(not r.agree for r in rows)
    return SuiteResult(
        "grid equivalence", bad == 0, worst, f"{len(rows)} rows, max deviation {worst:.3g}, {bad} disagreeing"
    )


def _ipm_suite(rng: np.random.Generator, count: int = 200) -> SuiteResult:
    worst = 0.0
    for _ in range(count):
        mfg = random_tabular_game(rng)
        pe, pp = random_policy(rng, mfg.shape), random_policy(rng, mfg.shape)
        fe, fp = population_flow(mfg, pe), population_flow(mfg, pp)
        res = ipm_witness(fe, fp)
        gap = value(mfg, pe, fe, res.witness) - value(mfg, pp, fp, res.witness)
        worst = max(worst, abs(gap - res.distance))
    return SuiteResult("IPM identity", worst <= 1e-12, worst, f"{count} pairs, max |witness gap - distance| {worst:.3g}")


def _best_response_suite(rng: np.random.Generator, count: int = 30) -> SuiteResult:
    worst = 0.0
    for k in range(count):
        mfg = random_coupled_game(rng) if k % 2 else random_tabular_game(rng)
        flow = population_flow(mfg, random_policy(rng, mfg.shape))
        _, v = best_response(mfg, flow)
        worst = max(worst, abs(v - brute_force_best_value(mfg, flow)))
    return SuiteResult("best response", worst <= 1e-12, worst, f"{count} games, max |DP - enumeration| {worst:.3g}")


def _decomposition_suite(rng: np.random.Generator, builder: AttractorBuilder, count: int = 100) -> SuiteResult:
    failures = absolute_failures = 0
    for _ in range(count):
        mfg = builder(float(rng.uniform(0.0, 3.0)), int(rng.integers(2, 11)))
        expert = alpha_policy(0.0, mfg.horizon)
        check = value_diff_decomposition_check(
            mfg,
            expert,
            random_policy(rng, mfg.shape),
            random_policy(rng, mfg.shape),
            lipschitz_constants(mfg, num_probe_pairs=0),
        )
        failures += not check.holds
        absolute_failures += not check.holds_absolute
    return SuiteResult(
        "value-difference decomposition",
        failures == 0,
        float(failures),
        f"{count} pairs, {failures} signed violations ({absolute_failures} of the absolute form)",
    )


def run_selfcheck(builder: AttractorBuilder = build_attractor, seed: int = 0) -> list[SuiteResult]:
    """Run all self-check suites; ``builder`` lets tests inject a broken attractor."""
    rng = np.random.default_rng(seed)
    results = [_grid_suite(builder), _ipm_suite(rng), _best_response_suite(rng)]
    try:
        results.append(_decomposition_suite(rng, builder))
    except Exception as exc:  # a broken builder may not even yield an equilibrium expert
        results.append(SuiteResult("value-difference decomposition", False, float("nan"), f"error: {exc}"))
    return results
