import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mfg_imitation import (
    AttractorParams,
    InvalidInputError,
    alpha_family,
    alpha_policy,
    best_response,
    build_attractor,
    closed_form_profile,
    exploitability,
    population_flow,
    value,
)


def test_kernel_formulas():
    k = build_attractor(2.0, 3).kernel
    assert k.matrix(np.array([1.0, 0.0]))[0, 0, 1] == 0.0
    assert k.matrix(np.array([0.0, 1.0]))[0, 0, 1] == 1.0
    assert k.matrix(np.array([0.9, 0.1]))[0, 0, 1] == pytest.approx(0.2)
    for rho in (np.array([1.0, 0.0]), np.array([0.4, 0.6])):
        P = k.matrix(rho)
        assert np.all(P[0, 1, 1] == 1.0) and np.all(P[1, :, 1] == 1.0)


def test_rewards():
    r = build_attractor(1.0, 3).reward.matrix(np.array([0.3, 0.7]))
    np.testing.assert_array_equal(r, [[0.0, 0.0], [-1.0, -1.0]])


def test_invalid_parameters():
    with pytest.raises(InvalidInputError):
        build_attractor(-0.1, 3)
    with pytest.raises(InvalidInputError):
        alpha_policy(1.5, 3)
    with pytest.raises(InvalidInputError):
        AttractorParams(1.0, 0, 0.5)


def test_alpha_policy_rows():
    p = alpha_policy(0.25, 4).probabilities
    np.testing.assert_array_equal(p[:, 0], [[0.75, 0.25]] * 4)
    np.testing.assert_array_equal(p[:, 1], [[0.5, 0.5]] * 4)


def test_alpha_family_grid():
    fam = alpha_family(3)
    assert len(fam) == 101 and fam[0][0] == 0.0 and fam[-1][0] == 1.0 and fam[7][0] == 0.07


def test_hand_evaluated_profile():
    cf = closed_form_profile(AttractorParams(1.0, 3, 0.5))
    np.testing.assert_allclose(cf.rho_pop_s1, [0.0, 0.5, 0.875])
    np.testing.assert_allclose(cf.rho_expertpop_s1, [0.0, 0.5, 0.75])
    np.testing.assert_allclose(cf.rho_deviation_s1, [0.0, 0.0, 0.5])
    assert cf.eps_vanilla.max() == pytest.approx(1.75)
    assert cf.eps_mfc.max() == pytest.approx(1.875)
    assert cf.value_gap == pytest.approx(1.375)
    assert cf.nig == pytest.approx(0.875)


def test_equilibrium_profile_is_zero():
    cf = closed_form_profile(AttractorParams(2.0, 10, 0.0))
    assert cf.nig == 0.0 and cf.value_gap == 0.0
    assert not cf.eps_bc.any() and not cf.eps_vanilla.any() and not cf.eps_mfc.any()


def test_worst_policy_values():
    # With L = 0 nothing pulls the deviator in, so the gap is the full H - 1.
    assert closed_form_profile(AttractorParams(0.0, 25, 1.0)).nig == 25 - 1
    # Otherwise the best deviator is dragged into s1 as well, one step behind.
    cf = closed_form_profile(AttractorParams(2.0, 100, 1.0))
    assert cf.value_gap == 99.0
    assert cf.nig == 1.0


def test_value_gap_matches_own_value():
    game = build_attractor(0.5, 6)
    pi = alpha_policy(0.3, 6)
    expert = alpha_policy(0.0, 6)
    v_pi = value(game, pi, population_flow(game, pi))
    v_e = value(game, expert, population_flow(game, expert))
    assert closed_form_profile(AttractorParams(0.5, 6, 0.3)).value_gap == pytest.approx(v_e - v_pi, abs=1e-13)


def test_a0_forever_is_best_deviation():
    for L in (0.01, 0.5, 2.0):
        game = build_attractor(L, 8)
        for a in (0.1, 0.6, 1.0):
            br, _ = best_response(game, population_flow(game, alpha_policy(a, 8)))
            np.testing.assert_array_equal(br.probabilities[:, 0, 0], 1.0)


@settings(max_examples=80, deadline=None)
@given(
    L=st.floats(0.0, 3.0, allow_nan=False),
    H=st.integers(1, 30),
    alpha=st.floats(0.0, 1.0, allow_nan=False),
)
def test_closed_form_matches_generic(L, H, alpha):
    cf = closed_form_profile(AttractorParams(L, H, alpha))
    game = build_attractor(L, H)
    assert cf.nig == pytest.approx(exploitability(game, alpha_policy(alpha, H)), abs=1e-10)
    assert np.all(np.diff(cf.rho_pop_s1) >= 0) and np.all((0 <= cf.rho_pop_s1) & (cf.rho_pop_s1 <= 1))
    assert np.all(np.diff(cf.rho_expertpop_s1) >= 0)
    assert np.array_equal(cf.eps_bc, np.full(H, 2.0 * alpha))


def test_equilibrium_exploitability():
    for L in (0.01, 0.1, 0.5, 1.0, 2.0):
        for H in (3, 25, 100):
            assert exploitability(build_attractor(L, H), alpha_policy(0.0, H)) <= 1e-12
