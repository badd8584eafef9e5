from fractions import Fraction

import numpy as np
import pytest

from tpil.demos import ObservationStore
from tpil.errors import DegenerateStack, InvalidParam
from tpil.matching import match_features, solve_optimal_policy
from tpil.mdp import build_gridworld
from tpil.perspectives import Perspective, basis_perspectives
from tpil.theory import (
    build_counterexample,
    counterexample_marginals,
    counterexample_value,
    theorem1_report,
)


def test_counterexample_structure():
    c = build_counterexample()
    assert c.features == ((2, 2), (1, 1), (0, 0), (0, 1), (1, 0))
    for a in range(2):
        assert sum(c.next_dist(a)) == 1
    assert c.horizon == 2 and c.start == 0
    m = c.as_tabular(0.3)
    assert np.allclose(m.transitions.sum(axis=2), 1.0)


def test_counterexample_values():
    assert counterexample_value(1) == Fraction(1, 2)
    assert counterexample_value(0) == 0
    assert counterexample_value({"left": Fraction(1, 4), "right": Fraction(3, 4)}) == Fraction(1, 8)
    for p in (Fraction(1, 3), 0.37, 0.9):
        assert counterexample_value(p) == Fraction(p) / 2
    with pytest.raises(InvalidParam):
        counterexample_value(1.5)
    with pytest.raises(InvalidParam):
        counterexample_value({"left": 0.5, "right": 0.4})


def test_listed_marginals_are_one_half():
    for p in (0, 1, Fraction(1, 7), 0.37):
        m = counterexample_marginals(p)
        assert m[0][(2, 1)] == m[0][(2, 0)] == Fraction(1, 2)
        assert m[1][(2, 1)] == m[1][(2, 0)] == Fraction(1, 2)
        assert sum(m[0].values()) == 1


def test_marginals_policy_invariant_but_values_differ():
    left, right = counterexample_marginals(1), counterexample_marginals(0)
    assert left == right
    assert counterexample_marginals(0.37) == counterexample_marginals(0)
    assert counterexample_value(1) != counterexample_value(0)


@pytest.fixture(scope="module")
def planned():
    gw = build_gridworld(10, 4, 2, rng=11)
    mu_E, J = solve_optimal_policy(gw.mdp, gw.reward)
    return gw, mu_E, J


def _matched(gw, ps, psi_list):
    store = ObservationStore.for_perspectives(ps)
    for i, psi in psi_list:
        store.record(i, ps[i].matrix @ psi)
    return match_features(gw.mdp, gw.features, ps, store).occupancy


def test_report_full_rank_exact(planned):
    gw, mu_E, J = planned
    ps = basis_perspectives(4)
    psi = gw.features(mu_E)
    mu_L = _matched(gw, ps, [(i, psi) for i in range(4)])
    rep = theorem1_report(gw, ps, mu_E, mu_L)
    assert rep.holds
    assert rep.rho == pytest.approx(0.0, abs=1e-10)
    assert rep.actual_gap * rep.w_scale <= 1e-5 * J
    assert rep.bound_value == pytest.approx(rep.epsilon / rep.sigma)


def test_report_reward_in_kernel(planned):
    gw, mu_E, _ = planned
    import dataclasses

    gw2 = dataclasses.replace(gw, reward_weights=np.array([0.0, 1.0, 0.0, 0.0]))
    e1 = [Perspective([1.0, 0, 0, 0], "e1")]
    mu_L = _matched(gw2, e1, [(0, gw2.features(mu_E))])
    rep = theorem1_report(gw2, e1, mu_E, mu_L)
    assert rep.rho == pytest.approx(1.0)
    assert rep.holds
    assert rep.rho * rep.diam_bound >= rep.epsilon / rep.sigma


def test_report_rescales_large_weights(planned):
    gw, mu_E, _ = planned
    ps = basis_perspectives(4)[:2]
    mu_L = _matched(gw, ps, [(0, gw.features(mu_E) * 0.5), (1, gw.features(mu_E))])
    rep = theorem1_report(gw, ps, mu_E, mu_L, diam_bound=1.0)
    assert rep.w_scale == pytest.approx(max(1.0, np.linalg.norm(gw.reward_weights)))
    assert rep.holds == (rep.actual_gap <= rep.bound_value + 1e-6)


def test_report_degenerate(planned):
    gw, mu_E, _ = planned
    with pytest.raises(DegenerateStack):
        theorem1_report(gw, [Perspective([0.0] * 4, "z")], mu_E, mu_E, diam_bound=1.0)
