import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_mdp
from tpil.errors import DimensionMismatch, Infeasible, SolverError, Unbounded
from tpil.lp import FEAS_TOL, LinearProgram, solve_lp
from tpil.matching import solve_optimal_policy
from tpil.mdp import value_iteration

BACKENDS = ["ipm", "highs"]


@pytest.mark.parametrize("backend", BACKENDS)
def test_single_bound(backend):
    sol = solve_lp(LinearProgram([1.0], A_ub=[[-1.0]], b_ub=[-3.0]), backend)
    assert sol.x == pytest.approx([3.0], abs=1e-7)
    assert sol.objective == pytest.approx(3.0, abs=1e-7)


@pytest.mark.parametrize("backend", BACKENDS)
def test_infeasible(backend):
    lp = LinearProgram([0.0], A_ub=[[1.0], [-1.0]], b_ub=[0.0, -1.0], lb=-np.inf)
    with pytest.raises(Infeasible):
        solve_lp(lp, backend)


@pytest.mark.parametrize("backend", BACKENDS)
def test_unbounded(backend):
    with pytest.raises(Unbounded):
        solve_lp(LinearProgram([-1.0, 0.0], A_eq=[[0.0, 1.0]], b_eq=[1.0]), backend)


def test_free_variables_and_shifted_bounds():
    # min x0 + x1, x0 free with x0 >= -2 via a row, x1 >= 1.5
    lp = LinearProgram([1.0, 1.0], A_ub=[[-1.0, 0.0]], b_ub=[2.0], lb=[-np.inf, 1.5])
    sol = solve_lp(lp)
    assert sol.x == pytest.approx([-2.0, 1.5], abs=1e-7)


def test_bad_inputs():
    with pytest.raises(DimensionMismatch):
        LinearProgram([1.0, 2.0], A_eq=[[1.0]], b_eq=[1.0])
    with pytest.raises(DimensionMismatch):
        LinearProgram([1.0], A_eq=[[1.0]])
    with pytest.raises(SolverError):
        solve_lp(LinearProgram([1.0]), backend="simplex")


def test_two_state_flow_polytope_matches_value_iteration():
    T = np.zeros((2, 2, 2))
    T[0, 0, 0] = T[1, 0, 1] = 1.0  # stay
    T[0, 1, 1] = T[1, 1, 0] = 1.0  # switch
    from tpil.mdp import TabularMdp

    m = TabularMdp(T, [0.5, 0.5], 0.3)
    r = np.array([0.0, 0.2, 1.0, 0.0])
    _, J = solve_optimal_policy(m, r)
    V, _ = value_iteration(m, r)
    assert J == pytest.approx(m.initial_dist @ V, abs=1e-6)


def test_absorbing_reward_closed_form():
    from tpil.mdp import TabularMdp

    T = np.zeros((2, 1, 2))
    T[:, 0, 1] = 1.0  # state 1 absorbs, reached in one step
    m = TabularMdp(T, [1.0, 0.0], 0.3)
    _, J = solve_optimal_policy(m, [0.0, 1.0])
    assert J == pytest.approx(0.3 / 0.7, abs=1e-9)


def test_zero_reward(grid):
    mu, J = solve_optimal_policy(grid.mdp, np.zeros(400))
    assert abs(J) < 1e-12
    assert np.abs(grid.mdp.flow_matrix @ mu - grid.mdp.initial_dist).max() < 1e-7


def test_gridworld_planning_matches_value_iteration(grid):
    _, J = solve_optimal_policy(grid.mdp, grid.reward)
    V, _ = value_iteration(grid.mdp, grid.reward)
    assert J == pytest.approx(grid.mdp.initial_dist @ V, abs=1e-6)


def _random_lp(rng, n, m_eq, m_ub):
    x0 = rng.random(n)
    A_eq = rng.normal(size=(m_eq, n))
    A_ub = rng.normal(size=(m_ub, n))
    b_ub = A_ub @ x0 + rng.random(m_ub)
    # bounded: add sum(x) <= n
    A_ub = np.vstack([A_ub, np.ones(n)])
    b_ub = np.append(b_ub, n)
    return LinearProgram(rng.normal(size=n), A_eq, A_eq @ x0, A_ub, b_ub)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 25), st.integers(0, 5), st.integers(0, 15))
def test_ipm_agrees_with_highs(seed, n, m_eq, m_ub):
    lp = _random_lp(np.random.default_rng(seed), n, min(m_eq, n - 1), m_ub)
    ours, ref = solve_lp(lp, "ipm"), solve_lp(lp, "highs")
    assert lp.violation(ours.x) <= FEAS_TOL
    assert ours.objective == pytest.approx(ref.objective, abs=1e-7 * (1 + abs(ref.objective)))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 8), st.integers(1, 3), st.floats(0.1, 0.9))
def test_planning_matches_value_iteration(seed, S, A, gamma):
    rng = np.random.default_rng(seed)
    m = random_mdp(rng, S, A, gamma)
    r = rng.random(S * A)
    _, J = solve_optimal_policy(m, r)
    V, _ = value_iteration(m, r)
    assert J == pytest.approx(m.initial_dist @ V, abs=1e-6)
