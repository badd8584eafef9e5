import numpy as np
import pytest

from tpil.errors import DimensionMismatch, InvalidParam
from tpil.perspectives import Perspective, basis_perspectives, random_perspectives
from tpil.strategies import SelectionState, next_active_var
from tpil.warmup import RidgeState, greedy_logdet_select, ridge_estimate, ridge_update


def test_first_update():
    s = ridge_update(RidgeState(4, 1.0), [[1.0, 0, 0, 0]], [2.0])
    assert np.array_equal(s.V, np.diag([2.0, 1, 1, 1]))
    assert s.b.tolist() == [2.0, 0, 0, 0]
    assert s.t == 1


def test_zero_observation_only_moves_V():
    s = ridge_update(RidgeState(2), [[0.0, 1.0]], [0.0])
    assert s.b.tolist() == [0.0, 0.0]
    assert np.array_equal(s.V, np.diag([1.0, 2.0]))


def test_exact_recovery_with_tiny_lambda():
    psi = np.array([0.3, 1.2, 0.0, 2.5])
    s = RidgeState(4, 1e-8)
    for p in basis_perspectives(4):
        ridge_update(s, p.matrix, p.matrix @ psi)
    assert np.abs(ridge_estimate(s) - psi).max() < 1e-6


def test_fresh_and_shrunk_estimates():
    assert ridge_estimate(RidgeState(3)).tolist() == [0.0, 0.0, 0.0]
    s = ridge_update(RidgeState(2, 9.0), [[1.0, 0.0]], [5.0])
    assert ridge_estimate(s)[0] == pytest.approx(5.0 / 10.0)


def test_dimension_and_param_checks():
    with pytest.raises(DimensionMismatch):
        ridge_update(RidgeState(3), [[1.0, 0.0]], [1.0])
    with pytest.raises(DimensionMismatch):
        ridge_update(RidgeState(2), [[1.0, 0.0]], [1.0, 2.0])
    with pytest.raises(InvalidParam):
        RidgeState(2, 0.0)


def test_closed_form_and_logdet_monotone():
    rng = np.random.default_rng(0)
    ps = random_perspectives(4, 30, None, rng)
    obs = rng.normal(size=30)
    s = RidgeState(4, 0.7)
    last = s.logdet()
    for p, o in zip(ps, obs):
        ridge_update(s, p.matrix, [o])
        assert s.logdet() > last
        last = s.logdet()
        assert np.abs(s.V - s.V.T).max() <= 1e-12
        assert np.linalg.eigvalsh(s.V - 0.7 * np.eye(4)).min() >= -1e-12
    A = np.vstack([p.matrix for p in ps])
    closed = np.linalg.solve(0.7 * np.eye(4) + A.T @ A, A.T @ obs)
    assert np.abs(ridge_estimate(s) - closed).max() < 1e-10


def test_greedy_cycles_distinct_directions():
    ps = basis_perspectives(4, 12)
    s = RidgeState(4)
    picks = []
    for _ in range(8):
        nu = greedy_logdet_select(s, ps)
        picks.append(nu)
        ridge_update(s, ps[nu].matrix, [0.0])
    assert picks == [0, 1, 2, 3, 0, 1, 2, 3]


def test_identical_perspectives_pick_first():
    ps = [Perspective([0.2, 0.5], str(i)) for i in range(4)]
    s = RidgeState(2)
    for _ in range(3):
        assert greedy_logdet_select(s, ps) == 0
        ridge_update(s, ps[0].matrix, [1.0])


def test_matches_active_var():
    ps = random_perspectives(4, 15, 0.5, rng=4)
    ridge, sel = RidgeState(4), SelectionState(ps)
    for _ in range(20):
        a, b = greedy_logdet_select(ridge, ps), next_active_var(sel, ps)
        assert a == b
        ridge_update(ridge, ps[a].matrix, [0.0])
        sel.register(b, ps[b])


def _error_after(n, seed):
    rng = np.random.default_rng(seed)
    psi = rng.uniform(0, 3, size=4)
    ps = random_perspectives(4, 4, None, rng)
    s = RidgeState(4)
    for t in range(n):
        A = ps[t % 4].matrix
        ridge_update(s, A, A @ psi + rng.normal(0, 0.1, size=1))
    return np.linalg.norm(ridge_estimate(s) - psi)


def test_more_noisy_observations_help_on_average():
    e50 = np.mean([_error_after(50, s) for s in range(100)])
    e200 = np.mean([_error_after(200, s) for s in range(100)])
    assert e200 < e50
