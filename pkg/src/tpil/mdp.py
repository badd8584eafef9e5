"""Finite discounted MDPs, object-collection grid worlds and occupancy algebra.

Occupancies are flat vectors indexed by ``s * n_actions + a``; policies are
``(n_states, n_actions)`` row-stochastic arrays.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import CapacityError, DimensionMismatch, InvalidParam, SingularSystem

PROB_TOL = 1e-12
POLICY_TOL = 1e-10

# up, down, left, right as (d_row, d_col)
MOVES = ((-1, 0), (1, 0), (0, -1), (0, 1))


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


@dataclass(frozen=True, eq=False)
class TabularMdp:
    transitions: np.ndarray  # (S, A, S')
    initial_dist: np.ndarray
    discount: float

    def __post_init__(self):
        T = np.asarray(self.transitions, dtype=float)
        rho = np.asarray(self.initial_dist, dtype=float)
        if T.ndim != 3 or T.shape[0] != T.shape[2]:
            raise DimensionMismatch(f"transitions must be (S, A, S), got {T.shape}")
        if rho.shape != (T.shape[0],):
            raise DimensionMismatch("initial_dist length must equal n_states")
        if not 0.0 < self.discount < 1.0:
            raise InvalidParam(f"discount must lie in (0, 1), got {self.discount}")
        if T.min() < 0.0 or T.max() > 1.0 or rho.min() < 0.0:
            raise InvalidParam("probabilities must lie in [0, 1]")
        if np.abs(T.sum(axis=2) - 1.0).max() > PROB_TOL:
            raise InvalidParam("every transition row must sum to 1")
        if abs(rho.sum() - 1.0) > PROB_TOL:
            raise InvalidParam("initial_dist must sum to 1")
        T.flags.writeable = False
        rho.flags.writeable = False
        object.__setattr__(self, "transitions", T)
        object.__setattr__(self, "initial_dist", rho)

    @property
    def n_states(self) -> int:
        return self.transitions.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transitions.shape[1]

    @cached_property
    def flow_matrix(self) -> np.ndarray:
        """Matrix E with E @ mu = rho exactly for valid occupancies.

        Row s reads ``sum_a mu(s, a) - gamma * sum_{s', a} T(s | s', a) mu(s', a)``.
        """
        S, A = self.n_states, self.n_actions
        outflow = np.kron(np.eye(S), np.ones((1, A)))
        inflow = self.transitions.reshape(S * A, S).T
        E = outflow - self.discount * inflow
        E.flags.writeable = False
        return E

    def policy_transitions(self, policy: np.ndarray) -> np.ndarray:
        return np.einsum("sa,sat->st", policy, self.transitions)


@dataclass(frozen=True, eq=False)
class GridWorldInstance:
    grid_side: int
    object_types: int
    objects: tuple  # ((cell, type), ...)
    reward_weights: np.ndarray
    mdp: TabularMdp = field(repr=False)

    @cached_property
    def cell_types(self) -> np.ndarray:
        "Object type per cell, -1 for empty cells."
        types = np.full(self.grid_side ** 2, -1, dtype=int)
        for cell, kind in self.objects:
            types[cell] = kind
        return types

    @cached_property
    def features(self):
        from .perspectives import feature_map

        return feature_map(self)

    @cached_property
    def reward(self) -> np.ndarray:
        "r(s, a) = <w*, phi(s, a)> as a flat vector over state-action pairs."
        return self.reward_weights @ self.features.matrix


def check_policy(mdp: TabularMdp, policy: np.ndarray) -> np.ndarray:
    policy = np.asarray(policy, dtype=float)
    if policy.shape != (mdp.n_states, mdp.n_actions):
        raise DimensionMismatch(
            f"policy shape {policy.shape} does not match MDP ({mdp.n_states}, {mdp.n_actions})"
        )
    if policy.min() < 0 or np.abs(policy.sum(axis=1) - 1.0).max() > POLICY_TOL:
        raise InvalidParam("policy rows must be probability vectors")
    return policy


def build_gridworld(
    grid_side: int,
    object_types: int,
    objects_per_type: int,
    rng=None,
    discount: float = 0.3,
) -> GridWorldInstance:
    """Random object-collection world with deterministic cardinal moves.

    Any action taken on an object cell teleports the agent to a uniformly
    random empty cell; the object stays (it is replaced). Agents start
    uniformly on empty cells.
    """
    if min(grid_side, object_types, objects_per_type) <= 0:
        raise InvalidParam("grid_side, object_types and objects_per_type must be positive")
    n_cells = grid_side * grid_side
    n_objects = object_types * objects_per_type
    if n_cells <= n_objects:
        raise CapacityError(
            f"{n_objects} objects need at least one free cell in a {grid_side}x{grid_side} grid"
        )
    rng = as_generator(rng)

    cells = rng.choice(n_cells, size=n_objects, replace=False)
    kinds = np.repeat(np.arange(object_types), objects_per_type)
    w_star = rng.uniform(0.0, 1.0, size=object_types)

    cell_types = np.full(n_cells, -1, dtype=int)
    cell_types[cells] = kinds
    empty = np.flatnonzero(cell_types < 0)

    T = np.zeros((n_cells, len(MOVES), n_cells))
    for s in range(n_cells):
        if cell_types[s] >= 0:
            T[s, :, empty] = 1.0 / len(empty)
            continue
        row, col = divmod(s, grid_side)
        for a, (dr, dc) in enumerate(MOVES):
            r2 = min(max(row + dr, 0), grid_side - 1)
            c2 = min(max(col + dc, 0), grid_side - 1)
            T[s, a, r2 * grid_side + c2] = 1.0
    rho = np.zeros(n_cells)
    rho[empty] = 1.0 / len(empty)

    mdp = TabularMdp(T, rho, discount)
    objects = tuple((int(c), int(k)) for c, k in zip(cells, kinds))
    return GridWorldInstance(grid_side, object_types, objects, w_star, mdp)


def occupancy_of_policy(mdp: TabularMdp, policy: np.ndarray) -> np.ndarray:
    """Discounted state-action occupancy of ``policy``.

    Solves ``d = rho + gamma * P_pi^T d`` for the state occupancy and spreads
    it over actions.
    """
    policy = check_policy(mdp, policy)
    P_pi = mdp.policy_transitions(policy)
    system = np.eye(mdp.n_states) - mdp.discount * P_pi.T
    try:
        d = np.linalg.solve(system, mdp.initial_dist)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    return (d[:, None] * policy).ravel()


def extract_policy(mu: np.ndarray, n_actions: int | None = None) -> np.ndarray:
    "pi(a|s) = mu(s,a) / sum_a mu(s,a); uniform on unvisited states."
    mu = np.asarray(mu, dtype=float)
    if mu.ndim == 1:
        if n_actions is None:
            raise InvalidParam("n_actions is required for a flat occupancy")
        mu = mu.reshape(-1, n_actions)
    mu = np.clip(mu, 0.0, None)
    mass = mu.sum(axis=1, keepdims=True)
    visited = mass > 1e-12
    uniform = np.full_like(mu, 1.0 / mu.shape[1])
    return np.where(visited, mu / np.where(visited, mass, 1.0), uniform)


def policy_value(mu: np.ndarray, reward: np.ndarray) -> float:
    mu = np.asarray(mu, dtype=float).ravel()
    reward = np.asarray(reward, dtype=float).ravel()
    if mu.shape != reward.shape:
        raise DimensionMismatch(f"occupancy {mu.shape} vs reward {reward.shape}")
    return float(reward @ mu)


def flow_residual(mdp: TabularMdp, mu: np.ndarray) -> float:
    "Infinity-norm violation of the Bellman flow equations."
    return float(np.abs(mdp.flow_matrix @ np.ravel(mu) - mdp.initial_dist).max())


def check_occupancy(mdp: TabularMdp, mu: np.ndarray, flow_tol=1e-7, mass_tol=1e-8) -> None:
    mu = np.ravel(mu)
    if mu.min() < -flow_tol:
        raise InvalidParam(f"occupancy has negative entry {mu.min():.3g}")
    res = flow_residual(mdp, mu)
    if res > flow_tol:
        raise InvalidParam(f"flow residual {res:.3g} exceeds {flow_tol}")
    mass_err = abs(mu.sum() - 1.0 / (1.0 - mdp.discount))
    if mass_err > mass_tol:
        raise InvalidParam(f"occupancy mass off by {mass_err:.3g}")


def value_iteration(mdp: TabularMdp, reward: np.ndarray, tol: float = 1e-12, max_iter: int = 100_000):
    """Optimal state values and greedy policy by successive approximation.

    ``reward`` is flat over (s, a). Stops once the sup-norm update falls below
    ``tol * (1 - gamma) / gamma``, which bounds the distance to V* by ``tol``.
    """
    S, A = mdp.n_states, mdp.n_actions
    r = np.asarray(reward, dtype=float).reshape(S, A)
    gamma = mdp.discount
    V = np.zeros(S)
    stop = tol * (1.0 - gamma) / gamma
    for _ in range(max_iter):
        Q = r + gamma * mdp.transitions @ V
        V_new = Q.max(axis=1)
        delta = np.abs(V_new - V).max()
        V = V_new
        if delta < stop:
            break
    Q = r + gamma * mdp.transitions @ V
    greedy = np.zeros((S, A))
    greedy[np.arange(S), Q.argmax(axis=1)] = 1.0
    return V, greedy
