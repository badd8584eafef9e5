"""Expert demonstrations, perspective observations and running observation means."""
from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch, InvalidParam
from .mdp import TabularMdp, check_policy, as_generator
from .perspectives import FeatureMap, Perspective


def _draw(cdf_rows: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    "One categorical draw per row of a cumulative-probability matrix."
    # scaling by the last entry keeps rounding in the cumsum from selecting
    # a trailing zero-probability outcome
    u = rng.random(cdf_rows.shape[0]) * cdf_rows[:, -1]
    return (cdf_rows <= u[:, None]).sum(axis=1)


def rollout(mdp: TabularMdp, policy: np.ndarray, horizon: int, n: int = 1, rng=None):
    """Simulate ``n`` independent trajectories of length ``horizon``.

    Returns (states, actions), both int arrays of shape (n, horizon).
    """
    if horizon < 1:
        raise InvalidParam("horizon must be >= 1")
    rng = as_generator(rng)
    policy = check_policy(mdp, policy)
    pi_cdf = np.cumsum(policy, axis=1)
    T_cdf = np.cumsum(mdp.transitions, axis=2)
    rho_cdf = np.cumsum(mdp.initial_dist)

    states = np.empty((n, horizon), dtype=int)
    actions = np.empty((n, horizon), dtype=int)
    s = _draw(np.broadcast_to(rho_cdf, (n, rho_cdf.size)), rng)
    for t in range(horizon):
        a = _draw(pi_cdf[s], rng)
        states[:, t], actions[:, t] = s, a
        s = _draw(T_cdf[s, a], rng)
    return states, actions


def discounted_features(mdp: TabularMdp, F: FeatureMap, states, actions) -> np.ndarray:
    "Per-trajectory sum_t gamma^t phi(s_t, a_t); shape (n, k)."
    disc = mdp.discount ** np.arange(states.shape[1])
    cols = F.matrix[:, states * mdp.n_actions + actions]  # (k, n, H)
    return np.einsum("knh,h->nk", cols, disc)


def sample_demonstration(mdp: TabularMdp, policy, F: FeatureMap, horizon: int = 30, rng=None) -> np.ndarray:
    """Discounted feature sum of one truncated trajectory from the initial distribution."""
    states, actions = rollout(mdp, policy, horizon, 1, rng)
    return discounted_features(mdp, F, states, actions)[0]


def observe(psi: np.ndarray, perspective: Perspective) -> np.ndarray:
    psi = np.asarray(psi, dtype=float)
    if psi.shape != (perspective.in_dim,):
        raise DimensionMismatch(f"feature vector {psi.shape} does not fit perspective {perspective.label!r}")
    return perspective.matrix @ psi


def add_observation_noise(o: np.ndarray, std: float, rng) -> np.ndarray:
    "Additive Gaussian noise, for warm-up estimator studies only."
    if std <= 0:
        return o
    return o + as_generator(rng).normal(0.0, std, size=np.shape(o))


class ObservationStore:
    """Running mean of observations and selection count for each perspective."""

    def __init__(self, out_dims):
        self.out_dims = tuple(int(d) for d in out_dims)
        self.counts = np.zeros(len(self.out_dims), dtype=int)
        self._means = [np.zeros(d) for d in self.out_dims]

    @classmethod
    def for_perspectives(cls, perspectives) -> ObservationStore:
        return cls([p.out_dim for p in perspectives])

    def __len__(self):
        return len(self.out_dims)

    def record(self, nu: int, o) -> ObservationStore:
        o = np.atleast_1d(np.asarray(o, dtype=float))
        if o.shape != (self.out_dims[nu],):
            raise DimensionMismatch(f"observation {o.shape} for perspective {nu} of dim {self.out_dims[nu]}")
        self.counts[nu] += 1
        self._means[nu] = self._means[nu] + (o - self._means[nu]) / self.counts[nu]
        return self

    def mean(self, nu: int) -> np.ndarray:
        if self.counts[nu] == 0:
            raise KeyError(f"perspective {nu} has no observations")
        return self._means[nu].copy()

    def observed(self) -> np.ndarray:
        return np.flatnonzero(self.counts > 0)


def expected_cumulative_features(mdp: TabularMdp, policy, F: FeatureMap, horizon: int, discounted: bool = False) -> np.ndarray:
    """Exact E[sum_{t<horizon} w_t phi(s_t, a_t)] with w_t = 1, or gamma^t if ``discounted``."""
    if horizon < 1:
        raise InvalidParam("horizon must be >= 1")
    policy = check_policy(mdp, policy)
    P = mdp.policy_transitions(policy)
    d = mdp.initial_dist.copy()
    psi = np.zeros(F.dim)
    for t in range(horizon):
        weight = mdp.discount**t if discounted else 1.0
        psi += weight * F((d[:, None] * policy).ravel())
        d = P.T @ d
    return psi
