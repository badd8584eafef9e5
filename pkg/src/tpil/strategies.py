"""Perspective selection strategies.

``uniform`` is round-robin. ``active(var)`` greedily maximizes log det of the
design matrix. ``active(sim)`` samples by inverse cosine similarity of the
transformation matrices. ``active(corr)`` (Dissimilarity Sampling) samples by
inverse correlation of learned per-perspective feature estimates. ``ucb`` is a
tabular adaptation of the UCB rule in which the latest matching residual of a
perspective plays the role of the discriminator output.
"""
from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch, InvalidParam
from .mdp import TabularMdp, as_generator
from .perspectives import FeatureMap, Perspective, stack

TIE_TOL = 1e-12
STRATEGIES = ("uniform", "active(var)", "active(sim)", "active(corr)", "ucb")


class SelectionState:
    """Bookkeeping shared by all strategies for one run."""

    def __init__(self, perspectives, lam: float = 1.0, alpha: float = 0.9):
        if lam <= 0:
            raise InvalidParam("ridge lambda must be positive")
        if not 0.0 <= alpha <= 1.0:
            raise InvalidParam("EWA decay alpha must lie in [0, 1]")
        stack(perspectives)  # validates a common feature dimension
        self.n_perspectives = len(perspectives)
        k = perspectives[0].in_dim
        self.lam = lam
        self.alpha = alpha
        self.counts = np.zeros(self.n_perspectives, dtype=int)
        self.V = lam * np.eye(k)
        self.ewa: list[np.ndarray | None] = [None] * self.n_perspectives
        self.last_residuals = np.full(self.n_perspectives, np.nan)
        self.t = 0

    def register(self, nu: int, perspective: Perspective) -> None:
        "Account for one demonstration observed through perspective ``nu``."
        A = perspective.matrix
        self.counts[nu] += 1
        self.V = self.V + A.T @ A
        self.t += 1

    def update_ewa(self, nu: int, estimate) -> None:
        estimate = np.asarray(estimate, dtype=float)
        if self.ewa[nu] is None:
            self.ewa[nu] = estimate.copy()
        else:
            self.ewa[nu] = self.alpha * self.ewa[nu] + (1.0 - self.alpha) * estimate


def _first_max(scores) -> int:
    scores = np.asarray(scores, dtype=float)
    return int(np.flatnonzero(scores >= scores.max() - TIE_TOL)[0])


def _sample(p, rng) -> int:
    return int(as_generator(rng).choice(len(p), p=p))


def next_uniform(state: SelectionState) -> int:
    return state.t % state.n_perspectives


def logdet_gains(V: np.ndarray, perspectives) -> np.ndarray:
    """log det(V + A'A) - log det(V) for every perspective.

    Uses the determinant lemma, log det(I + A V^-1 A').
    """
    gains = np.empty(len(perspectives))
    for i, p in enumerate(perspectives):
        A = p.matrix
        if A.shape[1] != V.shape[0]:
            raise DimensionMismatch(f"perspective {p.label!r} does not act on {V.shape[0]} features")
        inner = np.eye(A.shape[0]) + A @ np.linalg.solve(V, A.T)
        gains[i] = np.linalg.slogdet(inner)[1]
    return gains


def greedy_logdet(V: np.ndarray, perspectives) -> int:
    return _first_max(logdet_gains(V, perspectives))


def next_active_var(state: SelectionState, perspectives) -> int:
    return greedy_logdet(state.V, perspectives)


def cosine_similarities(perspectives) -> np.ndarray:
    flat = np.array([p.matrix.ravel() for p in perspectives])
    if len({f.size for f in flat}) > 1:
        raise DimensionMismatch("cosine similarity needs equally shaped perspectives")
    unit = flat / np.linalg.norm(flat, axis=1, keepdims=True)
    return unit @ unit.T


def inverse_similarity_probs(similarity: np.ndarray, floor: float = 1e-6) -> np.ndarray:
    """p_i proportional to 1 / sum_{j != i} max(S_ij, floor)."""
    S = np.maximum(np.asarray(similarity, dtype=float), floor)
    np.fill_diagonal(S, 0.0)
    scores = 1.0 / S.sum(axis=1)
    return scores / scores.sum()


def active_sim_probs(perspectives, floor: float = 1e-6) -> np.ndarray:
    if len(perspectives) < 2:
        raise InvalidParam("active(sim) needs at least two perspectives")
    return inverse_similarity_probs(cosine_similarities(perspectives), floor)


def next_active_sim(perspectives, state: SelectionState, rng, floor: float = 1e-6) -> int:
    return _sample(active_sim_probs(perspectives, floor), rng)


def correlation_similarities(estimates) -> np.ndarray:
    """Pearson correlations mapped to [0, 1] by (corr + 1) / 2.

    A constant estimate has no defined correlation and is treated as
    uncorrelated (similarity 1/2).
    """
    X = np.array([np.ravel(e) for e in estimates], dtype=float)
    Xc = X - X.mean(axis=1, keepdims=True)
    norms = np.linalg.norm(Xc, axis=1)
    ok = norms > 1e-15
    corr = np.zeros((len(X), len(X)))
    Z = Xc[ok] / norms[ok, None]
    corr[np.ix_(ok, ok)] = np.clip(Z @ Z.T, -1.0, 1.0)
    np.fill_diagonal(corr, 1.0)
    return (corr + 1.0) / 2.0


def dissimilarity_probs(state: SelectionState, floor: float = 1e-6) -> np.ndarray:
    if any(e is None for e in state.ewa):
        raise InvalidParam("every perspective needs a feature estimate first")
    return inverse_similarity_probs(correlation_similarities(state.ewa), floor)


def next_dissimilarity(state: SelectionState, rng, floor: float = 1e-6) -> int:
    """Dissimilarity Sampling: sweep unselected perspectives, then sample by inverse correlation."""
    unseen = np.flatnonzero(state.counts == 0)
    if unseen.size:
        return int(unseen[0])
    return _sample(dissimilarity_probs(state, floor), rng)


def next_ucb_residual(state: SelectionState, c: float = 1.0) -> int:
    "argmax of residual + c * sqrt(log t / N), after an initialization sweep."
    unseen = np.flatnonzero(state.counts == 0)
    if unseen.size:
        return int(unseen[0])
    bonus = c * np.sqrt(np.log(max(state.t, 1)) / state.counts)
    residuals = np.nan_to_num(state.last_residuals, nan=0.0)
    return _first_max(residuals + bonus)


def learner_view_estimate(
    mdp: TabularMdp,
    F: FeatureMap,
    perspective: Perspective,
    policy: np.ndarray,
    horizon: int,
    n_rollouts: int,
    rng,
) -> np.ndarray:
    """Rollout estimate of the learner's discounted observations, resolved by state.

    Entry (s, j) averages sum_t gamma^t 1[s_t = s] (A phi(s_t, a_t))_j over
    ``n_rollouts`` learner trajectories seen through ``perspective``.
    """
    from .demos import rollout

    states, actions = rollout(mdp, policy, horizon, n_rollouts, rng)
    disc = mdp.discount ** np.arange(horizon)
    obs = perspective.matrix @ F.matrix[:, states * mdp.n_actions + actions].reshape(F.dim, -1)
    weighted = obs * np.tile(disc, n_rollouts)
    view = np.zeros((mdp.n_states, perspective.out_dim))
    np.add.at(view, states.ravel(), weighted.T)
    return (view / n_rollouts).ravel()
