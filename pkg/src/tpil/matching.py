"""Expert planning and multi-perspective feature matching over the occupancy polytope."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .demos import ObservationStore
from .errors import DimensionMismatch, NoObservations
from .lp import LinearProgram, solve_lp
from .mdp import TabularMdp
from .perspectives import FeatureMap


@dataclass(frozen=True, eq=False)
class MatchResult:
    occupancy: np.ndarray
    residuals: np.ndarray  # per perspective; nan where unobserved
    objective: float


def _restore_flow(mdp: TabularMdp, mu, rounds: int = 3):
    """Nudge mu back onto E mu = rho using only its nonzero entries.

    Interior-point output carries flow residuals near the solver tolerance;
    a least-squares correction on the support removes them without moving
    mass onto unused state-action pairs.
    """
    E, rho = mdp.flow_matrix, mdp.initial_dist
    best = np.clip(mu, 0.0, None)
    best_res = np.abs(E @ best - rho).max()
    for _ in range(rounds):
        if best_res < 1e-14:
            break
        support = best > 1e-12 * max(1.0, best.max())
        try:
            delta, *_ = np.linalg.lstsq(E[:, support], rho - E @ best, rcond=None)
        except np.linalg.LinAlgError:
            break
        cand = best.copy()
        cand[support] = np.clip(cand[support] + delta, 0.0, None)
        res = np.abs(E @ cand - rho).max()
        if res >= best_res:
            break
        best, best_res = cand, res
    return best


def solve_optimal_policy(mdp: TabularMdp, reward, backend: str = "ipm"):
    """Occupancy maximizing <reward, mu> over the flow polytope, and its value J*."""
    reward = np.asarray(reward, dtype=float).ravel()
    if reward.size != mdp.n_states * mdp.n_actions:
        raise DimensionMismatch("reward must have one entry per state-action pair")
    sol = solve_lp(LinearProgram(-reward, mdp.flow_matrix, mdp.initial_dist), backend)
    mu = _restore_flow(mdp, sol.x)
    return mu, float(reward @ mu)


def match_features(
    mdp: TabularMdp,
    F: FeatureMap,
    perspectives,
    store: ObservationStore,
    weights=None,
    backend: str = "ipm",
) -> MatchResult:
    """Weighted l-infinity feature matching.

    Solves  min sum_i w_i eps_i  over occupancies mu and slacks eps, subject to
    |(A_i F mu - Psi_hat_i)_j| <= eps_i for every observed perspective i with
    positive weight. Observed perspectives with zero weight are left out of the
    LP; their residual is measured at the solution. ``weights`` defaults to the
    selection counts.
    """
    K = len(perspectives)
    if len(store) != K:
        raise DimensionMismatch("observation store and perspective set differ in size")
    weights = store.counts.astype(float) if weights is None else np.asarray(weights, dtype=float)
    if weights.shape != (K,):
        raise DimensionMismatch("one weight per perspective is required")
    observed = store.observed()
    if observed.size == 0:
        raise NoObservations("no perspective has been observed yet")
    active = [i for i in observed if weights[i] > 0]

    n = mdp.n_states * mdp.n_actions
    m = len(active)
    views = {i: perspectives[i].matrix @ F.matrix for i in observed}

    blocks, rhs = [], []
    for col, i in enumerate(active):
        G, target = views[i], store.mean(i)
        slack = np.zeros((G.shape[0], m))
        slack[:, col] = -1.0
        blocks += [np.hstack([G, slack]), np.hstack([-G, slack])]
        rhs += [target, -target]

    c = np.concatenate([np.zeros(n), weights[active]])
    A_eq = np.hstack([mdp.flow_matrix, np.zeros((mdp.n_states, m))])
    lp = LinearProgram(
        c,
        A_eq,
        mdp.initial_dist,
        np.vstack(blocks) if blocks else None,
        np.concatenate(rhs) if rhs else None,
    )
    sol = solve_lp(lp, backend)
    mu = _restore_flow(mdp, sol.x[:n])

    residuals = np.full(K, np.nan)
    for i in observed:
        residuals[i] = np.abs(views[i] @ mu - store.mean(i)).max()
    eps = sol.x[n:]
    for col, i in enumerate(active):
        residuals[i] = max(eps[col], residuals[i])
    return MatchResult(mu, residuals, float(sol.objective))
