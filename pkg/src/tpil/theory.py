"""Executable checks for the linear-perspective performance bound and the
non-identifiability counterexample for per-dimension observations."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import product

import numpy as np

from .errors import DimensionMismatch, InvalidParam
from .mdp import GridWorldInstance, TabularMdp
from .perspectives import analyze_stack, diam_upper_bound

HOLDS_TOL = 1e-6
HALF = Fraction(1, 2)


@dataclass(frozen=True)
class CounterexampleMdp:
    """Five-state, two-action episodic MDP with horizon 2.

    From S0, ``left`` reaches S1 or S2 and ``right`` reaches S3 or S4, each
    with probability 1/2. Reward is 1 exactly in states with features [1, 1].
    """

    states: tuple = ("S0", "S1", "S2", "S3", "S4")
    actions: tuple = ("left", "right")
    features: tuple = ((2, 2), (1, 1), (0, 0), (0, 1), (1, 0))
    # next-state distribution of each action taken in S0; S1..S4 are terminal
    from_start: tuple = ((0, HALF, HALF, 0, 0), (0, 0, 0, HALF, HALF))
    horizon: int = 2
    start: int = 0

    def next_dist(self, action: int) -> tuple:
        return self.from_start[action]

    def reward(self, state: int) -> int:
        return int(self.features[state] == (1, 1))

    def as_tabular(self, discount: float) -> TabularMdp:
        """Continuing variant: every action in S1..S4 restarts the episode at S0."""
        S, A = len(self.states), len(self.actions)
        T = np.zeros((S, A, S))
        for a in range(A):
            T[0, a] = [float(p) for p in self.next_dist(a)]
        T[1:, :, 0] = 1.0
        rho = np.zeros(S)
        rho[self.start] = 1.0
        return TabularMdp(T, rho, discount)


def build_counterexample() -> CounterexampleMdp:
    return CounterexampleMdp()


def _left_prob(policy) -> Fraction:
    "Exact probability of ``left`` in S0 from a number or an action->prob mapping."
    if isinstance(policy, dict):
        p = Fraction(policy.get("left", 0))
        if p + Fraction(policy.get("right", 0)) != 1:
            raise InvalidParam("policy probabilities at S0 must sum to 1")
    else:
        p = Fraction(policy)
    if not 0 <= p <= 1:
        raise InvalidParam("probability of left must lie in [0, 1]")
    return p


def _trajectory_dist(cmdp: CounterexampleMdp, policy) -> dict:
    p = _left_prob(policy)
    dist: dict = {}
    for a, pa in enumerate((p, 1 - p)):
        for s1, ps in enumerate(cmdp.next_dist(a)):
            if pa * ps:
                key = (cmdp.start, s1)
                dist[key] = dist.get(key, Fraction(0)) + pa * ps
    return dist


def counterexample_value(policy, cmdp: CounterexampleMdp | None = None) -> Fraction:
    "Exact expected undiscounted return over the two-step horizon."
    cmdp = cmdp or build_counterexample()
    return sum(
        (prob * sum(cmdp.reward(s) for s in traj) for traj, prob in _trajectory_dist(cmdp, policy).items()),
        Fraction(0),
    )


def counterexample_marginals(policy, cmdp: CounterexampleMdp | None = None) -> dict:
    """Exact distribution of each feature dimension along the trajectory.

    Returns {dim: {(phi_dim(s0), phi_dim(s1)): probability}} listing every
    value pair of the dimension's range, including zero-probability ones.
    """
    cmdp = cmdp or build_counterexample()
    traj = _trajectory_dist(cmdp, policy)
    out = {}
    for d in range(len(cmdp.features[0])):
        values = sorted({f[d] for f in cmdp.features})
        table = {pair: Fraction(0) for pair in product(values, repeat=cmdp.horizon)}
        for states, prob in traj.items():
            table[tuple(cmdp.features[s][d] for s in states)] += prob
        out[d] = table
    return out


@dataclass(frozen=True)
class Theorem1Report:
    epsilon: float
    sigma: float
    rho: float
    diam_bound: float
    bound_value: float
    actual_gap: float
    holds: bool
    w_scale: float  # w* was divided by this to satisfy ||w*|| <= 1


def theorem1_report(
    instance: GridWorldInstance,
    perspectives,
    mu_E,
    mu_L,
    diam_bound: float | None = None,
    backend: str = "ipm",
) -> Theorem1Report:
    """Instantiate the smallest premise precision and check the value-gap bound.

    epsilon = |V| max_nu ||A_nu F (mu_E - mu_L)||_2. The bound is evaluated
    with w* / max(1, ||w*||), and the gap uses the same scaled weights.
    """
    F = instance.features
    d_mu = np.asarray(mu_E, dtype=float) - np.asarray(mu_L, dtype=float)
    if d_mu.shape != (F.matrix.shape[1],):
        raise DimensionMismatch("occupancies do not match the instance")
    w = np.asarray(instance.reward_weights, dtype=float)
    scale = max(1.0, float(np.linalg.norm(w)))
    w = w / scale
    if diam_bound is None:
        diam_bound = diam_upper_bound(instance.mdp, F, backend)
    stack_info = analyze_stack(perspectives, w, diam_bound)

    d_psi = F(d_mu)
    eps = len(perspectives) * max(float(np.linalg.norm(p.matrix @ d_psi)) for p in perspectives)
    bound = eps / stack_info.sigma + stack_info.rho * diam_bound
    gap = abs(float(w @ d_psi))
    return Theorem1Report(eps, stack_info.sigma, stack_info.rho, float(diam_bound), bound, gap, gap <= bound + HOLDS_TOL, scale)
