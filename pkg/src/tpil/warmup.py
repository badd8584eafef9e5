"""Penalized least-squares estimation of expert feature expectations from linear views."""
from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, InvalidParam, SingularSystem
from .strategies import greedy_logdet


class RidgeState:
    """V = lam I + sum A'A and b = sum A'o over the observations seen so far."""

    def __init__(self, k: int, lam: float = 1.0):
        if k < 1:
            raise InvalidParam("feature dimension must be >= 1")
        if lam <= 0:
            raise InvalidParam("lambda must be positive")
        self.lam = float(lam)
        self.V = self.lam * np.eye(k)
        self.b = np.zeros(k)
        self.t = 0

    @property
    def k(self) -> int:
        return self.b.size

    def logdet(self) -> float:
        return float(np.linalg.slogdet(self.V)[1])


def ridge_update(state: RidgeState, A, o) -> RidgeState:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    o = np.atleast_1d(np.asarray(o, dtype=float))
    if A.shape[1] != state.k or o.shape != (A.shape[0],):
        raise DimensionMismatch(f"view {A.shape} and observation {o.shape} do not fit k={state.k}")
    state.V = state.V + A.T @ A
    state.b = state.b + A.T @ o
    state.t += 1
    return state


def ridge_estimate(state: RidgeState) -> np.ndarray:
    "argmin of sum ||o - A psi||^2 + lam ||psi||^2, i.e. V^-1 b."
    try:
        return scipy.linalg.solve(state.V, state.b, assume_a="pos")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SingularSystem("design matrix is not positive definite") from exc


def greedy_logdet_select(state: RidgeState, perspectives) -> int:
    return greedy_logdet(state.V, perspectives)
