"""Feature maps, perspective construction and stacked-perspective geometry."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateStack, DimensionMismatch, InvalidParam
from .lp import LinearProgram, solve_lp
from .mdp import GridWorldInstance, TabularMdp, as_generator

RANK_RTOL = 1e-10


@dataclass(frozen=True, eq=False)
class FeatureMap:
    """Linear map from flat occupancies to feature expectations, Psi = F @ mu."""

    matrix: np.ndarray  # (k, n_states * n_actions)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __call__(self, mu: np.ndarray) -> np.ndarray:
        return self.matrix @ np.ravel(mu)

    def column(self, state: int, action: int, n_actions: int) -> np.ndarray:
        return self.matrix[:, state * n_actions + action]


@dataclass(frozen=True, eq=False)
class Perspective:
    matrix: np.ndarray  # (d_nu, k)
    label: str
    kind: str = "custom"

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        if A.shape[0] < 1 or not np.isfinite(A).all():
            raise InvalidParam(f"perspective {self.label!r} must be a finite matrix with >= 1 row")
        A.flags.writeable = False
        object.__setattr__(self, "matrix", A)

    @property
    def out_dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def in_dim(self) -> int:
        return self.matrix.shape[1]


@dataclass(frozen=True, eq=False)
class StackAnalysis:
    stacked: np.ndarray
    sigma: float
    rho: float
    rank: int
    diam_bound: float


def feature_map(gw: GridWorldInstance) -> FeatureMap:
    "One-hot object-type indicators, identical for every action in a state."
    S, A = gw.mdp.n_states, gw.mdp.n_actions
    F = np.zeros((gw.object_types, S * A))
    for cell, kind in gw.objects:
        F[kind, cell * A : (cell + 1) * A] = 1.0
    F.flags.writeable = False
    return FeatureMap(F)


def stack(perspectives) -> np.ndarray:
    dims = {p.in_dim for p in perspectives}
    if len(dims) != 1:
        raise DimensionMismatch(f"perspectives disagree on the feature dimension: {sorted(dims)}")
    return np.vstack([p.matrix for p in perspectives])


def basis_perspectives(k: int, duplicate_first: int = 0) -> list[Perspective]:
    """Unit-vector views e_1..e_k, followed by ``duplicate_first`` extra copies of e_1."""
    if k < 1 or duplicate_first < 0:
        raise InvalidParam("need k >= 1 and duplicate_first >= 0")
    eye = np.eye(k)
    out = [Perspective(eye[i], f"e{i + 1}", "basis") for i in range(k)]
    out += [Perspective(eye[0], f"e1#{j + 1}", "duplicated-basis") for j in range(duplicate_first)]
    return out


def random_perspectives(k: int, n: int, threshold: float | None = None, rng=None) -> list[Perspective]:
    """``n`` single-row views with entries drawn from U[0, 1].

    With a ``threshold``, entries below it are zeroed; rows that come out all
    zero are redrawn.
    """
    if n < 1 or k < 1:
        raise InvalidParam("need k >= 1 and n >= 1")
    rng = as_generator(rng)
    kind = "random-uniform" if threshold is None else "random-thresholded"
    rows = []
    while len(rows) < n:
        row = rng.uniform(0.0, 1.0, size=k)
        if threshold is not None:
            row[row < threshold] = 0.0
        if np.any(row != 0.0):
            rows.append(row)
    return [Perspective(row, f"r{i + 1}", kind) for i, row in enumerate(rows)]


def analyze_stack(perspectives, w_star, diam_bound: float = float("nan")) -> StackAnalysis:
    """Smallest off-kernel singular value, kernel mass of w* and rank of the stack.

    ``rho`` is the norm of the projection of ``w_star`` onto ker(A_bar), which
    is the maximum of <w*, v> over unit vectors v in the kernel.
    """
    A_bar = stack(perspectives)
    w_star = np.asarray(w_star, dtype=float)
    if w_star.shape != (A_bar.shape[1],):
        raise DimensionMismatch(f"w_star has shape {w_star.shape}, expected ({A_bar.shape[1]},)")
    _, sv, Vt = np.linalg.svd(A_bar)
    if sv.size == 0 or sv[0] == 0.0:
        raise DegenerateStack("stacked perspective matrix is zero")
    rank = int(np.sum(sv > RANK_RTOL * sv[0]))
    kernel = Vt[rank:]
    rho = float(np.linalg.norm(kernel @ w_star)) if kernel.size else 0.0
    return StackAnalysis(A_bar, float(sv[rank - 1]), rho, rank, float(diam_bound))


def feature_ranges(mdp: TabularMdp, F: FeatureMap, backend: str = "ipm") -> np.ndarray:
    "(k, 2) array of min / max of each feature expectation over all occupancies."
    E, rho = mdp.flow_matrix, mdp.initial_dist
    out = np.empty((F.dim, 2))
    for j in range(F.dim):
        for col, sign in enumerate((1.0, -1.0)):
            sol = solve_lp(LinearProgram(sign * F.matrix[j], E, rho), backend)
            out[j, col] = sign * sol.objective
    return out


def diam_upper_bound(mdp: TabularMdp, F: FeatureMap, backend: str = "ipm") -> float:
    """Upper bound on the diameter of {F mu : mu feasible}.

    Norm of the per-coordinate range vector; each range needs two LPs.
    """
    if F.matrix.shape[1] != mdp.n_states * mdp.n_actions:
        raise DimensionMismatch("feature map does not match the MDP")
    lo_hi = feature_ranges(mdp, F, backend)
    return float(np.linalg.norm(np.clip(lo_hi[:, 1] - lo_hi[:, 0], 0.0, None)))
