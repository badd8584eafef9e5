"""Dense linear programming.

The default backend is a homogeneous self-dual primal-dual interior-point
method with Mehrotra predictor-corrector steps. It converges to a point in
the relative interior of the optimal face, so on degenerate problems (many
optimal occupancies) the returned solution is a central one rather than an
arbitrary vertex. ``backend="highs"`` delegates to scipy's HiGHS for
cross-checking.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, Infeasible, IterationLimit, SolverError, Unbounded

log = logging.getLogger(__name__)

FEAS_TOL = 1e-7


@dataclass(frozen=True, eq=False)
class LinearProgram:
    """min c^T x  s.t.  A_eq x = b_eq,  A_ub x <= b_ub,  x >= lb.

    ``lb`` may be a scalar or a vector and may contain ``-inf`` for free
    variables. Upper bounds are expressed through ``A_ub``.
    """

    c: np.ndarray
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    A_ub: np.ndarray | None = None
    b_ub: np.ndarray | None = None
    lb: np.ndarray | float = 0.0

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.c, dtype=float))
        n = c.size
        object.__setattr__(self, "c", c)
        for A_name, b_name in (("A_eq", "b_eq"), ("A_ub", "b_ub")):
            A, b = getattr(self, A_name), getattr(self, b_name)
            if A is None and b is None:
                A, b = np.zeros((0, n)), np.zeros(0)
            elif A is None or b is None:
                raise DimensionMismatch(f"{A_name} and {b_name} must be given together")
            A = np.atleast_2d(np.asarray(A, dtype=float))
            b = np.atleast_1d(np.asarray(b, dtype=float))
            if A.shape != (b.size, n):
                raise DimensionMismatch(f"{A_name} has shape {A.shape}, expected ({b.size}, {n})")
            object.__setattr__(self, A_name, A)
            object.__setattr__(self, b_name, b)
        lb = np.broadcast_to(np.asarray(self.lb, dtype=float), (n,)).copy()
        if np.isnan(lb).any() or np.isposinf(lb).any():
            raise DimensionMismatch("lower bounds must be finite or -inf")
        object.__setattr__(self, "lb", lb)

    @property
    def n_vars(self) -> int:
        return self.c.size

    def violation(self, x: np.ndarray) -> float:
        "Largest violation of any constraint or bound at ``x``."
        parts = [np.max(self.lb - x, initial=0.0)]
        if self.b_eq.size:
            parts.append(np.abs(self.A_eq @ x - self.b_eq).max())
        if self.b_ub.size:
            parts.append(np.max(self.A_ub @ x - self.b_ub, initial=0.0))
        return float(max(parts))


@dataclass(frozen=True)
class LPSolution:
    x: np.ndarray
    objective: float
    iterations: int
    backend: str


def solve_lp(lp: LinearProgram, backend: str = "ipm", **options) -> LPSolution:
    """Solve ``lp`` with the chosen backend.

    Raises Infeasible, Unbounded or IterationLimit. The returned point
    violates no constraint by more than ``FEAS_TOL``.
    """
    try:
        solver = BACKENDS[backend]
    except KeyError:
        raise SolverError(f"unknown LP backend {backend!r}; choose from {sorted(BACKENDS)}") from None
    sol = solver(lp, **options)
    viol = lp.violation(sol.x)
    if viol > FEAS_TOL:
        raise SolverError(f"{backend} returned a point violating constraints by {viol:.3g}")
    return sol


# -- standard form -----------------------------------------------------------


def _standard_form(lp: LinearProgram):
    """Rewrite as min c'z s.t. A z = b, z >= 0.

    Finite lower bounds are shifted out, free variables are split, and
    inequality rows get slack columns. Returns (A, b, c, recover).
    """
    n = lp.n_vars
    free = np.isneginf(lp.lb)
    shift = np.where(free, 0.0, lp.lb)
    n_free = int(free.sum())
    m_eq, m_ub = lp.b_eq.size, lp.b_ub.size

    def expand(M):
        return np.hstack([M, -M[:, free]]) if n_free else M

    top = np.hstack([expand(lp.A_eq), np.zeros((m_eq, m_ub))])
    bottom = np.hstack([expand(lp.A_ub), np.eye(m_ub)])
    A = np.vstack([top, bottom])
    b = np.concatenate([lp.b_eq - lp.A_eq @ shift, lp.b_ub - lp.A_ub @ shift])
    c = np.concatenate([lp.c, -lp.c[free], np.zeros(m_ub)])

    def recover(z):
        x = z[:n] + shift
        if n_free:
            x[free] -= z[n : n + n_free]
        return x

    return A, b, c, recover


def _max_step(v, dv):
    neg = dv < 0
    if not neg.any():
        return np.inf
    return float(np.min(-v[neg] / dv[neg]))


def _factor(M):
    reg = 1e-14 * max(1.0, float(np.max(np.diag(M), initial=1.0)))
    for _ in range(8):
        try:
            return scipy.linalg.cho_factor(M + reg * np.eye(M.shape[0]), lower=True, check_finite=False)
        except np.linalg.LinAlgError:
            reg *= 100.0
    raise SolverError("normal equations could not be factored")


def _hsd_ipm(A, b, c, tol, max_iter):
    """Homogeneous self-dual embedding: A x = b tau, A'y + s = c tau, c'x - b'y + kappa = 0.

    Returns ("optimal", x, iters), ("infeasible", None, iters) or
    ("unbounded", None, iters).
    """
    m, n = A.shape
    x, s = np.ones(n), np.ones(n)
    y = np.zeros(m)
    tau = kappa = 1.0
    nb, nc = 1.0 + np.linalg.norm(b), 1.0 + np.linalg.norm(c)
    best, best_err = None, np.inf

    for it in range(1, max_iter + 1):
        rp = b * tau - A @ x
        rd = c * tau - A.T @ y - s
        rg = b @ y - c @ x - kappa
        mu = (x @ s + tau * kappa) / (n + 1)

        pobj, dobj = c @ x / tau, b @ y / tau
        err = max(
            np.linalg.norm(rp) / (tau * nb),
            np.linalg.norm(rd) / (tau * nc),
            abs(pobj - dobj) / (1.0 + abs(pobj)),
        )
        if err <= tol:
            return "optimal", x / tau, it
        if err < best_err:
            best, best_err = x / tau, err
        # normal equations lose accuracy near the end; settle for the best
        # iterate once complementarity has collapsed
        if mu / tau**2 < 1e-15 and best_err <= 1e-6:
            return "optimal", best, it
        if tau <= 1e-9 * max(1.0, kappa):
            by, cx = b @ y, c @ x
            if by > 0 and np.linalg.norm(A.T @ y + s) <= 1e-7 * by:
                return "infeasible", None, it
            if cx < 0 and np.linalg.norm(A @ x) <= 1e-7 * -cx:
                return "unbounded", None, it
            if mu < 1e-16:
                return ("infeasible" if by > -cx else "unbounded"), None, it

        dinv = x / s
        Ad = A * dinv
        factor = _factor(Ad @ A.T)
        p = scipy.linalg.cho_solve(factor, Ad @ c + b, check_finite=False)
        v = dinv * (A.T @ p - c)
        denom = c @ v - b @ p - kappa / tau

        def direction(eta, r_xs, r_tk):
            h1 = -eta * rd + r_xs / x
            q = scipy.linalg.cho_solve(factor, eta * rp - Ad @ h1, check_finite=False)
            u = dinv * (A.T @ q + h1)
            dtau = (eta * rg + b @ q - c @ u - r_tk / tau) / denom
            dx = u + v * dtau
            dy = q + p * dtau
            ds = (r_xs - s * dx) / x
            dkappa = (r_tk - kappa * dtau) / tau
            return dx, dy, ds, dtau, dkappa

        def step_to_boundary(dx, ds, dtau, dkappa):
            return min(
                _max_step(x, dx),
                _max_step(s, ds),
                _max_step(np.array([tau]), np.array([dtau])),
                _max_step(np.array([kappa]), np.array([dkappa])),
            )

        # predictor
        dx, dy, ds, dtau, dkappa = direction(1.0, -x * s, -tau * kappa)
        alpha = min(1.0, step_to_boundary(dx, ds, dtau, dkappa))
        mu_aff = ((x + alpha * dx) @ (s + alpha * ds) + (tau + alpha * dtau) * (kappa + alpha * dkappa)) / (n + 1)
        sigma = min(1.0, (mu_aff / mu) ** 3)

        # corrector
        r_xs = -x * s - dx * ds + sigma * mu
        r_tk = -tau * kappa - dtau * dkappa + sigma * mu
        dx, dy, ds, dtau, dkappa = direction(1.0 - sigma, r_xs, r_tk)
        alpha = min(1.0, 0.99 * step_to_boundary(dx, ds, dtau, dkappa))

        x = x + alpha * dx
        y = y + alpha * dy
        s = s + alpha * ds
        tau = tau + alpha * dtau
        kappa = kappa + alpha * dkappa

    raise IterationLimit(f"interior-point method did not converge in {max_iter} iterations")


def _polish(A, b, z, rounds: int = 3):
    """Reduce the residual of A z = b with scaled minimum-norm corrections.

    The correction is D A'(A D A')^+ r with D = diag(z), computed as a
    least-squares solve against A D^(1/2) to avoid squaring the condition
    number. Each entry moves in proportion to its size and entries at zero
    stay there. Anything pushed below zero is clipped, and a round is kept
    only if it helps.
    """
    if not b.size:
        return z
    best, best_res = z, np.abs(A @ z - b).max()
    for _ in range(rounds):
        if best_res < 1e-14:
            break
        root = np.sqrt(best)
        try:
            u, *_ = np.linalg.lstsq(A * root, b - A @ best, rcond=None)
        except np.linalg.LinAlgError:
            break
        cand = np.clip(best + root * u, 0.0, None)
        res = np.abs(A @ cand - b).max()
        if res >= best_res:
            break
        best, best_res = cand, res
    return best


def _solve_ipm(lp: LinearProgram, tol: float = 1e-10, max_iter: int = 200) -> LPSolution:
    A, b, c, recover = _standard_form(lp)
    status, z, iters = _hsd_ipm(A, b, c, tol, max_iter)
    if status == "infeasible":
        raise Infeasible("LP is infeasible")
    if status == "unbounded":
        raise Unbounded("LP is unbounded")
    z = _polish(A, b, np.clip(z, 0.0, None))
    x = recover(z)
    return LPSolution(x, float(lp.c @ x), iters, "ipm")


def _solve_highs(lp: LinearProgram, **options) -> LPSolution:
    from scipy.optimize import linprog

    bounds = [(None if np.isneginf(l) else l, None) for l in lp.lb]
    res = linprog(
        lp.c,
        A_ub=lp.A_ub if lp.b_ub.size else None,
        b_ub=lp.b_ub if lp.b_ub.size else None,
        A_eq=lp.A_eq if lp.b_eq.size else None,
        b_eq=lp.b_eq if lp.b_eq.size else None,
        bounds=bounds,
        method="highs",
        options=options or None,
    )
    if res.status == 2:
        raise Infeasible(res.message)
    if res.status == 3:
        raise Unbounded(res.message)
    if res.status == 1:
        raise IterationLimit(res.message)
    if res.status != 0:
        raise SolverError(res.message)
    return LPSolution(np.asarray(res.x), float(res.fun), int(res.nit), "highs")


BACKENDS = {"ipm": _solve_ipm, "highs": _solve_highs}
