"""Centralized ground truth for the variational GNE.

Solves ``F(x*)^T (x - x*) >= 0 for all x in {A x <= b}`` by projected
gradient with full information, recovers the shared multiplier and reports
KKT residuals.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import nnls

from dgne.errors import DimensionMismatch, MaxIterExceeded, MultiplierInconsistent
from dgne.game import CoupledConstraint, as_affine, monotonicity_constants

ACTIVE_TOL = 1e-7


@dataclass(frozen=True)
class VIProblem:
    F: Callable[[np.ndarray], np.ndarray]
    constraint: CoupledConstraint
    mu: float
    L: float

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("VI oracle needs a strongly monotone operator (mu > 0)")

    @classmethod
    def from_game(cls, game) -> "VIProblem":
        consts = monotonicity_constants(game)
        affine = as_affine(game)
        return cls(affine.pseudo_gradient, game.constraint, consts.mu, consts.L)


@dataclass(frozen=True)
class KKTReport:
    stationarity: float
    primal_violation: float
    dual_violation: float
    complementarity: float

    @property
    def residual(self) -> float:
        return max(self.stationarity, self.primal_violation,
                   self.dual_violation, self.complementarity)


def kkt_residual(problem: VIProblem, x, lam) -> KKTReport:
    x = np.asarray(x, dtype=float)
    lam = np.asarray(lam, dtype=float)
    cons = problem.constraint
    if x.shape != (cons.n,) or lam.shape != (cons.m,):
        raise DimensionMismatch(f"x {x.shape} / lambda {lam.shape} vs n={cons.n}, m={cons.m}")
    return kkt_report(problem.F(x), cons, x, lam)


def kkt_report(Fx, cons: CoupledConstraint, x, lam) -> KKTReport:
    """KKT measures given an already evaluated pseudo-gradient ``Fx = F(x)``."""
    slack = cons.A @ x - cons.b
    return KKTReport(
        stationarity=float(np.max(np.abs(Fx + cons.A.T @ lam))),
        primal_violation=float(np.max(np.maximum(slack, 0.0))),
        dual_violation=float(np.max(np.maximum(-lam, 0.0))),
        complementarity=float(abs(lam @ slack)),
    )


@dataclass
class Projection:
    x: np.ndarray
    eta: np.ndarray
    iterations: int


def project_polyhedron(z, A, b, *, tol: float = 1e-10, max_iters: int = 200_000,
                       eta0=None, full_output: bool = False):
    """Euclidean projection of ``z`` onto ``{x : A x <= b}``.

    Runs projected gradient ascent on the dual
    ``-0.5 ||A^T eta||^2 + eta^T (A z - b)`` over ``eta >= 0`` with step
    ``1 / lambda_max(A A^T)`` and returns ``z - A^T eta``. Iteration stops once
    the projected dual gradient falls below ``tol`` (relative to
    the initial constraint violation). A warm start ``eta0``
    speeds up repeated calls along a trajectory.
    """
    z = np.asarray(z, dtype=float)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    slack0 = A @ z - b
    if np.all(slack0 <= 0):
        out = Projection(z.copy(), np.zeros(b.size), 0)
        return out if full_output else out.x

    G = A @ A.T
    step = 1.0 / float(np.linalg.eigvalsh(G)[-1])
    eta = np.zeros(b.size) if eta0 is None else np.maximum(np.asarray(eta0, dtype=float), 0.0)
    scale = 1.0 + float(np.max(np.abs(slack0)))
    best = np.inf
    for it in range(1, max_iters + 1):
        grad = slack0 - G @ eta
        eta_next = np.maximum(eta + step * grad, 0.0)
        res = float(np.max(np.abs(eta_next - eta))) / step
        eta = eta_next
        best = min(best, res)
        if res <= tol * scale:
            break
    else:
        raise MaxIterExceeded(f"polyhedral projection did not converge in {max_iters} iterations",
                              best_residual=best)
    x = z - A.T @ eta
    _check_projection_kkt(x, eta, z, A, b)
    out = Projection(x, eta, it)
    return out if full_output else out.x


def _check_projection_kkt(x, eta, z, A, b, tol=1e-9):
    scale = 1.0 + float(np.max(np.abs(b))) + float(np.max(np.abs(z)))
    slack = A @ x - b
    if np.max(slack) > tol * scale or abs(eta @ slack) > tol * scale * (1.0 + eta.sum()):
        raise MaxIterExceeded("projection KKT check failed",
                              best_residual=float(max(np.max(slack), abs(eta @ slack))))


@dataclass(frozen=True)
class VISolution:
    x_star: np.ndarray
    iterations: int
    residual: float


def natural_residual(problem: VIProblem, x, step: float) -> float:
    cons = problem.constraint
    x_new = project_polyhedron(x - step * problem.F(x), cons.A, cons.b, tol=1e-13)
    return float(np.max(np.abs(x - x_new)))


def solve_vi(problem: VIProblem, tol: float = 1e-11, max_iters: int = 500_000,
             x0=None, step: float | None = None) -> VISolution:
    """Projected-gradient fixed point ``x <- P(x - step * F(x))``.

    The default step ``mu / L^2`` makes the map a contraction with factor
    ``sqrt(1 - mu^2 / L^2)``. Starts from the constraint's stored feasible
    point unless ``x0`` is given, so the result is deterministic.
    """
    cons = problem.constraint
    step = problem.mu / problem.L**2 if step is None else float(step)
    x = np.array(cons.feasible_point if x0 is None else x0, dtype=float)
    eta = None
    best = np.inf
    for it in range(1, max_iters + 1):
        proj = project_polyhedron(x - step * problem.F(x), cons.A, cons.b, tol=1e-13,
                                  eta0=eta, full_output=True)
        eta = proj.eta
        res = float(np.max(np.abs(proj.x - x)))
        x = proj.x
        best = min(best, res)
        if res <= tol:
            break
    else:
        raise MaxIterExceeded(f"VI solver did not reach {tol:g} in {max_iters} iterations",
                              best_residual=best)
    final = natural_residual(problem, x, step)
    if final > 10 * tol:
        raise MaxIterExceeded("natural residual re-check failed", best_residual=final)
    return VISolution(x, it, final)


def recover_multiplier(problem: VIProblem, x_star, tol: float = 1e-6) -> np.ndarray:
    """Shared multiplier from stationarity on the active rows (nonnegative LS)."""
    cons = problem.constraint
    x_star = np.asarray(x_star, dtype=float)
    slack = cons.A @ x_star - cons.b
    active = slack >= -ACTIVE_TOL
    lam = np.zeros(cons.m)
    if np.any(active):
        lam_act, _ = nnls(cons.A[active].T, -problem.F(x_star))
        lam[active] = lam_act
    report = kkt_residual(problem, x_star, lam)
    if report.residual > tol:
        raise MultiplierInconsistent(
            f"KKT residual {report.residual:.3e} > {tol:g} with recovered multiplier")
    return lam


def solve_gne(game, tol: float = 1e-11, max_iters: int = 500_000):
    """Variational GNE ``(x*, lambda*)`` of ``game`` via the VI route."""
    problem = VIProblem.from_game(game)
    sol = solve_vi(problem, tol=tol, max_iters=max_iters)
    return sol.x_star, recover_multiplier(problem, sol.x_star)
