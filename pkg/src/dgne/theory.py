"""Stepsize certificate for the decentralized primal-dual iteration.

Computes the 2x2 comparison matrix ``M_alpha`` that governs the primal error,
its spectral radius, the admissible stepsize region and the resulting
geometric contraction factor ``a`` of the Lyapunov value.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from dgne.errors import DegenerateSigma
from dgne.game import monotonicity_constants


@dataclass(frozen=True)
class TheoryConstants:
    mu: float
    L: float
    sigma: float
    N: int
    lam_max_PiTPi: float = 1.0
    lam_min_PiPiT: float = 1.0
    lam_max_B: float = 0.0
    min_nonzero_sv_B: float = float("nan")

    def __post_init__(self):
        if not 0 < self.mu <= self.L * (1 + 1e-12):
            raise ValueError(f"need 0 < mu <= L, got mu={self.mu}, L={self.L}")
        if not 0 <= self.sigma < 1:
            raise ValueError(f"sigma must lie in [0, 1), got {self.sigma}")
        if self.lam_min_PiPiT <= 0:
            raise ValueError("lambda_min(Pi Pi^T) must be positive (full row rank blocks)")
        if self.lam_max_B >= 1:
            raise ValueError("lambda_max(B) must be < 1")

    @classmethod
    def from_instance(cls, game, topology) -> "TheoryConstants":
        mc = monotonicity_constants(game)
        cons = game.constraint
        return cls(
            mu=mc.mu, L=mc.L, sigma=topology.sigma, N=topology.N,
            lam_max_PiTPi=cons.lam_max_PiTPi, lam_min_PiPiT=cons.lam_min_PiPiT,
            lam_max_B=topology.lambda_max_B, min_nonzero_sv_B=topology.min_nonzero_sv_B,
        )

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Bound:
    """An upper bound ``value = min(terms)``; keeping the terms shows which one binds."""

    value: float
    terms: tuple[float, ...]

    @property
    def binding(self) -> int:
        return int(np.argmin(self.terms))


@dataclass(frozen=True)
class StepsizeBounds:
    alpha: Bound
    beta: Bound
    gamma: Bound


def m_alpha(consts: TheoryConstants, alpha: float) -> np.ndarray:
    mu, L, s, N = consts.mu, consts.L, consts.sigma, consts.N
    off = (s + 1.0) * L * alpha
    return np.array([
        [1.0 - (mu / N) * alpha + L**2 * alpha**2, off],
        [off, s**2 + 3.0 * s * L * alpha + L**2 * alpha**2],
    ])


def rho_m_alpha(consts: TheoryConstants, alpha: float) -> float:
    """Spectral radius of ``M_alpha`` from the closed-form 2x2 eigenvalues."""
    (p, r), (_, q) = m_alpha(consts, alpha)
    half_tr = 0.5 * (p + q)
    # sqrt((p-q)^2/4 + r^2) avoids the cancellation in tr^2 - 4 det
    rad = math.hypot(0.5 * (p - q), r)
    return max(abs(half_tr + rad), abs(half_tr - rad))


def alpha_bound(consts: TheoryConstants) -> Bound:
    """Largest alpha for which the sufficient conditions give ``rho(M_alpha) < 1``.

    At ``sigma = 0`` the first term is taken as ``+inf`` because the
    constraint it encodes disappears.
    """
    mu, L, s, N = consts.mu, consts.L, consts.sigma, consts.N
    t1 = math.inf if s == 0 else (1.0 - s**2) / (9.0 * s * L)
    t2 = math.sqrt(1.0 - s**2) / (math.sqrt(3.0) * L)
    t3 = mu * (1.0 - s) / (6.0 * N * L**2)
    terms = (t1, t2, t3)
    return Bound(min(terms), terms)


def beta_gamma_bounds(consts: TheoryConstants, alpha: float,
                      beta: float | None = None) -> tuple[Bound, Bound | None]:
    """Upper bounds on ``beta`` and, for a given ``beta``, on ``gamma``.

    Raises :class:`DegenerateSigma` when ``sigma = 0``. The ``sigma * L`` term
    then forces ``beta <= 0``, so no ``beta`` can be certified.
    """
    if consts.sigma == 0:
        raise DegenerateSigma("sigma = 0: the beta bound sigma*L/(2 lambda_max(Pi^T Pi)) is zero")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    lmax, lmin = consts.lam_max_PiTPi, consts.lam_min_PiPiT
    b_terms = (
        consts.mu / (2.0 * consts.N * lmax),
        consts.sigma * consts.L / (2.0 * lmax),
        1.0 / (alpha * lmin),
    )
    beta_b = Bound(min(b_terms), b_terms)
    if beta is None:
        return beta_b, None
    lb2 = consts.lam_max_B**2
    g_terms = (
        (2.0 - 2.0 * lb2) / (1.0 - alpha * beta * lmin),
        math.inf if lb2 == 0 else 1.0 / lb2,
    )
    return beta_b, Bound(min(g_terms), g_terms)


def stepsize_bounds(consts: TheoryConstants, alpha: float, beta: float) -> StepsizeBounds:
    beta_b, gamma_b = beta_gamma_bounds(consts, alpha, beta)
    return StepsizeBounds(alpha_bound(consts), beta_b, gamma_b)


@dataclass(frozen=True)
class Contraction:
    a: float
    terms: tuple[float, float, float]
    certified: bool


def is_certified(consts: TheoryConstants, alpha: float, beta: float, gamma: float) -> bool:
    """Whether ``rho(M_alpha) < 1`` and both stepsize inequalities hold strictly."""
    if min(alpha, beta, gamma) <= 0 or consts.sigma == 0:
        return False
    if not rho_m_alpha(consts, alpha) < 1:
        return False
    beta_b, _ = beta_gamma_bounds(consts, alpha)
    if not beta < beta_b.value:
        return False
    _, gamma_b = beta_gamma_bounds(consts, alpha, beta)
    return bool(gamma < gamma_b.value)


def contraction_factor(consts: TheoryConstants, alpha: float, beta: float,
                       gamma: float) -> Contraction:
    """``a = max(rho(M_alpha), 1 - alpha beta lambda_min(Pi Pi^T), 1 - sv_min(B)^2 gamma)``.

    Computed for any stepsizes; ``certified`` says whether the guarantee
    actually applies.
    """
    terms = (
        rho_m_alpha(consts, alpha),
        1.0 - alpha * beta * consts.lam_min_PiPiT,
        1.0 - consts.min_nonzero_sv_B**2 * gamma,
    )
    a = max(terms)
    # When alpha*beta is below rounding level a evaluates to exactly 1; such a
    # certificate promises nothing and is reported as uncertified.
    certified = bool(is_certified(consts, alpha, beta, gamma) and a < 1)
    if certified and not a > 0:
        raise AssertionError(f"certified stepsizes gave a = {a}")
    return Contraction(a, terms, certified)


def certified_stepsizes(consts: TheoryConstants, beta: float = 0.1, gamma: float = 0.1,
                        alpha_fraction: float = 0.99) -> tuple[float, float, float]:
    """``alpha`` at a fraction of its bound, with the given ``beta`` and ``gamma``."""
    return alpha_fraction * alpha_bound(consts).value, beta, gamma


def _finite(x: float):
    return x if math.isfinite(x) else None


def certification_report(consts: TheoryConstants, alpha: float, beta: float,
                         gamma: float) -> dict:
    """JSON-ready summary of every bound, ``rho(M_alpha)`` and ``a``.

    A degenerate ``sigma`` is reported under ``"error"`` instead of raising.
    Infinite terms are encoded as ``null``.
    """
    ab = alpha_bound(consts)
    report = {
        "alpha": alpha, "beta": beta, "gamma": gamma,
        "alpha_terms": [_finite(t) for t in ab.terms],
        "alpha_max": ab.value,
        "rho_M_alpha": rho_m_alpha(consts, alpha),
    }
    try:
        beta_b, gamma_b = beta_gamma_bounds(consts, alpha, beta)
    except DegenerateSigma as exc:
        report.update(beta_terms=None, gamma_terms=None, beta_max=None, gamma_max=None,
                      error={"type": "DegenerateSigma", "message": str(exc)})
    else:
        report.update(beta_terms=[_finite(t) for t in beta_b.terms], beta_max=beta_b.value,
                      gamma_terms=[_finite(t) for t in gamma_b.terms],
                      gamma_max=_finite(gamma_b.value))
    c = contraction_factor(consts, alpha, beta, gamma)
    report.update(a=c.a, a_terms=list(c.terms), certified=c.certified)
    return report
