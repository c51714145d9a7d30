"""Games with coupled affine inequality constraints.

Two concrete game types are provided. :class:`AffineGame` has pseudo-gradient
``F(x) = M x + c``. :class:`CournotGame` is the networked Nash-Cournot market
benchmark. Both expose ``partial_gradient(i, profile)``, the gradient of
player ``i``'s cost with respect to its own block, evaluated at an arbitrary
full profile. That is all the solvers need.

Symbols: ``price_intercept`` and ``price_slope`` are the per-market price
parameters in ``p(Ax) = price_intercept - price_slope * (Ax)``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

from dgne.errors import DimensionMismatch, NotStronglyMonotone, SingularBlock

RANK_RTOL = 1e-10


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Dims:
    block_sizes: tuple[int, ...]
    m: int

    def __post_init__(self):
        object.__setattr__(self, "block_sizes", tuple(int(s) for s in self.block_sizes))
        if len(self.block_sizes) < 1:
            raise ValueError("need at least one player")
        if any(s < 1 for s in self.block_sizes):
            raise ValueError("every player needs a decision of dimension >= 1")
        if self.m < 1:
            raise ValueError("need at least one coupled constraint row")

    @property
    def N(self) -> int:
        return len(self.block_sizes)

    @property
    def n(self) -> int:
        return sum(self.block_sizes)

    @cached_property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.block_sizes)]).astype(np.intp)

    def block(self, i: int) -> slice:
        return slice(int(self.offsets[i]), int(self.offsets[i + 1]))

    @cached_property
    def owner(self) -> np.ndarray:
        """``owner[k]`` is the player whose decision holds coordinate ``k``."""
        return np.repeat(np.arange(self.N), self.block_sizes)


def _check_vec(x, size: int, what: str = "vector") -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (size,):
        raise DimensionMismatch(f"{what} must have shape ({size},), got {x.shape}")
    return x


def min_norm_solution(A_i, b_i) -> np.ndarray:
    """``A_i^T (A_i A_i^T)^{-1} b_i``, the least-norm solution of ``A_i x = b_i``."""
    A_i = np.asarray(A_i, dtype=float)
    G = A_i @ A_i.T
    try:
        cond = np.linalg.cond(G)
    except np.linalg.LinAlgError:
        cond = np.inf
    if not np.isfinite(cond) or cond > 1.0 / RANK_RTOL**2:
        raise SingularBlock("A_i A_i^T is numerically singular (A_i lacks full row rank)")
    return A_i.T @ np.linalg.solve(G, np.asarray(b_i, dtype=float))


@dataclass(frozen=True)
class CoupledConstraint:
    """``A x <= b`` with ``A = [A_1 ... A_N]`` and ``b = sum_i b_i``.

    Player ``i`` privately holds ``(A_i, b_i)``. Each ``A_i`` must have full
    row rank. The stored ``feasible_point`` certifies that the set is nonempty.
    When none is given, the stacked least-norm solutions of ``A_i x_i = b_i``
    are used. That point satisfies ``A x = b``.
    """

    A_blocks: tuple
    b_blocks: tuple
    feasible_point: np.ndarray | None = None

    def __post_init__(self):
        A_blocks = tuple(_frozen(np.atleast_2d(A)) for A in self.A_blocks)
        b_blocks = tuple(_frozen(np.atleast_1d(b)) for b in self.b_blocks)
        if len(A_blocks) != len(b_blocks) or not A_blocks:
            raise DimensionMismatch("need one (A_i, b_i) pair per player")
        m = A_blocks[0].shape[0]
        for i, (A_i, b_i) in enumerate(zip(A_blocks, b_blocks)):
            if A_i.shape[0] != m or b_i.shape != (m,):
                raise DimensionMismatch(f"block {i}: A_i {A_i.shape}, b_i {b_i.shape}, m={m}")
            sv = np.linalg.svd(A_i, compute_uv=False)
            if sv.size < m or sv[-1] <= RANK_RTOL * sv[0]:
                raise SingularBlock(f"A_{i} does not have full row rank")
        object.__setattr__(self, "A_blocks", A_blocks)
        object.__setattr__(self, "b_blocks", b_blocks)
        if self.feasible_point is None:
            x0 = np.concatenate([min_norm_solution(A, b) for A, b in zip(A_blocks, b_blocks)])
        else:
            x0 = np.asarray(self.feasible_point, dtype=float)
        x0 = _frozen(x0)
        if x0.shape != (self.n,):
            raise DimensionMismatch("feasible point has wrong length")
        if np.any(self.A @ x0 - self.b > 1e-9 * (1.0 + np.abs(self.b))):
            raise ValueError("stored feasible point violates A x <= b")
        object.__setattr__(self, "feasible_point", x0)

    @cached_property
    def dims(self) -> Dims:
        return Dims(tuple(A.shape[1] for A in self.A_blocks), self.A_blocks[0].shape[0])

    @property
    def m(self) -> int:
        return self.A_blocks[0].shape[0]

    @property
    def n(self) -> int:
        return sum(A.shape[1] for A in self.A_blocks)

    @cached_property
    def A(self) -> np.ndarray:
        return _frozen(np.hstack(self.A_blocks))

    @cached_property
    def b(self) -> np.ndarray:
        return _frozen(np.sum(self.b_blocks, axis=0))

    @cached_property
    def b_stacked(self) -> np.ndarray:
        """``col(b_1, ..., b_N)`` as an ``(N, m)`` array."""
        return _frozen(np.vstack(self.b_blocks))

    @cached_property
    def lam_max_PiTPi(self) -> float:
        return max(float(np.linalg.norm(A, 2)) ** 2 for A in self.A_blocks)

    @cached_property
    def lam_min_PiPiT(self) -> float:
        return min(float(np.linalg.eigvalsh(A @ A.T)[0]) for A in self.A_blocks)


def constraint_residual(constraint: CoupledConstraint, x) -> np.ndarray:
    """``A x - b``; nonpositive entries are satisfied rows."""
    x = _check_vec(x, constraint.n, "x")
    return constraint.A @ x - constraint.b


@dataclass(frozen=True)
class AffineGame:
    M: np.ndarray
    c: np.ndarray
    constraint: CoupledConstraint

    def __post_init__(self):
        M, c = _frozen(self.M), _frozen(self.c)
        n = self.constraint.n
        if M.shape != (n, n) or c.shape != (n,):
            raise DimensionMismatch(f"M {M.shape} / c {c.shape} do not match n={n}")
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "c", c)

    @property
    def dims(self) -> Dims:
        return self.constraint.dims

    def partial_gradient(self, i: int, profile) -> np.ndarray:
        if not 0 <= i < self.dims.N:
            raise IndexError(f"player index {i} out of range")
        sl = self.dims.block(i)
        return self.M[sl] @ _check_vec(profile, self.dims.n, "profile") + self.c[sl]

    def pseudo_gradient(self, x) -> np.ndarray:
        return self.M @ _check_vec(x, self.dims.n, "x") + self.c


@dataclass(frozen=True)
class CournotGame:
    """Nash-Cournot market game.

    Firm ``i`` has cost ``x_i^T Q_i x_i + q_i^T x_i - p(Ax)^T A_i x_i`` where
    ``Q_i`` is diagonal positive definite.
    """

    Q: tuple
    q: tuple
    price_intercept: np.ndarray
    price_slope: np.ndarray
    constraint: CoupledConstraint

    def __post_init__(self):
        Q = tuple(_frozen(np.atleast_2d(Qi)) for Qi in self.Q)
        q = tuple(_frozen(np.atleast_1d(qi)) for qi in self.q)
        ell, s = _frozen(self.price_intercept), _frozen(self.price_slope)
        dims = self.constraint.dims
        if len(Q) != dims.N or len(q) != dims.N:
            raise DimensionMismatch("need one (Q_i, q_i) per player")
        for i, (Qi, qi) in enumerate(zip(Q, q)):
            ni = dims.block_sizes[i]
            if Qi.shape != (ni, ni) or qi.shape != (ni,):
                raise DimensionMismatch(f"player {i}: Q_i {Qi.shape}, q_i {qi.shape}")
            if np.any(Qi != np.diag(np.diag(Qi))) or np.any(np.diag(Qi) <= 0):
                raise ValueError(f"Q_{i} must be diagonal with positive entries")
        if ell.shape != (dims.m,) or s.shape != (dims.m,):
            raise DimensionMismatch("price parameters must be m-vectors")
        if np.any(ell <= 0) or np.any(s <= 0):
            raise ValueError("price intercepts and slopes must be positive")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "price_intercept", ell)
        object.__setattr__(self, "price_slope", s)

    @property
    def dims(self) -> Dims:
        return self.constraint.dims

    def price(self, profile) -> np.ndarray:
        return self.price_intercept - self.price_slope * (self.constraint.A @ profile)

    def cost(self, i: int, profile) -> float:
        """Cost of firm ``i`` when the full profile is ``profile``."""
        profile = _check_vec(profile, self.dims.n, "profile")
        xi = profile[self.dims.block(i)]
        Ai = self.constraint.A_blocks[i]
        return float(xi @ self.Q[i] @ xi + self.q[i] @ xi - self.price(profile) @ (Ai @ xi))

    def partial_gradient(self, i: int, profile) -> np.ndarray:
        return cournot_partial_gradient(self, i, profile)

    def pseudo_gradient(self, x) -> np.ndarray:
        x = _check_vec(x, self.dims.n, "x")
        return np.concatenate([self.partial_gradient(i, x) for i in range(self.dims.N)])


Game = AffineGame | CournotGame


def cournot_partial_gradient(game: CournotGame, i: int, xi_profile) -> np.ndarray:
    """``2 Q_i x_i + q_i - A_i^T p(A x) + A_i^T diag(s) A_i x_i``."""
    dims = game.dims
    if not 0 <= i < dims.N:
        raise IndexError(f"player index {i} out of range")
    profile = _check_vec(xi_profile, dims.n, "profile")
    xi = profile[dims.block(i)]
    Ai = game.constraint.A_blocks[i]
    s = game.price_slope
    return (2.0 * game.Q[i] @ xi + game.q[i] - Ai.T @ game.price(profile)
            + Ai.T @ (s * (Ai @ xi)))


def pseudo_gradient(game, x) -> np.ndarray:
    """Stacked own-block gradients at a single true profile ``x``."""
    x = _check_vec(x, game.dims.n, "x")
    return game.pseudo_gradient(x)


class ExtendedProfile:
    """Each player's private copy of the full decision profile.

    Stored as an ``(N, n)`` array: row ``i`` is player ``i``'s vector, whose
    own block is its true decision and whose other blocks are its estimates.
    The own-block and other-blocks selections act as index arithmetic on the
    rows. No selection matrices are ever built.
    """

    def __init__(self, dims: Dims, blocks):
        arr = np.array(blocks, dtype=float)
        if arr.shape != (dims.N, dims.n):
            raise DimensionMismatch(f"expected ({dims.N}, {dims.n}) profile, got {arr.shape}")
        self.dims = dims
        self.blocks = arr

    @classmethod
    def consensus(cls, dims: Dims, x) -> "ExtendedProfile":
        x = _check_vec(x, dims.n, "x")
        return cls(dims, np.tile(x, (dims.N, 1)))

    def own(self, i: int) -> np.ndarray:
        return self.blocks[i, self.dims.block(i)]

    def others(self, i: int) -> np.ndarray:
        sl = self.dims.block(i)
        return np.concatenate([self.blocks[i, :sl.start], self.blocks[i, sl.stop:]])

    def true_profile(self) -> np.ndarray:
        """Stack of every player's own block (the actual decisions)."""
        d = self.dims
        return self.blocks[d.owner, np.arange(d.n)]

    def with_player(self, i: int, own, others) -> np.ndarray:
        """Row ``i`` rebuilt from an own block and the other-blocks vector."""
        sl = self.dims.block(i)
        others = np.asarray(others, dtype=float)
        return np.concatenate([others[:sl.start], own, others[sl.start:]])


def extended_pseudo_gradient(game, profile) -> np.ndarray:
    """Player ``i``'s block is its own partial gradient at its own copy."""
    if not isinstance(profile, ExtendedProfile):
        profile = ExtendedProfile(game.dims, profile)
    if profile.dims != game.dims:
        raise DimensionMismatch("profile dims do not match the game")
    return np.concatenate([game.partial_gradient(i, profile.blocks[i])
                           for i in range(game.dims.N)])


def affine_from_cournot(game: CournotGame) -> AffineGame:
    """Expose the (affine) Cournot pseudo-gradient as ``M x + c``."""
    A_blocks = game.constraint.A_blocks
    S = np.diag(game.price_slope)
    rows = []
    for i, Ai in enumerate(A_blocks):
        row = [Ai.T @ S @ Aj for Aj in A_blocks]
        row[i] = 2.0 * game.Q[i] + 2.0 * Ai.T @ S @ Ai
        rows.append(row)
    M = np.block(rows)
    c = np.concatenate([qi - Ai.T @ game.price_intercept for qi, Ai in zip(game.q, A_blocks)])
    return AffineGame(M, c, game.constraint)


def as_affine(game) -> AffineGame:
    if isinstance(game, AffineGame):
        return game
    if isinstance(game, CournotGame):
        return affine_from_cournot(game)
    raise TypeError(f"no affine representation for {type(game).__name__}")


@dataclass(frozen=True)
class MonotonicityConstants:
    mu: float
    L: float


def monotonicity_constants(game) -> MonotonicityConstants:
    """Strong-monotonicity and Lipschitz constants of an affine pseudo-gradient.

    ``mu`` is the smallest eigenvalue of the symmetric part of ``M``. ``L`` is
    the largest spectral norm of a block row ``M_i``. Each player's gradient
    reads the whole profile, so ``L`` bounds the extended pseudo-gradient too.
    """
    M = as_affine(game).M
    dims = game.dims
    mu = float(np.linalg.eigvalsh(0.5 * (M + M.T))[0])
    if mu <= 1e-12:
        raise NotStronglyMonotone(f"symmetric part of M has lambda_min = {mu:.3e}")
    L = max(float(np.linalg.norm(M[dims.block(i)], 2)) for i in range(dims.N))
    return MonotonicityConstants(mu, L)


# ---------------------------------------------------------------------------
# fixtures

def scalar_quadratic_game(targets: Sequence[float], b_blocks: Sequence[float]) -> AffineGame:
    """Players ``f_i = (x_i - t_i)^2`` sharing the single row ``sum x_i <= sum b_i``."""
    t = np.asarray(targets, dtype=float)
    N = t.size
    constraint = CoupledConstraint(
        tuple(np.ones((1, 1)) for _ in range(N)),
        tuple(np.array([float(b)]) for b in b_blocks),
    )
    return AffineGame(2.0 * np.eye(N), -2.0 * t, constraint)


def random_affine_game(rng: np.random.Generator, N: int, block_sizes=None, m: int = 1,
                       coupling: float = 0.3, active: bool = True) -> AffineGame:
    """Seeded strongly monotone affine game with a full-row-rank coupling.

    ``M = D + coupling * G`` with ``D`` symmetric positive definite and ``G`` a
    random matrix scaled so the symmetric part stays positive definite.
    With ``active=True`` the capacities are chosen below the unconstrained
    equilibrium's usage so the constraint binds.
    """
    if block_sizes is None:
        block_sizes = [m] * N
    block_sizes = [int(s) for s in block_sizes]
    if any(s < m for s in block_sizes):
        raise ValueError("full row rank needs n_i >= m")
    n = sum(block_sizes)
    H = rng.standard_normal((n, n))
    D = np.eye(n) + 0.5 * (H @ H.T) / n
    G = rng.standard_normal((n, n))
    G *= coupling / max(np.linalg.norm(G, 2), 1e-12)
    M = D + G
    c = rng.uniform(-3.0, -1.0, n)
    A_blocks = []
    for ni in block_sizes:
        Ai = rng.uniform(0.5, 1.5, (m, ni))
        while np.linalg.svd(Ai, compute_uv=False)[-1] < 0.1:
            Ai = rng.uniform(0.5, 1.5, (m, ni))
        A_blocks.append(Ai)
    A = np.hstack(A_blocks)
    x_free = np.linalg.solve(M, -c)
    usage = A @ x_free
    if active:
        total = usage - rng.uniform(0.5, 1.5, m) * (np.abs(usage) + 1.0) * 0.3
    else:
        total = usage + rng.uniform(1.0, 2.0, m) * (np.abs(usage) + 1.0)
    shares = rng.dirichlet(np.ones(N))
    b_blocks = [shares[i] * total for i in range(N)]
    return AffineGame(M, c, CoupledConstraint(tuple(A_blocks), tuple(b_blocks)))


# ---------------------------------------------------------------------------
# serialization

def game_to_dict(game) -> dict:
    cons = game.constraint
    d = {
        "type": "affine" if isinstance(game, AffineGame) else "cournot",
        "dims": {"block_sizes": list(game.dims.block_sizes), "m": game.dims.m},
        "constraint": {
            "A_blocks": [A.tolist() for A in cons.A_blocks],
            "b_blocks": [b.tolist() for b in cons.b_blocks],
            "feasible_point": cons.feasible_point.tolist(),
        },
    }
    if isinstance(game, AffineGame):
        d["M"] = game.M.tolist()
        d["c"] = game.c.tolist()
    elif isinstance(game, CournotGame):
        d["Q_diagonals"] = [np.diag(Qi).tolist() for Qi in game.Q]
        d["q"] = [qi.tolist() for qi in game.q]
        d["price_intercept"] = game.price_intercept.tolist()
        d["price_slope"] = game.price_slope.tolist()
    else:
        raise TypeError(f"cannot serialize {type(game).__name__}")
    return d


def game_from_dict(d: dict):
    cons_d = d["constraint"]
    cons = CoupledConstraint(
        tuple(np.array(A, dtype=float) for A in cons_d["A_blocks"]),
        tuple(np.array(b, dtype=float) for b in cons_d["b_blocks"]),
        cons_d.get("feasible_point"),
    )
    dims = d.get("dims")
    if dims is not None and (tuple(dims["block_sizes"]) != cons.dims.block_sizes
                             or dims["m"] != cons.m):
        raise DimensionMismatch("declared dims disagree with constraint blocks")
    kind = d["type"]
    if kind == "affine":
        return AffineGame(np.array(d["M"], dtype=float), np.array(d["c"], dtype=float), cons)
    if kind == "cournot":
        return CournotGame(
            tuple(np.diag(q) for q in d["Q_diagonals"]),
            tuple(np.array(q, dtype=float) for q in d["q"]),
            np.array(d["price_intercept"], dtype=float),
            np.array(d["price_slope"], dtype=float),
            cons,
        )
    raise ValueError(f"unknown game type {kind!r}")


def save_game(game, path) -> None:
    Path(path).write_text(json.dumps(game_to_dict(game)) + "\n")


def load_game(path):
    return game_from_dict(json.loads(Path(path).read_text()))
