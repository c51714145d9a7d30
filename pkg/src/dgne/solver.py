"""Decentralized primal-dual iteration for variational GNE seeking.

Two equivalent forms are implemented:

* the fully decentralized round, in which each player mixes neighbours'
  profile copies, takes a gradient step on its own block and runs the
  auxiliary dual recursion on gossip-weighted neighbour messages, and
* the semi-centralized reference form, which carries the global variable
  ``y`` and needs the square root ``B`` of the gossip matrix.

Layout: player ``i``'s copy of the full profile is row ``i`` of an
``(N, n)`` array; stacked per-player dual quantities are ``(N, m)`` arrays.
The operator ``B kron I_m`` is therefore just ``B @ Y`` on such arrays.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from dgne import kernels
from dgne.errors import (
    DimensionMismatch,
    InconsistentKKT,
    NonFinite,
    RangeSpaceMiss,
    WeightNotPD,
)
from dgne.game import AffineGame, CournotGame, Dims, as_affine, min_norm_solution
from dgne.oracle import kkt_report
from dgne.topology import Topology

INIT_MODES = ("zeros", "random", "feasible")
FORMS = ("decentralized", "semi_centralized")
CSV_HEADER = ("iter", "dist_to_star", "consensus_err", "dual_spread",
              "constraint_violation", "kkt_residual", "lyapunov_E")


@dataclass
class SolverConfig:
    alpha: float
    beta: float
    gamma: float
    max_iters: int = 10_000
    stop_tol: float = 1e-10
    init_mode: str = "feasible"
    form: str = "decentralized"
    seed: int = 0
    backend: str | None = None

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0 and self.gamma > 0):
            raise ValueError("stepsizes alpha, beta, gamma must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.init_mode not in INIT_MODES:
            raise ValueError(f"init_mode must be one of {INIT_MODES}")
        if self.form not in FORMS:
            raise ValueError(f"form must be one of {FORMS}")


@dataclass
class PlayerState:
    """What player ``i`` keeps locally between rounds."""

    est: np.ndarray       # own copy of the full profile (own block = decision)
    v: np.ndarray         # auxiliary dual variable
    lam: np.ndarray       # multiplier estimate
    lam_prev: np.ndarray  # multiplier estimate one round earlier
    x_prev: np.ndarray    # own decision one round earlier


@dataclass
class NetworkState:
    """Round-``k`` state of all players, stored as stacked arrays."""

    dims: Dims
    est: np.ndarray
    v: np.ndarray
    lam: np.ndarray
    lam_prev: np.ndarray
    x_prev: np.ndarray

    @property
    def x(self) -> np.ndarray:
        """True decisions ``col(x_1, ..., x_N)``."""
        return self.est[self.dims.owner, np.arange(self.dims.n)]

    def player(self, i: int) -> PlayerState:
        sl = self.dims.block(i)
        return PlayerState(self.est[i].copy(), self.v[i].copy(), self.lam[i].copy(),
                           self.lam_prev[i].copy(), self.x_prev[sl].copy())

    def copy(self) -> "NetworkState":
        return NetworkState(self.dims, self.est.copy(), self.v.copy(), self.lam.copy(),
                            self.lam_prev.copy(), self.x_prev.copy())

    def allclose(self, other: "NetworkState", atol: float) -> bool:
        return all(np.max(np.abs(a - b), initial=0.0) <= atol for a, b in
                   zip(self._arrays(), other._arrays()))

    def max_abs_diff(self, other: "NetworkState") -> float:
        return max(float(np.max(np.abs(a - b), initial=0.0))
                   for a, b in zip(self._arrays(), other._arrays()))

    def _arrays(self):
        return (self.est, self.v, self.lam, self.lam_prev, self.x_prev)

    def to_dict(self) -> dict:
        return {
            "block_sizes": list(self.dims.block_sizes), "m": self.dims.m,
            "est": self.est.tolist(), "v": self.v.tolist(), "lam": self.lam.tolist(),
            "lam_prev": self.lam_prev.tolist(), "x_prev": self.x_prev.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkState":
        dims = Dims(tuple(d["block_sizes"]), int(d["m"]))
        arr = {k: np.array(d[k], dtype=float).reshape(shape) for k, shape in (
            ("est", (dims.N, dims.n)), ("v", (dims.N, dims.m)), ("lam", (dims.N, dims.m)),
            ("lam_prev", (dims.N, dims.m)), ("x_prev", (dims.n,)))}
        return cls(dims, **arr)


@dataclass
class GlobalAux:
    """Global variable ``y`` of the semi-centralized form, one ``m``-block per player."""

    y: np.ndarray

    def to_dict(self) -> dict:
        return {"y": self.y.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "GlobalAux":
        return cls(np.array(d["y"], dtype=float))


def save_snapshot(path, state: NetworkState, aux: GlobalAux | None = None, k: int = 0) -> None:
    payload = {"iter": k, "state": state.to_dict(),
               "aux": None if aux is None else aux.to_dict()}
    Path(path).write_text(json.dumps(payload) + "\n")


def load_snapshot(path) -> tuple[NetworkState, GlobalAux | None, int]:
    d = json.loads(Path(path).read_text())
    aux = None if d.get("aux") is None else GlobalAux.from_dict(d["aux"])
    return NetworkState.from_dict(d["state"]), aux, int(d.get("iter", 0))


# ---------------------------------------------------------------------------
# initialization

def initialize(game, topology: Topology, config: SolverConfig,
               rng: np.random.Generator | None = None) -> tuple[NetworkState, GlobalAux]:
    """Round-0 state.

    Always sets ``v = 0``, ``lambda_prev = 0``, ``y = 0`` and ``x_prev_i`` to
    the least-norm solution of ``A_i x = b_i``. ``init_mode`` picks the rest:

    * ``zeros``: every copy and every multiplier start at 0;
    * ``random``: copies and multipliers uniform in ``[-1, 1]``;
    * ``feasible`` (default): like ``random``, but every own block is the
      least-norm solution, so the stacked local residuals ``A_i x_i - b_i``
      are all 0.

    The decentralized dual recursion only ever sees ``b`` through the
    starting point: it accumulates ``A x_{k+1} - A x_0`` where the
    semi-centralized form accumulates ``A x_{k+1} - b``. From a start with
    ``A x_0 != b`` it therefore converges to the variational GNE for the
    shifted bound ``A x <= A x_0`` (see :func:`effective_bound`). Only the
    ``feasible`` mode makes the two forms coincide.
    """
    dims = game.dims
    if dims.N != topology.N:
        raise DimensionMismatch(f"game has {dims.N} players, topology {topology.N} nodes")
    rng = np.random.default_rng(config.seed) if rng is None else rng
    cons = game.constraint
    x_anchor = np.concatenate([min_norm_solution(A, b)
                               for A, b in zip(cons.A_blocks, cons.b_blocks)])
    N, n, m = dims.N, dims.n, dims.m
    if config.init_mode == "zeros":
        est = np.zeros((N, n))
        lam = np.zeros((N, m))
    else:
        est = rng.uniform(-1.0, 1.0, (N, n))
        lam = rng.uniform(-1.0, 1.0, (N, m))
        if config.init_mode == "feasible":
            est[dims.owner, np.arange(n)] = x_anchor
    state = NetworkState(dims, est, np.zeros((N, m)), lam, np.zeros((N, m)), x_anchor.copy())
    return state, GlobalAux(np.zeros((N, m)))


def effective_bound(game, state: NetworkState) -> np.ndarray:
    """Right-hand side the decentralized form actually enforces from ``state``.

    Equal to ``A x_0`` for the own blocks of a round-0 state; it coincides
    with ``b`` exactly when the start satisfies ``A_i x_i = b_i`` for all i.
    """
    return game.constraint.A @ state.x


# ---------------------------------------------------------------------------
# per-player message passing

class Message(NamedTuple):
    """What player ``j`` broadcasts to its neighbours each round.

    Only the multiplier increment ``lam - lam_prev`` is sent, since the
    auxiliary recursion never needs neighbours' raw multipliers.
    """

    est: np.ndarray
    v: np.ndarray
    lam_delta: np.ndarray


def publish(state: NetworkState) -> list[Message]:
    msgs = []
    for j in range(state.dims.N):
        est, v, dl = state.est[j].copy(), state.v[j].copy(), state.lam[j] - state.lam_prev[j]
        for a in (est, v, dl):
            a.setflags(write=False)
        msgs.append(Message(est, v, dl))
    return msgs


def _neighbours(row) -> np.ndarray:
    return np.flatnonzero(np.asarray(row) != 0.0)


def local_primal_update(i: int, game, player: PlayerState, messages: Sequence[Message],
                        w_row, alpha: float) -> np.ndarray:
    """Next own decision: mix the neighbours' copies of block ``i`` and step
    along ``-(own partial gradient at own copy + A_i^T lambda_i)``."""
    sl = game.dims.block(i)
    if player.est.shape != (game.dims.n,):
        raise DimensionMismatch("player estimate has wrong length")
    mixed = np.zeros(sl.stop - sl.start)
    for j in _neighbours(w_row):
        mixed += w_row[j] * messages[j].est[sl]
    A_i = game.constraint.A_blocks[i]
    return mixed - alpha * game.partial_gradient(i, player.est) - alpha * (A_i.T @ player.lam)


def estimate_mix(i: int, dims: Dims, messages: Sequence[Message], w_row) -> np.ndarray:
    """Weighted average of the neighbours' entries for every block but ``i``."""
    mixed = np.zeros(dims.n)
    for j in _neighbours(w_row):
        mixed += w_row[j] * messages[j].est
    sl = dims.block(i)
    return np.concatenate([mixed[:sl.start], mixed[sl.stop:]])


def aux_dual_update(i: int, constraint, player: PlayerState, messages: Sequence[Message],
                    c_row, beta: float, gamma: float, x_i_next) -> np.ndarray:
    """``v_i - sum_j c_ij (gamma v_j + dlam_j) + dlam_i + beta A_i (x_i_next - x_i)``."""
    sl = constraint.dims.block(i)
    A_i = constraint.A_blocks[i]
    x_i = player.est[sl]
    x_i_next = np.asarray(x_i_next, dtype=float)
    if x_i_next.shape != x_i.shape or player.v.shape != (constraint.m,):
        raise DimensionMismatch("player state does not match the constraint block")
    acc = player.v + (player.lam - player.lam_prev) + beta * (A_i @ (x_i_next - x_i))
    for j in _neighbours(c_row):
        acc = acc - c_row[j] * (gamma * messages[j].v + messages[j].lam_delta)
    return acc


def project_dual(v) -> np.ndarray:
    return np.maximum(np.asarray(v, dtype=float), 0.0)


def synchronous_round(state: NetworkState, game, topology: Topology, config: SolverConfig,
                      order: Sequence[int] | None = None) -> NetworkState:
    """One round of message passing.

    Every player reads only the published round-``k`` messages and its own
    round-``k`` state, and writes into a fresh buffer. ``order`` (any
    permutation of players) therefore cannot change the result.
    """
    dims = state.dims
    messages = publish(state)
    snapshot = [state.player(i) for i in range(dims.N)]
    nxt = NetworkState(dims, np.empty_like(state.est), np.empty_like(state.v),
                       np.empty_like(state.lam), state.lam.copy(), state.x.copy())
    for i in (range(dims.N) if order is None else order):
        me = snapshot[i]
        x_next = local_primal_update(i, game, me, messages, topology.W[i], config.alpha)
        others = estimate_mix(i, dims, messages, topology.W[i])
        v_next = aux_dual_update(i, game.constraint, me, messages, topology.C[i],
                                 config.beta, config.gamma, x_next)
        sl = dims.block(i)
        nxt.est[i, :sl.start] = others[:sl.start]
        nxt.est[i, sl] = x_next
        nxt.est[i, sl.stop:] = others[sl.start:]
        nxt.v[i] = v_next
        nxt.lam[i] = project_dual(v_next)
    return nxt


class _AffineKernel:
    """Precomputed operands for the compiled/vectorized round."""

    def __init__(self, game, topology: Topology, config: SolverConfig):
        affine = as_affine(game)
        dims = game.dims
        self.impl = kernels.get_backend(config.backend).decentralized_step
        self.W = np.ascontiguousarray(topology.W)
        self.C = np.ascontiguousarray(topology.C)
        self.M = np.ascontiguousarray(affine.M)
        self.c = np.ascontiguousarray(affine.c)
        self.A = np.ascontiguousarray(game.constraint.A)
        self.owner = np.ascontiguousarray(dims.owner, dtype=np.intp)
        self.offsets = np.ascontiguousarray(dims.offsets, dtype=np.intp)
        self.cols = np.arange(dims.n)
        self.step = (config.alpha, config.beta, config.gamma)

    def __call__(self, state: NetworkState) -> NetworkState:
        est, v, lam = self.impl(state.est, state.v, state.lam, state.lam_prev, self.W, self.C,
                                self.M, self.c, self.A, self.owner, self.offsets, *self.step)
        x_old = state.est[self.owner, self.cols]
        return NetworkState(state.dims, est, v, lam, state.lam, x_old)


def fast_round(state: NetworkState, game, topology: Topology,
               config: SolverConfig) -> NetworkState:
    """Same transition as :func:`synchronous_round`, through the round kernel."""
    return _AffineKernel(game, topology, config)(state)


# ---------------------------------------------------------------------------
# semi-centralized reference form

def _pi(constraint, x) -> np.ndarray:
    """``Pi x`` as an ``(N, m)`` array of ``A_i x_i``."""
    dims = constraint.dims
    return np.vstack([A @ x[dims.block(i)] for i, A in enumerate(constraint.A_blocks)])


def _pi_t(constraint, lam) -> np.ndarray:
    """``Pi^T lambda`` as the stacked ``n``-vector of ``A_i^T lambda_i``."""
    return np.concatenate([A.T @ lam[i] for i, A in enumerate(constraint.A_blocks)])


def _r_t(dims: Dims, z) -> np.ndarray:
    """Place an ``n``-vector into each player's own block of an ``(N, n)`` array."""
    out = np.zeros((dims.N, dims.n))
    out[dims.owner, np.arange(dims.n)] = z
    return out


def semi_centralized_round(state: NetworkState, aux: GlobalAux, game, topology: Topology,
                           config: SolverConfig) -> tuple[NetworkState, GlobalAux]:
    """One step of the form that carries ``y`` and applies ``B`` explicitly.

    Primal: ``x+ = (W kron I) x - alpha R^T F(x) - alpha R^T Pi^T lambda``.
    Dual: ``v+ = lambda - B^2 lambda + beta (Pi x+ - b) + B y``,
    ``y+ = y - gamma B v+``, ``lambda+ = max(v+, 0)``.
    """
    dims = state.dims
    cons = game.constraint
    if aux.y.shape != (dims.N, dims.m):
        raise DimensionMismatch("y must be an (N, m) array")
    a, b_, g = config.alpha, config.beta, config.gamma
    B = topology.B
    F_ext = np.concatenate([game.partial_gradient(i, state.est[i]) for i in range(dims.N)])
    est_next = topology.W @ state.est - a * _r_t(dims, F_ext) - a * _r_t(dims, _pi_t(cons, state.lam))
    x_next = est_next[dims.owner, np.arange(dims.n)]
    v_next = (state.lam - B @ (B @ state.lam) + b_ * (_pi(cons, x_next) - cons.b_stacked)
              + B @ aux.y)
    y_next = aux.y - g * (B @ v_next)
    nxt = NetworkState(dims, est_next, v_next, project_dual(v_next), state.lam.copy(),
                       state.x.copy())
    return nxt, GlobalAux(y_next)


# ---------------------------------------------------------------------------
# fixed point and Lyapunov diagnostic

@dataclass(frozen=True)
class FixedPoint:
    x_star: np.ndarray
    lambda_star: np.ndarray
    v_star: np.ndarray
    y_star: np.ndarray   # (N, m), in the range of B
    dims: Dims
    residuals: dict = field(default_factory=dict)

    @property
    def lifted_x(self) -> np.ndarray:
        return np.tile(self.x_star, (self.dims.N, 1))

    @property
    def lifted_lambda(self) -> np.ndarray:
        return np.tile(self.lambda_star, (self.dims.N, 1))

    @property
    def lifted_v(self) -> np.ndarray:
        return np.tile(self.v_star, (self.dims.N, 1))

    def network_state(self) -> NetworkState:
        lam = self.lifted_lambda
        return NetworkState(self.dims, self.lifted_x, self.lifted_v, lam, lam.copy(),
                            self.x_star.copy())

    def aux(self) -> GlobalAux:
        return GlobalAux(self.y_star.copy())


def fixed_point_from_solution(x_star, lambda_star, game, topology: Topology, beta: float,
                              tol: float = 1e-8) -> FixedPoint:
    """Lift a variational GNE ``(x*, lambda*)`` to a fixed point of both forms.

    ``v* = lambda* + (beta/N)(A x* - b)`` in every block, and ``y*`` is the
    minimum-norm (hence range-space) solution of
    ``B y* = v* - lambda* - beta (Pi x* - b)``.
    """
    dims = game.dims
    cons = game.constraint
    x_star = np.asarray(x_star, dtype=float)
    lambda_star = np.asarray(lambda_star, dtype=float)
    if x_star.shape != (dims.n,) or lambda_star.shape != (dims.m,):
        raise DimensionMismatch("x* / lambda* have wrong shape")
    kkt = kkt_report(game.pseudo_gradient(x_star), cons, x_star, lambda_star)
    if kkt.residual > tol:
        raise InconsistentKKT(f"KKT residual {kkt.residual:.3e} exceeds {tol:g}")
    N = dims.N
    v_star = lambda_star + (beta / N) * (cons.A @ x_star - cons.b)
    lifted_v = np.tile(v_star, (N, 1))
    lifted_lam = np.tile(lambda_star, (N, 1))
    pi_res = _pi(cons, x_star) - cons.b_stacked
    rhs = lifted_v - lifted_lam - beta * pi_res
    B = topology.B
    y_star = np.linalg.pinv(B, rcond=1e-9, hermitian=True) @ rhs
    miss = float(np.max(np.abs(B @ y_star - rhs)))
    if miss > tol:
        raise RangeSpaceMiss(f"B y* misses the right-hand side by {miss:.3e}")
    residuals = {
        "stationarity": float(np.max(np.abs(game.pseudo_gradient(x_star)
                                            + _pi_t(cons, lifted_lam)))),
        "v_construction": float(np.max(np.abs(lifted_v - lifted_lam - beta * pi_res
                                              - B @ y_star))),
        "B_v": float(np.max(np.abs(B @ lifted_v))),
        "projection": float(np.max(np.abs(lifted_lam - project_dual(lifted_v)))),
    }
    bad = {k: r for k, r in residuals.items() if r > tol}
    if bad:
        raise InconsistentKKT(f"fixed-point residuals above {tol:g}: {bad}")
    return FixedPoint(x_star.copy(), lambda_star.copy(), v_star, y_star, dims, residuals)


def check_lyapunov_weights(alpha, beta, gamma, topology: Topology, constraint) -> None:
    """Raise :class:`WeightNotPD` unless both weight matrices are positive definite."""
    wx = 1.0 - 2.0 * alpha * beta * constraint.lam_max_PiTPi
    wl = 1.0 - gamma * topology.lambda_max_B**2
    if wx <= 0 or wl <= 0:
        raise WeightNotPD(f"lambda_min of weights: x-part {wx:.3e}, lambda-part {wl:.3e}")


def lyapunov_value(state: NetworkState, aux: GlobalAux, fp: FixedPoint, alpha: float,
                   beta: float, gamma: float, topology: Topology, constraint) -> float:
    """Weighted error sum that contracts geometrically under certified stepsizes.

    ``||x~||^2_{I - 2ab R^T Pi^T Pi R} + (a/b) ||lam~||^2_{I - g B^2}
    + (a/(b g)) ||y~||^2`` with errors taken against the lifted fixed point.
    """
    check_lyapunov_weights(alpha, beta, gamma, topology, constraint)
    xt = state.est - fp.x_star
    own_t = state.x - fp.x_star
    pi_own = _pi(constraint, own_t)
    lt = state.lam - fp.lambda_star
    blt = topology.B @ lt
    yt = aux.y - fp.y_star
    term_x = float(np.sum(xt * xt)) - 2.0 * alpha * beta * float(np.sum(pi_own * pi_own))
    term_l = (alpha / beta) * (float(np.sum(lt * lt)) - gamma * float(np.sum(blt * blt)))
    term_y = alpha / (beta * gamma) * float(np.sum(yt * yt))
    return term_x + term_l + term_y


# ---------------------------------------------------------------------------
# driver

@dataclass
class Trajectory:
    """Per-round diagnostics; row ``k`` describes the state after ``k`` rounds."""

    iters: np.ndarray
    x: np.ndarray
    consensus_error: np.ndarray
    dual_spread: np.ndarray
    constraint_violation: np.ndarray
    kkt_residual: np.ndarray
    dist_to_star: np.ndarray | None = None
    lyapunov: np.ndarray | None = None
    final_state: NetworkState | None = None
    final_aux: GlobalAux | None = None
    converged: bool = False

    def __len__(self) -> int:
        return len(self.iters)

    def to_csv(self, path) -> None:
        write_trajectory_csv(self, path)


def _fmt(v) -> str:
    return "" if v is None or not math.isfinite(v) else repr(float(v))


def write_trajectory_csv(traj: Trajectory, path) -> None:
    cols = [traj.iters, traj.dist_to_star, traj.consensus_error, traj.dual_spread,
            traj.constraint_violation, traj.kkt_residual, traj.lyapunov]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for k in range(len(traj)):
            w.writerow([str(int(traj.iters[k]))] + [
                "" if col is None else _fmt(col[k]) for col in cols[1:]])


def read_trajectory_csv(path) -> dict[str, np.ndarray]:
    """Columns of a trajectory CSV as float arrays (empty fields become NaN)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    return {name: np.array([float(r[j]) if r[j] != "" else np.nan for r in body])
            for j, name in enumerate(header)}


class _Recorder:
    def __init__(self, game, topology, config, reference):
        self.game = game
        self.cons = game.constraint
        self.topology = topology
        self.config = config
        self.reference = reference
        self.rows = {k: [] for k in ("iters", "x", "consensus_error", "dual_spread",
                                     "constraint_violation", "kkt_residual",
                                     "dist_to_star", "lyapunov")}
        self.track_E = False
        if reference is not None and config.form == "semi_centralized":
            try:
                check_lyapunov_weights(config.alpha, config.beta, config.gamma,
                                       topology, self.cons)
                self.track_E = True
            except WeightNotPD:
                pass
        self._fast_F = isinstance(game, (AffineGame, CournotGame))
        self._affine = as_affine(game) if self._fast_F else None

    def record(self, k, state: NetworkState, aux: GlobalAux | None):
        # a diverging run overflows the diagnostics one round before the
        # iterates themselves turn non-finite; the caller raises NonFinite
        with np.errstate(over="ignore", invalid="ignore"):
            self._record(k, state, aux)

    def _record(self, k, state: NetworkState, aux: GlobalAux | None):
        x = state.x
        est = state.est
        lam = state.lam
        r = self.rows
        r["iters"].append(k)
        r["x"].append(x)
        r["consensus_error"].append(float(np.linalg.norm(est - est.mean(axis=0))))
        diff = lam[:, None, :] - lam[None, :, :]
        r["dual_spread"].append(float(np.sqrt(np.max(np.sum(diff * diff, axis=2)))))
        slack = self.cons.A @ x - self.cons.b
        r["constraint_violation"].append(float(np.max(np.maximum(slack, 0.0))))
        Fx = self._affine.pseudo_gradient(x) if self._fast_F else self.game.pseudo_gradient(x)
        r["kkt_residual"].append(kkt_report(Fx, self.cons, x, lam.mean(axis=0)).residual)
        if self.reference is not None:
            r["dist_to_star"].append(float(np.linalg.norm(est - self.reference.x_star)))
            if self.track_E:
                c = self.config
                r["lyapunov"].append(lyapunov_value(state, aux, self.reference, c.alpha,
                                                    c.beta, c.gamma, self.topology, self.cons))

    def trajectory(self, state, aux, converged) -> Trajectory:
        r = self.rows
        return Trajectory(
            iters=np.array(r["iters"], dtype=int),
            x=np.array(r["x"]),
            consensus_error=np.array(r["consensus_error"]),
            dual_spread=np.array(r["dual_spread"]),
            constraint_violation=np.array(r["constraint_violation"]),
            kkt_residual=np.array(r["kkt_residual"]),
            dist_to_star=np.array(r["dist_to_star"]) if self.reference is not None else None,
            lyapunov=np.array(r["lyapunov"]) if self.track_E else None,
            final_state=state, final_aux=aux, converged=converged,
        )


def run(game, topology: Topology, config: SolverConfig, reference: FixedPoint | None = None,
        state: NetworkState | None = None, aux: GlobalAux | None = None) -> Trajectory:
    """Iterate rounds until ``max_iters`` or until
    ``max(consensus error, dual spread, max |x_{k+1} - x_k|) <= stop_tol``.
    ``stop_tol = inf`` disables the early exit.

    With a ``reference`` fixed point the trajectory also records the
    distance of every copy to ``x*`` and, for the semi-centralized form, the
    Lyapunov value. Raises :class:`NonFinite` (carrying the partial
    trajectory) if the iterates overflow.
    """
    if state is None:
        state, aux0 = initialize(game, topology, config)
        aux = aux0 if aux is None else aux
    elif aux is None:
        aux = GlobalAux(np.zeros((state.dims.N, state.dims.m)))
    semi = config.form == "semi_centralized"
    if not semi and isinstance(game, (AffineGame, CournotGame)):
        kernel = _AffineKernel(game, topology, config)
        step = lambda s, a: (kernel(s), a)
    elif not semi:
        step = lambda s, a: (synchronous_round(s, game, topology, config), a)
    else:
        step = lambda s, a: semi_centralized_round(s, a, game, topology, config)

    rec = _Recorder(game, topology, config, reference)
    rec.record(0, state, aux)
    # an infinite tolerance means "run exactly max_iters rounds"
    early_stop = math.isfinite(config.stop_tol)
    converged = False
    for k in range(1, config.max_iters + 1):
        x_before = state.x
        state, aux = step(state, aux)
        if not (np.isfinite(state.est).all() and np.isfinite(state.v).all()):
            raise NonFinite(f"non-finite iterate at round {k}; stepsizes too large?",
                            trajectory=rec.trajectory(state, aux, False))
        rec.record(k, state, aux)
        if not early_stop:
            continue
        disp = float(np.max(np.abs(state.x - x_before)))
        metric = max(rec.rows["consensus_error"][-1], rec.rows["dual_spread"][-1], disp)
        if metric <= config.stop_tol:
            converged = True
            break
    return rec.trajectory(state, aux, converged)
