"""Nash-Cournot experiment harness: instance generation, runs, rate fits.

Instances are drawn from ``numpy.random.default_rng(seed)`` (PCG64) in a
fixed stream order, so a config file plus a seed determines every number:

1. ``Q`` diagonals, ``N * m`` draws, player-major;
2. ``q``, ``N * m`` draws, player-major;
3. ``b_i``, ``N * m`` draws, player-major;
4. price intercepts, ``m`` draws;
5. price slopes, ``m`` draws;
6. for ``topology.kind == "random"`` only: edge coins, see
   :func:`dgne.topology.random_connected`.

Each firm has ``A_i = I_m`` and hence ``n_i = m``.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import linregress

from dgne import kernels
from dgne.errors import InsufficientData, NonFinite
from dgne.game import (
    AffineGame,
    CoupledConstraint,
    CournotGame,
    load_game,
    monotonicity_constants,
)
from dgne.oracle import solve_gne
from dgne.solver import (
    SolverConfig,
    Trajectory,
    fast_round,
    fixed_point_from_solution,
    initialize,
    run,
    semi_centralized_round,
    synchronous_round,
    write_trajectory_csv,
)
from dgne.theory import TheoryConstants, certification_report, certified_stepsizes
from dgne.topology import Topology, random_connected, ring

Range = tuple[float, float]


@dataclass
class ExperimentConfig:
    seed: int = 0
    N: int = 10
    m: int = 5
    Q_range: Range = (1.0, 8.0)
    q_range: Range = (1.0, 2.0)
    b_range: Range = (10.0, 20.0)
    price_intercept_range: Range = (1.0, 3.0)
    price_slope_range: Range = (5.0, 10.0)
    topology: dict = field(default_factory=lambda: {"kind": "ring"})
    stepsizes: str | list = "certified"
    beta: float = 0.1
    gamma: float = 0.1
    alpha_fraction: float = 0.99
    max_iters: int = 20_000
    stop_tol: float = 1e-10
    init_mode: str = "feasible"
    form: str = "decentralized"
    tail_fraction: float = 0.5
    game_path: str | None = None
    out_dir: str = "out"

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.N < 2:
            raise ValueError("need N >= 2")
        if self.m < 1:
            raise ValueError("need m >= 1")
        for name in ("Q_range", "q_range", "b_range", "price_intercept_range",
                     "price_slope_range"):
            lo, hi = (float(v) for v in getattr(self, name))
            if not 0 < lo <= hi:
                raise ValueError(f"{name} must be an interval with positive lower bound")
            setattr(self, name, (lo, hi))
        kind = self.topology.get("kind")
        if kind not in ("ring", "random", "file"):
            raise ValueError(f"unknown topology kind {kind!r}")
        if kind == "random" and not 0 < float(self.topology.get("p", 0)) <= 1:
            raise ValueError("random topology needs an edge probability p in (0, 1]")
        if kind == "file" and "path" not in self.topology:
            raise ValueError("file topology needs a path")
        self.stepsizes = parse_stepsizes(self.stepsizes)
        if not 0 < self.tail_fraction <= 1:
            raise ValueError("tail_fraction must lie in (0, 1]")

    @classmethod
    def full(cls, **overrides) -> "ExperimentConfig":
        """Full-size market: 50 firms, 5 markets, 5000 rounds."""
        base = dict(N=50, m=5, max_iters=5000)
        base.update(overrides)
        return cls(**base)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        d = {k: (tuple(v) if k.endswith("_range") else v) for k, v in d.items()}
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        cfg = cls.from_dict(json.loads(Path(path).read_text()))
        base = Path(path).parent
        # relative file references are resolved against the config's directory
        if cfg.game_path and not Path(cfg.game_path).is_absolute():
            cfg.game_path = str(base / cfg.game_path)
        if cfg.topology.get("kind") == "file" and not Path(cfg.topology["path"]).is_absolute():
            cfg.topology = {**cfg.topology, "path": str(base / cfg.topology["path"])}
        return cfg

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON form, ignoring the output directory."""
        d = self.to_dict()
        d.pop("out_dir")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def parse_stepsizes(value) -> str | list:
    """``"certified"``, ``"a,b,g"`` or a 3-sequence, normalized."""
    if isinstance(value, str):
        if value.strip() == "certified":
            return "certified"
        value = value.split(",")
    vals = [float(v) for v in value]
    if len(vals) != 3 or not all(v > 0 and math.isfinite(v) for v in vals):
        raise ValueError("stepsizes must be 'certified' or three positive numbers a,b,g")
    return vals


@dataclass(frozen=True)
class Instance:
    game: object
    topology: Topology
    constants: TheoryConstants


def _draw_cournot(config: ExperimentConfig, rng: np.random.Generator) -> CournotGame:
    N, m = config.N, config.m
    Q_diag = rng.uniform(*config.Q_range, (N, m))
    q = rng.uniform(*config.q_range, (N, m))
    b = rng.uniform(*config.b_range, (N, m))
    ell = rng.uniform(*config.price_intercept_range, m)
    s = rng.uniform(*config.price_slope_range, m)
    cons = CoupledConstraint(tuple(np.eye(m) for _ in range(N)), tuple(b))
    return CournotGame(tuple(np.diag(d) for d in Q_diag), tuple(q), ell, s, cons)


def build_topology(config: ExperimentConfig, N: int, rng: np.random.Generator) -> Topology:
    topo_cfg = config.topology
    if topo_cfg["kind"] == "ring":
        return Topology.from_adjacency(ring(N))
    if topo_cfg["kind"] == "random":
        return Topology.from_adjacency(random_connected(N, float(topo_cfg["p"]), rng))
    topo = Topology.load(topo_cfg["path"])
    if topo.N != N:
        raise ValueError(f"topology file has {topo.N} nodes, game has {N} players")
    return topo


def generate_cournot(config: ExperimentConfig) -> tuple[CournotGame, Topology]:
    """Seeded market instance and its communication graph (stream order above)."""
    rng = np.random.default_rng(config.seed)
    game = _draw_cournot(config, rng)
    return game, build_topology(config, config.N, rng)


def build_instance(config: ExperimentConfig) -> Instance:
    """Game (generated Cournot market, or loaded from ``game_path``) plus topology."""
    if config.game_path:
        game = load_game(config.game_path)
        topology = build_topology(config, game.dims.N, np.random.default_rng(config.seed))
    else:
        game, topology = generate_cournot(config)
    return Instance(game, topology, TheoryConstants.from_instance(game, topology))


def resolve_stepsizes(config: ExperimentConfig, consts: TheoryConstants) -> tuple[float, float, float]:
    if config.stepsizes == "certified":
        return certified_stepsizes(consts, config.beta, config.gamma, config.alpha_fraction)
    return tuple(config.stepsizes)


def certify(config: ExperimentConfig, instance: Instance | None = None) -> dict:
    """Certification verdict for the configured instance and stepsizes.

    A zero consensus gap does not raise; it shows up under ``"error"``.
    """
    inst = build_instance(config) if instance is None else instance
    alpha, beta, gamma = resolve_stepsizes(config, inst.constants)
    report = certification_report(inst.constants, alpha, beta, gamma)
    report["constants"] = inst.constants.to_dict()
    return report


@dataclass(frozen=True)
class RateFit:
    rate: float
    r_squared: float
    window: float
    n_points: int

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def fit_rate(trajectory, tail_fraction: float = 0.5, min_points: int = 20) -> RateFit:
    """Log-linear least-squares fit ``log d_k ~ k log(rate)`` over the tail.

    ``trajectory`` is a :class:`Trajectory` (its ``dist_to_star`` is used) or
    a plain distance sequence. Points at or below ``1e3 * eps * d_0`` are
    rounding noise and are dropped before the tail is taken.
    """
    d = trajectory.dist_to_star if isinstance(trajectory, Trajectory) else trajectory
    if d is None:
        raise InsufficientData("trajectory has no dist_to_star (no reference supplied)")
    d = np.asarray(d, dtype=float)
    k = np.arange(d.size)
    if d.size == 0:
        raise InsufficientData("empty distance sequence")
    floor = 1e3 * np.finfo(float).eps * abs(d[0])
    keep = np.isfinite(d) & (d > floor) & (d > 0)
    k, d = k[keep], d[keep]
    n_tail = int(math.ceil(tail_fraction * d.size))
    if n_tail < min_points:
        raise InsufficientData(f"only {n_tail} usable tail points; need {min_points}")
    k, logd = k[-n_tail:], np.log(d[-n_tail:])
    fit = linregress(k, logd)
    if np.ptp(logd) == 0:
        r2 = 1.0
    else:
        r2 = float(fit.rvalue**2)
    return RateFit(float(math.exp(fit.slope)), r2, float(tail_fraction), int(n_tail))


@dataclass
class ExperimentResult:
    trajectory: Trajectory
    report: dict
    csv_path: Path
    report_path: Path


def _json_float(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def run_experiment(config: ExperimentConfig, out_dir=None, csv_name: str = "trajectory.csv",
                   report_name: str = "report.json") -> ExperimentResult:
    """Solve the instance with the oracle and with the iteration; write CSV + report.

    If the iteration diverges the rows collected so far are still written to
    the CSV before the error propagates.
    """
    out = Path(config.out_dir if out_dir is None else out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path, report_path = out / csv_name, out / report_name
    t0 = time.perf_counter()
    inst = build_instance(config)
    game, topo, consts = inst.game, inst.topology, inst.constants
    alpha, beta, gamma = resolve_stepsizes(config, consts)
    cert = certification_report(consts, alpha, beta, gamma)
    x_star, lam_star = solve_gne(game)
    fp = fixed_point_from_solution(x_star, lam_star, game, topo, beta)
    scfg = SolverConfig(alpha, beta, gamma, max_iters=config.max_iters, stop_tol=config.stop_tol,
                        init_mode=config.init_mode, form=config.form, seed=config.seed)
    try:
        traj = run(game, topo, scfg, reference=fp)
    except NonFinite as exc:
        if exc.trajectory is not None:
            write_trajectory_csv(exc.trajectory, csv_path)
        raise
    write_trajectory_csv(traj, csv_path)

    try:
        rate = fit_rate(traj, config.tail_fraction).to_dict()
    except InsufficientData as exc:
        rate = {"error": str(exc)}
    state = traj.final_state
    report = {
        "config": config.to_dict(),
        "config_hash": config.config_hash(),
        "backend": kernels.BACKEND,
        "constants": consts.to_dict(),
        "stepsizes": {"alpha": alpha, "beta": beta, "gamma": gamma,
                      "mode": "certified" if config.stepsizes == "certified" else "explicit"},
        "certification": cert,
        "a": cert["a"],
        "certified": cert["certified"],
        "x_star": x_star.tolist(),
        "lambda_star": lam_star.tolist(),
        "iterations": int(traj.iters[-1]),
        "converged": traj.converged,
        "final": {
            "dist_to_star": _json_float(traj.dist_to_star[-1]),
            "x_err_inf": float(np.max(np.abs(state.x - x_star))),
            "lambda_err_inf": float(np.max(np.abs(state.lam - lam_star))),
            "consensus_err": float(traj.consensus_error[-1]),
            "dual_spread": float(traj.dual_spread[-1]),
            "kkt_residual": float(traj.kkt_residual[-1]),
        },
        "rate_fit": rate,
        "wall_time_s": time.perf_counter() - t0,
    }
    report_path.write_text(json.dumps(report, indent=2, allow_nan=False) + "\n")
    return ExperimentResult(traj, report, csv_path, report_path)


def compare_forms(game, topology: Topology, alpha: float, beta: float, gamma: float,
                  iters: int = 200, seed: int = 0, init_mode: str = "feasible") -> dict:
    """Run both forms from the same start and report their largest deviation.

    Deviations are relative: ``max|a - b| / max(1, max|b|)`` per round,
    maximized over rounds, separately for decisions and multipliers.
    """
    cfg = SolverConfig(alpha, beta, gamma, max_iters=iters, init_mode=init_mode, seed=seed)
    state, aux = initialize(game, topology, cfg)
    dec, semi = state.copy(), state.copy()
    step = fast_round if isinstance(game, (AffineGame, CournotGame)) else synchronous_round
    dev_x = dev_l = 0.0
    for _ in range(iters):
        dec = step(dec, game, topology, cfg)
        semi, aux = semi_centralized_round(semi, aux, game, topology, cfg)
        dev_x = max(dev_x, _rel_dev(dec.est, semi.est))
        dev_l = max(dev_l, _rel_dev(dec.lam, semi.lam))
    return {"iters": iters, "init_mode": init_mode, "max_rel_dev_x": dev_x,
            "max_rel_dev_lambda": dev_l}


def _rel_dev(a, b) -> float:
    return float(np.max(np.abs(a - b))) / max(1.0, float(np.max(np.abs(b))))


def compare_forms_config(config: ExperimentConfig, iters: int = 200) -> dict:
    inst = build_instance(config)
    alpha, beta, gamma = resolve_stepsizes(config, inst.constants)
    out = compare_forms(inst.game, inst.topology, alpha, beta, gamma, iters=iters,
                        seed=config.seed)
    out["config_hash"] = config.config_hash()
    return out


def instance_summary(instance: Instance) -> dict:
    mc = monotonicity_constants(instance.game)
    return {"dims": {"N": instance.game.dims.N, "n": instance.game.dims.n,
                     "m": instance.game.dims.m},
            "mu": mc.mu, "L": mc.L, "sigma": instance.topology.sigma,
            "lambda_max_B": instance.topology.lambda_max_B,
            "min_nonzero_sv_B": instance.topology.min_nonzero_sv_B}
