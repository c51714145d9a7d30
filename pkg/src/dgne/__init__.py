"""Decentralized primal-dual seeking of variational generalized Nash equilibria.

Players share coupled affine constraints ``sum_i A_i x_i <= sum_i b_i`` and
see only their neighbours' messages. The package provides topologies and
weights, game models, a centralized VI oracle, the decentralized iteration
in two equivalent forms, its stepsize certificate, and an experiment CLI.
"""
from dgne.errors import *  # noqa: F401,F403
from dgne.game import (
    AffineGame,
    CoupledConstraint,
    CournotGame,
    Dims,
    ExtendedProfile,
    affine_from_cournot,
    constraint_residual,
    cournot_partial_gradient,
    extended_pseudo_gradient,
    monotonicity_constants,
    pseudo_gradient,
    random_affine_game,
    scalar_quadratic_game,
)
from dgne.kernels import BACKEND
from dgne.oracle import (
    KKTReport,
    VIProblem,
    kkt_residual,
    project_polyhedron,
    recover_multiplier,
    solve_gne,
    solve_vi,
)
from dgne.solver import (
    FixedPoint,
    GlobalAux,
    NetworkState,
    PlayerState,
    SolverConfig,
    Trajectory,
    fixed_point_from_solution,
    initialize,
    lyapunov_value,
    run,
    semi_centralized_round,
    synchronous_round,
)
from dgne.theory import (
    TheoryConstants,
    alpha_bound,
    beta_gamma_bounds,
    certified_stepsizes,
    contraction_factor,
    m_alpha,
    rho_m_alpha,
)
from dgne.topology import Topology, build_metropolis, consensus_gap, matrix_sqrt_psd

__version__ = "0.1.0"
