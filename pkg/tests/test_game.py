import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dgne.errors import DimensionMismatch, NotStronglyMonotone, SingularBlock
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
    game_from_dict,
    game_to_dict,
    load_game,
    min_norm_solution,
    monotonicity_constants,
    pseudo_gradient,
    random_affine_game,
    save_game,
)


def random_cournot(rng, N=4, m=3, slopes=None):
    cons = CoupledConstraint(tuple(np.eye(m) for _ in range(N)),
                             tuple(rng.uniform(10, 20, m) for _ in range(N)))
    s = rng.uniform(5, 10, m) if slopes is None else slopes
    return CournotGame(tuple(np.diag(rng.uniform(1, 8, m)) for _ in range(N)),
                       tuple(rng.uniform(1, 2, m) for _ in range(N)),
                       rng.uniform(1, 3, m), s, cons)


def random_block_cournot(rng, N=3, m=2):
    """Cournot market with non-identity, wider A_i blocks."""
    sizes = rng.integers(m, m + 3, N)
    A = tuple(rng.uniform(0.5, 1.5, (m, int(k))) for k in sizes)
    cons = CoupledConstraint(A, tuple(rng.uniform(10, 20, m) for _ in range(N)))
    return CournotGame(tuple(np.diag(rng.uniform(1, 8, int(k))) for k in sizes),
                       tuple(rng.uniform(1, 2, int(k)) for k in sizes),
                       rng.uniform(1, 3, m), rng.uniform(5, 10, m), cons)


def fd_partial(game, i, profile, h=1e-6):
    sl = game.dims.block(i)
    g = np.zeros(sl.stop - sl.start)
    for k in range(g.size):
        e = np.zeros(game.dims.n)
        e[sl.start + k] = h
        g[k] = (game.cost(i, profile + e) - game.cost(i, profile - e)) / (2 * h)
    return g


# -- pseudo-gradients -----------------------------------------------------

def test_affine_pseudo_gradient_examples(two_player_game):
    np.testing.assert_array_equal(pseudo_gradient(two_player_game, [3.0, 2.0]), [0.0, 0.0])
    np.testing.assert_array_equal(pseudo_gradient(two_player_game, [0.0, 0.0]), [-6.0, -4.0])
    with pytest.raises(DimensionMismatch):
        pseudo_gradient(two_player_game, [1.0, 2.0, 3.0])


def test_extended_pseudo_gradient_hand_example(two_player_game):
    prof = ExtendedProfile(two_player_game.dims, [[1.0, 5.0], [7.0, 2.0]])
    np.testing.assert_array_equal(extended_pseudo_gradient(two_player_game, prof), [-4.0, 0.0])
    with pytest.raises(DimensionMismatch):
        extended_pseudo_gradient(two_player_game, np.zeros((3, 2)))


def test_extended_equals_pseudo_on_consensus(rng):
    for game in (random_affine_game(rng, 4, m=2), random_cournot(rng)):
        x = rng.normal(size=game.dims.n)
        prof = ExtendedProfile.consensus(game.dims, x)
        np.testing.assert_allclose(extended_pseudo_gradient(game, prof),
                                   game.pseudo_gradient(x), rtol=0, atol=1e-12)


def test_extended_profile_selection_identities(rng):
    dims = Dims((2, 1, 3), 1)
    prof = ExtendedProfile(dims, rng.normal(size=(3, 6)))
    for i in range(3):
        own, others = prof.own(i), prof.others(i)
        assert own.size + others.size == dims.n
        np.testing.assert_array_equal(prof.with_player(i, own, others), prof.blocks[i])
    np.testing.assert_array_equal(prof.true_profile(),
                                  np.concatenate([prof.own(i) for i in range(3)]))


# -- Cournot gradient -----------------------------------------------------

def test_cournot_zero_slope_and_zero_state(rng):
    g = random_cournot(rng, slopes=np.full(3, 1e-300))
    x = rng.normal(size=g.dims.n)
    for i in range(g.dims.N):
        sl = g.dims.block(i)
        A_i = g.constraint.A_blocks[i]
        np.testing.assert_allclose(cournot_partial_gradient(g, i, x),
                                   2 * g.Q[i] @ x[sl] + g.q[i] - A_i.T @ g.price_intercept)
    g0 = CournotGame(g.Q, tuple(np.zeros(3) for _ in range(g.dims.N)), g.price_intercept,
                     g.price_slope, g.constraint)
    np.testing.assert_allclose(cournot_partial_gradient(g0, 1, np.zeros(g.dims.n)),
                               -g.constraint.A_blocks[1].T @ g.price_intercept)


def test_cournot_gradient_matches_finite_differences_100_points():
    rng = np.random.default_rng(6)
    games = [random_cournot(rng), random_block_cournot(rng)]
    worst = 0.0
    for k in range(100):
        game = games[k % 2]
        x = rng.uniform(-5, 5, game.dims.n)
        for i in range(game.dims.N):
            an = cournot_partial_gradient(game, i, x)
            fd = fd_partial(game, i, x)
            worst = max(worst, float(np.max(np.abs(an - fd) / np.maximum(1.0, np.abs(fd)))))
    assert worst <= 1e-6


def test_cournot_gradient_with_mismatched_estimates():
    rng = np.random.default_rng(8)
    game = random_block_cournot(rng)
    prof = rng.uniform(-3, 3, (game.dims.N, game.dims.n))
    ext = extended_pseudo_gradient(game, prof)
    for i in range(game.dims.N):
        fd = fd_partial(game, i, prof[i])
        np.testing.assert_allclose(ext[game.dims.block(i)], fd, rtol=1e-6, atol=1e-6)


def test_affine_from_cournot_agrees_on_100_points():
    rng = np.random.default_rng(9)
    for game in (random_cournot(rng), random_block_cournot(rng)):
        aff = affine_from_cournot(game)
        worst = max(float(np.max(np.abs(aff.pseudo_gradient(x) - game.pseudo_gradient(x))))
                    for x in rng.uniform(-10, 10, (100, game.dims.n)))
        assert worst <= 1e-10


def test_affine_from_cournot_structure():
    cons = CoupledConstraint((np.eye(1),), (np.array([5.0]),))
    g = CournotGame((np.eye(1),), (np.array([1.0]),), np.array([2.0]), np.array([1.0]), cons)
    aff = affine_from_cournot(g)
    np.testing.assert_allclose(aff.M, [[4.0]])
    np.testing.assert_allclose(aff.c, [-1.0])


# -- constants ------------------------------------------------------------

def test_monotonicity_constants_examples():
    cons = CoupledConstraint((np.eye(1), np.eye(1)), (np.ones(1), np.ones(1)))
    mc = monotonicity_constants(AffineGame(2 * np.eye(2), np.zeros(2), cons))
    assert (mc.mu, mc.L) == pytest.approx((2.0, 2.0))
    mc = monotonicity_constants(AffineGame(np.array([[2.0, 1.0], [0.0, 2.0]]), np.zeros(2), cons))
    assert mc.mu == pytest.approx(1.5, abs=1e-12)
    assert mc.L == pytest.approx(np.sqrt(5), abs=1e-12)
    with pytest.raises(NotStronglyMonotone):
        monotonicity_constants(AffineGame(np.array([[1.0, 0], [0, 0]]), np.zeros(2), cons))


def test_mu_below_L_on_1000_seeded_games():
    rng = np.random.default_rng(10)
    for _ in range(1000):
        n = int(rng.integers(2, 7))
        H = rng.normal(size=(n, n))
        M = np.eye(n) * 0.1 + H @ H.T / n + 0.3 * rng.normal(size=(n, n)) / np.sqrt(n)
        if np.linalg.eigvalsh(0.5 * (M + M.T))[0] <= 1e-6:
            continue
        cons = CoupledConstraint(tuple(np.eye(1) for _ in range(n)),
                                 tuple(np.ones(1) for _ in range(n)))
        mc = monotonicity_constants(AffineGame(M, np.zeros(n), cons))
        assert 0 < mc.mu <= mc.L * (1 + 1e-12)


@given(st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_symmetric_pd_mu_is_lambda_min(n, seed):
    rng = np.random.default_rng(seed)
    H = rng.normal(size=(n, n))
    M = H @ H.T + 0.5 * np.eye(n)
    cons = CoupledConstraint(tuple(np.eye(1) for _ in range(n)),
                             tuple(np.ones(1) for _ in range(n)))
    mc = monotonicity_constants(AffineGame(M, np.zeros(n), cons))
    assert mc.mu == pytest.approx(np.linalg.eigvalsh(M)[0], abs=1e-10)


# -- constraint -----------------------------------------------------------

def test_constraint_residual_examples(two_player_game):
    cons = two_player_game.constraint
    assert np.all(constraint_residual(cons, cons.feasible_point) <= 0)
    np.testing.assert_allclose(constraint_residual(cons, [2.5, 1.5]), [0.0])
    np.testing.assert_allclose(constraint_residual(cons, [0.0, 0.0]), [-4.0])
    with pytest.raises(DimensionMismatch):
        constraint_residual(cons, [1.0])


def test_min_norm_solution_and_rank_checks():
    np.testing.assert_allclose(min_norm_solution([[1.0, 1.0]], [4.0]), [2.0, 2.0])
    with pytest.raises(SingularBlock):
        CoupledConstraint((np.array([[1.0, 2.0], [2.0, 4.0]]),), (np.ones(2),))
    with pytest.raises(DimensionMismatch):
        CoupledConstraint((np.eye(2), np.eye(3)), (np.ones(2), np.ones(3)))


def test_constraint_aggregates(rng):
    g = random_affine_game(rng, 3, block_sizes=[2, 3, 2], m=2)
    cons = g.constraint
    np.testing.assert_array_equal(cons.A, np.hstack(cons.A_blocks))
    np.testing.assert_allclose(cons.b, sum(cons.b_blocks))
    Pi = np.zeros((3 * 2, 7))
    for i, A in enumerate(cons.A_blocks):
        Pi[2 * i:2 * i + 2, cons.dims.block(i)] = A
    assert cons.lam_max_PiTPi == pytest.approx(np.linalg.eigvalsh(Pi.T @ Pi)[-1])
    assert cons.lam_min_PiPiT == pytest.approx(np.linalg.eigvalsh(Pi @ Pi.T)[0])


def test_game_json_roundtrip(tmp_path, rng):
    for game in (random_affine_game(rng, 3, m=2), random_cournot(rng)):
        path = tmp_path / "g.json"
        save_game(game, path)
        assert json.loads(path.read_text())["type"] in ("affine", "cournot")
        back = load_game(path)
        x = rng.normal(size=game.dims.n)
        np.testing.assert_array_equal(back.pseudo_gradient(x), game.pseudo_gradient(x))
        assert type(back) is type(game)
    d = game_to_dict(game)
    d["dims"]["m"] = 99
    with pytest.raises(DimensionMismatch):
        game_from_dict(d)
