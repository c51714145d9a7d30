import json

import numpy as np
import pytest

from dgne.errors import InsufficientData, NonFinite
from dgne.experiment import (
    ExperimentConfig,
    build_instance,
    certify,
    compare_forms_config,
    fit_rate,
    generate_cournot,
    parse_stepsizes,
    run_experiment,
)
from dgne.game import monotonicity_constants, save_game, scalar_quadratic_game
from dgne.oracle import VIProblem, kkt_residual, solve_gne
from dgne.solver import read_trajectory_csv
from dgne.topology import Topology, ring


def fixture_config(tmp_path, **kw):
    """The two-player closed-form game with the lazy two-node weights."""
    save_game(scalar_quadratic_game([3.0, 2.0], [2.0, 2.0]), tmp_path / "game.json")
    Topology.from_weights([[0.75, 0.25], [0.25, 0.75]]).save(tmp_path / "topo.json")
    base = dict(N=2, m=1, game_path=str(tmp_path / "game.json"),
                topology={"kind": "file", "path": str(tmp_path / "topo.json")},
                max_iters=50000, stop_tol=1e-12, out_dir=str(tmp_path / "out"))
    base.update(kw)
    return ExperimentConfig(**base)


# -- fit_rate --------------------------------------------------------------

def test_fit_rate_exact_geometric():
    fit = fit_rate(0.9 ** np.arange(200))
    assert fit.rate == pytest.approx(0.9, abs=1e-12)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)


def test_fit_rate_noisy_geometric():
    rng = np.random.default_rng(17)
    d = 0.9 ** np.arange(200) * (1 + 0.01 * rng.standard_normal(200))
    assert 0.89 <= fit_rate(d).rate <= 0.91


def test_fit_rate_drops_float_floor():
    d = np.concatenate([0.5 ** np.arange(60), np.full(200, 1e-300)])
    fit = fit_rate(d, tail_fraction=1.0)
    # points at or below 1e3 * eps * d0 (k >= 43) are dropped
    assert fit.rate == pytest.approx(0.5, rel=1e-12) and fit.n_points == 43


def test_fit_rate_insufficient():
    with pytest.raises(InsufficientData):
        fit_rate(0.9 ** np.arange(30), tail_fraction=0.5)
    with pytest.raises(InsufficientData):
        fit_rate([])


# -- config ------------------------------------------------------------------

def test_config_roundtrip_and_hash(tmp_path):
    cfg = ExperimentConfig(seed=7, stepsizes="0.001,0.1,0.1", out_dir="a")
    cfg.save(tmp_path / "c.json")
    back = ExperimentConfig.load(tmp_path / "c.json")
    assert back == cfg
    assert back.config_hash() == ExperimentConfig(seed=7, stepsizes=[0.001, 0.1, 0.1],
                                                  out_dir="b").config_hash()
    assert cfg.config_hash() != ExperimentConfig(seed=8).config_hash()


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(N=1)
    with pytest.raises(ValueError):
        ExperimentConfig(Q_range=(0.0, 1.0))
    with pytest.raises(ValueError):
        ExperimentConfig(q_range=(2.0, 1.0))
    with pytest.raises(ValueError):
        ExperimentConfig(topology={"kind": "star"})
    with pytest.raises(ValueError):
        ExperimentConfig(seed=2**64)
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"bogus": 1})
    with pytest.raises(ValueError):
        parse_stepsizes("1,2")
    assert parse_stepsizes(" certified") == "certified"


def test_full_preset():
    cfg = ExperimentConfig.full()
    assert (cfg.N, cfg.m, cfg.max_iters) == (50, 5, 5000)


# -- instance generation -------------------------------------------------------

def test_generate_is_deterministic():
    cfg = ExperimentConfig(seed=123, topology={"kind": "random", "p": 0.4})
    g1, t1 = generate_cournot(cfg)
    g2, t2 = generate_cournot(cfg)
    for a, b in zip(g1.Q + g1.q, g2.Q + g2.q):
        np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(g1.constraint.b, g2.constraint.b)
    np.testing.assert_array_equal(t1.W, t2.W)
    g3, _ = generate_cournot(ExperimentConfig(seed=124))
    assert not np.array_equal(g1.constraint.b, g3.constraint.b)


def test_generate_respects_ranges():
    game, _ = generate_cournot(ExperimentConfig(seed=4, N=6, m=3))
    assert all(np.all((np.diag(Q) >= 1) & (np.diag(Q) <= 8)) for Q in game.Q)
    assert all(np.all((q >= 1) & (q <= 2)) for q in game.q)
    assert all(np.all((b >= 10) & (b <= 20)) for b in game.constraint.b_blocks)
    assert np.all((game.price_intercept >= 1) & (game.price_intercept <= 3))
    assert np.all((game.price_slope >= 5) & (game.price_slope <= 10))
    assert all(np.array_equal(A, np.eye(3)) for A in game.constraint.A_blocks)


def test_default_mapping_strongly_monotone_100_seeds():
    for seed in range(100):
        game, _ = generate_cournot(ExperimentConfig(seed=seed, N=5, m=3))
        assert monotonicity_constants(game).mu > 0


def test_smoke_instance_end_to_end():
    game, _ = generate_cournot(ExperimentConfig(seed=2, N=2, m=1))
    x, lam = solve_gne(game)
    assert kkt_residual(VIProblem.from_game(game), x, lam).residual <= 1e-6


# -- certify -------------------------------------------------------------------

def test_certify_ring5_fixture(tmp_path):
    save_game(scalar_quadratic_game([3, 2, 1, 4, 5], [2] * 5), tmp_path / "g.json")
    cfg = ExperimentConfig(N=5, m=1, game_path=str(tmp_path / "g.json"))
    rep = certify(cfg)
    assert rep["certified"] is True and 0 < rep["a"] < 1
    assert rep["beta"] == 0.1 and rep["gamma"] == 0.1


def test_certify_complete_average_reports_degenerate(tmp_path):
    save_game(scalar_quadratic_game([3, 2, 1], [2] * 3), tmp_path / "g.json")
    Topology.from_weights(np.full((3, 3), 1 / 3)).save(tmp_path / "t.json")
    cfg = ExperimentConfig(N=3, m=1, game_path=str(tmp_path / "g.json"),
                           topology={"kind": "file", "path": str(tmp_path / "t.json")})
    rep = certify(cfg)
    assert rep["error"]["type"] == "DegenerateSigma" and rep["certified"] is False


def test_certify_flags_either_way_for_explicit_steps():
    rep = certify(ExperimentConfig(N=4, m=2, stepsizes=[1.0, 0.1, 0.1]))
    assert rep["certified"] is False and rep["beta"] == 0.1


# -- runs ------------------------------------------------------------------------

def test_run_experiment_fixture(tmp_path):
    res = run_experiment(fixture_config(tmp_path))
    assert res.report["final"]["dist_to_star"] <= 1e-6
    assert res.report["certified"] is True
    for key in ("config_hash", "constants", "certification", "rate_fit", "wall_time_s"):
        assert key in res.report
    assert json.loads(res.report_path.read_text())["config_hash"] == res.report["config_hash"]


def test_run_experiment_csv_is_byte_deterministic(tmp_path):
    cfg = ExperimentConfig(N=4, m=2, seed=5, max_iters=300, out_dir=str(tmp_path / "a"))
    a = run_experiment(cfg).csv_path.read_bytes()
    b = run_experiment(cfg, out_dir=tmp_path / "b").csv_path.read_bytes()
    assert a == b


def test_run_experiment_flushes_partial_csv(tmp_path):
    cfg = ExperimentConfig(N=3, m=1, stepsizes=[5.0, 0.1, 0.1], max_iters=2000,
                           out_dir=str(tmp_path))
    with pytest.raises(NonFinite):
        run_experiment(cfg)
    cols = read_trajectory_csv(tmp_path / "trajectory.csv")
    assert cols["iter"].size >= 1


def test_compare_forms_config_small():
    out = compare_forms_config(ExperimentConfig(N=4, m=2, seed=1), iters=50)
    assert out["max_rel_dev_x"] <= 1e-9 and out["max_rel_dev_lambda"] <= 1e-9


def test_build_instance_file_topology_size_check(tmp_path):
    Topology.from_adjacency(ring(4)).save(tmp_path / "t.json")
    with pytest.raises(ValueError):
        build_instance(ExperimentConfig(N=5, topology={"kind": "file",
                                                       "path": str(tmp_path / "t.json")}))
