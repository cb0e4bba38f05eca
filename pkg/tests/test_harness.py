"""Tests for the experiment harness: checkpoint grids, trace rows, CSV
round-trips, engine dispatch, per-seed summaries and the finite-time
guarantee calculator."""

import csv
import math

import pytest

from simove.harness import (
    ExperimentConfig,
    MAX_GROUND_TRUTH_STATES,
    bound_report,
    checkpoint_grid,
    csv_header,
    finite_time_bound,
    read_trace_csv,
    run_experiment,
)
from simove.mcts import FLAVORS


# ---------------------------------------------------------------------------
# Checkpoint grid
# ---------------------------------------------------------------------------

def test_checkpoint_grid_shape():
    grid = checkpoint_grid(10 ** 6)
    assert grid[0] == 10
    assert grid[-1] == 10 ** 6
    assert list(grid) == sorted(set(grid))
    assert len(grid) == 101  # 20 per decade over five decades, ends included
    # log spacing: consecutive ratios hover around 10^(1/20)
    mid = [b / a for a, b in zip(grid[40:60], grid[41:61])]
    for r in mid:
        assert 1.05 <= r <= 1.2


def test_checkpoint_grid_small_totals():
    assert checkpoint_grid(7) == (7,)
    assert checkpoint_grid(10) == (10,)
    assert checkpoint_grid(25) == (10, 11, 13, 14, 16, 18, 20, 22, 25)
    with pytest.raises(ValueError):
        checkpoint_grid(0)


# ---------------------------------------------------------------------------
# run_experiment plumbing
# ---------------------------------------------------------------------------

def _tiny_config(**kw):
    base = dict(game="random:B=2,D=1,seed=5", variant="smmcts", policy="rm",
                gamma=0.1, iterations=1000, seeds=(0, 1),
                checkpoints=(1, 2, 5, 10, 30, 100, 200, 400, 700, 1000))
    base.update(kw)
    return ExperimentConfig(**base)


def test_row_count_is_seeds_times_checkpoints():
    result = run_experiment(_tiny_config())
    assert len(result.rows) == 20
    seen = {(r.seed, r.iteration) for r in result.rows}
    assert len(seen) == 20
    for row in result.rows:
        assert row.iteration in _tiny_config().checkpoints
        for flavor in FLAVORS:
            e1, e2 = row.expl[flavor]
            assert e1 >= -1e-9 and e2 >= -1e-9
        assert 0.0 <= row.g_root <= 1.0
        assert row.upo_root_max >= 0.0


def test_csv_round_trip(tmp_path):
    out = tmp_path / "trace.csv"
    cfg = _tiny_config(out=str(out))
    result = run_experiment(cfg)
    flavors, rows = read_trace_csv(str(out))
    assert flavors == tuple(FLAVORS)
    assert len(rows) == len(result.rows)
    for got, want in zip(rows, result.rows):
        assert got.exp_id == want.exp_id
        assert got.game == want.game
        assert (got.variant, got.policy) == (want.variant, want.policy)
        assert got.gamma == want.gamma
        assert (got.seed, got.iteration) == (want.seed, want.iteration)
        assert got.expl == want.expl            # repr round-trip is lossless
        assert got.g_root == want.g_root
        assert got.upo_root_max == want.upo_root_max
    with open(out, encoding="utf-8") as fh:
        header = next(csv.reader(fh))
    assert header == csv_header(FLAVORS)
    assert header[:7] == ["exp_id", "game", "variant", "policy", "gamma",
                          "seed", "iteration"]
    assert header[-3:] == ["g_root", "upo_root_max", "wall_ms"]


def test_reruns_are_identical_modulo_wall_time(tmp_path):
    outs = []
    for name in ("a.csv", "b.csv"):
        out = tmp_path / name
        run_experiment(_tiny_config(out=str(out)))
        outs.append(out.read_text(encoding="utf-8").splitlines())
    for la, lb in zip(*outs):
        assert la.rsplit(",", 1)[0] == lb.rsplit(",", 1)[0]


def test_default_checkpoints_cover_the_run():
    cfg = _tiny_config(checkpoints=None, iterations=500, seeds=(3,))
    result = run_experiment(cfg)
    iters = [r.iteration for r in result.rows]
    assert iters[0] == 10
    assert iters[-1] == 500
    assert iters == sorted(iters)


def test_config_validation():
    with pytest.raises(ValueError):
        run_experiment(_tiny_config(iterations=0))
    with pytest.raises(ValueError):
        run_experiment(_tiny_config(seeds=()))
    with pytest.raises(ValueError):
        run_experiment(_tiny_config(flavors=("nope",)))
    with pytest.raises(ValueError):
        run_experiment(_tiny_config(checkpoints=(5, 2000)))
    with pytest.raises(ValueError):
        run_experiment(_tiny_config(engine="gpu"))
    with pytest.raises(ValueError):
        run_experiment(_tiny_config(game="parcheesi"))


def test_oversized_game_fails_before_search():
    # the builder admits this game but exact evaluation must refuse it
    cfg = _tiny_config(game="random:B=2,D=8,seed=1", iterations=10,
                      seeds=(0,), checkpoints=(10,))
    with pytest.raises(RuntimeError, match="ground truth unavailable"):
        run_experiment(cfg)


def test_engine_dispatch():
    fast = run_experiment(_tiny_config(seeds=(0,), engine="fast"))
    ref = run_experiment(_tiny_config(seeds=(0,), engine="reference"))
    auto = run_experiment(_tiny_config(seeds=(0,), engine="auto"))
    assert fast.engine_used == "fast"
    assert ref.engine_used == "reference"
    assert auto.engine_used == "fast"
    # same seeds, different generators: traces need not match across engines
    assert [r.iteration for r in fast.rows] == [r.iteration for r in ref.rows]
    with pytest.raises(ValueError):
        run_experiment(_tiny_config(policy="cex", engine="fast"))


def test_cex_runs_on_the_reference_engine():
    cfg = ExperimentConfig(game="counterexample", variant="smmcts",
                           policy="cex", gamma=0.05, iterations=3000,
                           seeds=(0,), checkpoints=(1000, 3000))
    result = run_experiment(cfg)
    assert result.engine_used == "reference"
    assert len(result.rows) == 2
    summary = result.summaries[0]
    assert summary.node_regrets is not None
    game = result.game
    for s in game.inner_states():
        assert s in summary.node_regrets
        r1, r2 = summary.node_regrets[s]
        # bounded by construction; the sign only settles at scale
        assert -1.0 <= r1 <= 1.0 and -1.0 <= r2 <= 1.0
        probs1, probs2 = summary.node_strategies[s]
        assert len(probs1) == game.num_actions(s, 1)
        assert len(probs2) == game.num_actions(s, 2)


def test_seed_summaries_report_strategy_gaps():
    cfg = ExperimentConfig(game="goofspiel:d=3", variant="smmcts",
                           policy="rm", gamma=0.1, iterations=20_000,
                           seeds=(0,), checkpoints=(20_000,))
    result = run_experiment(cfg)
    s = result.summaries[0]
    assert 0.0 <= s.strategy_gap_hot <= s.strategy_gap_all <= 1.0
    assert s.hot_nodes == 0  # no node can have 1e5 visits in a 2e4 run
    assert s.node_regrets is None


def test_oversize_guard_constant_is_sane():
    assert MAX_GROUND_TRUTH_STATES >= 10_000


# ---------------------------------------------------------------------------
# Finite-time guarantee calculator
# ---------------------------------------------------------------------------

def test_bound_matches_hand_evaluation():
    t0 = finite_time_bound(b=2, depth=2, gamma=0.1, eps=0.1, n_states=3,
                           t_a=1000.0)
    assert t0 == pytest.approx(16 * 10 * 20 * math.log(4) * 1000, rel=1e-12)
    assert t0 == pytest.approx(4.436e6, rel=1e-3)


def test_bound_is_linear_in_the_consistency_horizon():
    one = finite_time_bound(b=2, depth=2, gamma=0.1, eps=0.1, n_states=3,
                            t_a=1000.0)
    two = finite_time_bound(b=2, depth=2, gamma=0.1, eps=0.1, n_states=3,
                            t_a=2000.0)
    assert two == 2 * one


def test_bound_collapses_at_depth_one():
    t0 = finite_time_bound(b=3, depth=1, gamma=0.25, eps=0.3, n_states=2,
                           t_a=500.0)
    assert t0 == math.log(2) * 500


def test_bound_input_validation():
    good = dict(b=2, depth=2, gamma=0.1, eps=0.1, n_states=3, t_a=1000.0)
    for key, bad in [("n_states", 1), ("b", 1), ("depth", 0), ("eps", 0.0),
                     ("eps", 1.0), ("gamma", 0.0), ("gamma", 1.0),
                     ("t_a", 0.0)]:
        with pytest.raises(ValueError):
            finite_time_bound(**{**good, key: bad})


def test_bound_report_carries_guarantee_and_constants():
    rep = bound_report(b=2, depth=2, gamma=0.1, eps=0.1, n_states=3,
                       t_a=1000.0, delta=0.01)
    assert rep.t0 == finite_time_bound(b=2, depth=2, gamma=0.1, eps=0.1,
                                       n_states=3, t_a=1000.0)
    assert rep.guarantee_eps == pytest.approx(4 * 2 * 3 * 0.1)
    assert rep.failure_mass == pytest.approx((2 * 3 + 2) * 0.01)
    assert rep.constant_averaged == 12.0   # 2 D (D+1) at D=2
    assert rep.constant_plain == 20.0      # 12(2^D - 1) - 8D at D=2
    no_delta = bound_report(b=2, depth=2, gamma=0.1, eps=0.1, n_states=3,
                            t_a=1000.0)
    assert no_delta.failure_mass is None
