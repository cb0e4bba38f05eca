"""Tests for the game builders, driven by hand-traced playouts and frozen
constructions worked out independently of the implementation.
"""

import numpy as np
import pytest

from simove.core import (
    CHANCE,
    INNER,
    TERMINAL,
    StrategyProfile,
    compute_subgame_values,
    expected_utility,
)
from simove.games import (
    make_anti,
    make_counterexample_game,
    make_goofspiel,
    make_linbound,
    make_matrix_game,
    make_oshizumo,
    make_random_game,
    parse_game_spec,
)


def play_out(game, picks1, picks2):
    """Follow labelled action choices from the root; returns the terminal
    utility.  ``picks`` are action labels (cards, bids), consumed per round."""
    s = game.root
    it1, it2 = iter(picks1), iter(picks2)
    while game.kind[s] != TERMINAL:
        assert game.kind[s] == INNER
        i = game.actions1[s].index(next(it1))
        j = game.actions2[s].index(next(it2))
        s = game.child[s][i][j]
    return game.util[s]


# ---------------------------------------------------------------------------
# Bidding game with a known card sequence
# ---------------------------------------------------------------------------

def test_goofspiel_hand_traces():
    game = make_goofspiel(2, nature=(1, 0))
    game.validate()
    # Taking the high card with the high bid wins outright.
    assert play_out(game, [1, 0], [0, 1]) == 1.0
    # Mirrored play ties every scoring comparison.
    assert play_out(game, [1, 0], [1, 0]) == 0.5
    assert play_out(game, [0, 1], [1, 0]) == 0.0


def test_goofspiel_symmetric_value_half():
    for d in (2, 3):
        solved = compute_subgame_values(make_goofspiel(d, nature="desc"))
        assert solved.root_value == pytest.approx(0.5, abs=1e-9)


def test_goofspiel_tie_discards_card():
    # d=3 descending: tie on the first card (worth 2) discards it; winning
    # the remaining cards (worth 1 and 0) then decides by one point.
    game = make_goofspiel(3, nature="desc")
    u = play_out(game, [2, 1, 0], [2, 0, 1])
    assert u == 1.0


def test_goofspiel_transpositions_share_states():
    # Round-2 states depend only on (remaining sets, score diff), so distinct
    # first-two-round orders converge; the state count must be well below the
    # history count.  For d=3 there are 3 inner levels; histories at the last
    # level alone would number (3*3)*(2*2) = 36.
    game = make_goofspiel(3, nature="desc")
    inner = sum(1 for k in game.kind if k == INNER)
    assert inner < 1 + 9 + 36
    # Depth equals the number of rounds.
    assert game.max_depth() == 3


def test_goofspiel_nature_permutation_spelling():
    a = make_goofspiel(3, nature="asc")
    b = make_goofspiel(3, nature=(0, 1, 2))
    assert a.n_states == b.n_states
    with pytest.raises(ValueError):
        make_goofspiel(3, nature=(0, 1))  # not a full permutation


# ---------------------------------------------------------------------------
# Coin-bidding push game
# ---------------------------------------------------------------------------

def test_oshizumo_hand_traces():
    game = make_oshizumo(2, 5)
    game.validate()
    # All-in first, then forced zeros while the opponent walks the wrestler
    # off the near edge.
    assert play_out(game, [5, 0, 0, 0, 0], [1, 1, 1, 1, 1]) == 0.0
    # Mirror image: pushed out past the far edge.
    assert play_out(game, [1, 1, 1, 1, 1], [5, 0, 0, 0, 0]) == 1.0
    # Both end broke with the wrestler one step into the far side.
    assert play_out(game, [2, 2, 1], [1, 1, 3]) == 1.0
    # Pure tie-down: both spend evenly, wrestler never moves.
    assert play_out(game, [1] * 5, [1] * 5) == 0.5


def test_oshizumo_symmetric_value_half():
    solved = compute_subgame_values(make_oshizumo(2, 5))
    assert solved.root_value == pytest.approx(0.5, abs=1e-9)


def test_oshizumo_bid_rules():
    game = make_oshizumo(2, 3)
    # Solvent players must bid at least one; broke players bid exactly zero.
    assert game.actions1[game.root] == (1, 2, 3)
    s = game.child[game.root][2][0]  # p1 bids 3, p2 bids 1
    assert game.actions1[s] == (0,) or 0 not in game.actions1[s]


# ---------------------------------------------------------------------------
# Seeded uniform-random trees
# ---------------------------------------------------------------------------

def test_random_game_shape_and_determinism():
    game = make_random_game(3, 3, seed=7)
    game.validate()
    inner = sum(1 for k in game.kind if k == INNER)
    leaves = [game.util[s] for s in range(game.n_states)
              if game.kind[s] == TERMINAL]
    assert inner == 1 + 9 + 81
    assert len(leaves) == 9 ** 3
    assert all(0.0 <= u <= 1.0 for u in leaves)
    again = make_random_game(3, 3, seed=7)
    assert [game.util[s] for s in range(game.n_states)] == \
        [again.util[s] for s in range(again.n_states)]
    other = make_random_game(3, 3, seed=8)
    assert [game.util[s] for s in range(game.n_states)] != \
        [other.util[s] for s in range(other.n_states)]


def test_random_game_size_guard():
    with pytest.raises(ValueError):
        make_random_game(5, 9, seed=0)


# ---------------------------------------------------------------------------
# Single-player chain with calibrated stop rewards
# ---------------------------------------------------------------------------

def test_linbound_reward_sequence_frozen():
    game = make_linbound(4, gamma=0.12, eta=0.001)
    game.validate()
    u = game.meta["u_values"]
    assert u[0] == pytest.approx(0.941)
    assert u[1] == pytest.approx(0.90336)
    assert u[2] == pytest.approx(0.96 * 0.90336)
    # Deepest three-action node carries the largest stop reward; the root the
    # smallest.  The final node offers only continue-to-1 or drop-to-0.
    chain = game.meta["chain"]
    assert len(chain) == 4
    root_up = game.util[game.child[chain[0]][0][0]]
    deep_up = game.util[game.child[chain[2]][0][0]]
    assert root_up == pytest.approx(u[2])
    assert deep_up == pytest.approx(u[0])
    assert len(game.actions1[chain[3]]) == 2


def test_linbound_every_chain_node_value_one():
    game = make_linbound(4, gamma=0.12, eta=0.001)
    solved = compute_subgame_values(game)
    for s in game.meta["chain"]:
        assert solved.values[s] == pytest.approx(1.0, abs=1e-9)


def test_linbound_rejects_bad_parameters():
    with pytest.raises(ValueError):
        make_linbound(0, gamma=0.1, eta=0.001)
    with pytest.raises(ValueError):
        make_linbound(3, gamma=0.0, eta=0.001)
    with pytest.raises(ValueError):
        make_linbound(3, gamma=0.1, eta=0.0)  # calibration needs slack
    with pytest.raises(ValueError):
        make_linbound(3, gamma=0.1, eta=0.2)  # stop reward would exceed 1


def test_anti_chain_structure():
    game = make_anti(4)
    game.validate()
    solved = compute_subgame_values(game)
    assert solved.root_value == pytest.approx(1.0)
    chain = game.meta["chain"]
    # Stop rewards fall linearly with depth: 3/4, 2/4, 1/4, 0.
    stops = [game.util[game.child[s][0][0]] for s in chain]
    assert stops == pytest.approx([0.75, 0.5, 0.25, 0.0])


# ---------------------------------------------------------------------------
# Two-level game with a safe root action and a matching-pennies subgame
# ---------------------------------------------------------------------------

def test_counterexample_game_structure():
    game = make_counterexample_game()
    game.validate()
    root = game.root
    j = game.meta["roles"]["J"]
    assert game.actions1[root] == ("X", "Y")
    assert game.actions2[root] == ("noop",)
    assert game.util[game.child[root][0][0]] == 0.0
    assert game.child[root][1][0] == j
    # Subgame payoffs: agree-on-diagonal pattern worth 1 to player 1.
    vals = [[game.util[game.child[j][i][k]] for k in range(2)]
            for i in range(2)]
    assert vals == [[1.0, 0.0], [0.0, 1.0]]


def test_counterexample_best_fixed_root_action():
    # Committing to the subgame and playing its equilibrium earns 1/2; the
    # safe action earns 0.
    game = make_counterexample_game()
    j = game.meta["roles"]["J"]
    enter = StrategyProfile(
        p1={game.root: (0.0, 1.0), j: (0.5, 0.5)}, default_uniform=True)
    assert expected_utility(game, enter) == pytest.approx(0.5)


# ---------------------------------------------------------------------------
# Spec strings
# ---------------------------------------------------------------------------

def test_parse_game_spec_round_trips():
    g = parse_game_spec("goofspiel:d=3,nature=desc")
    assert g.meta["name"] == "goofspiel" and g.meta["d"] == 3
    g = parse_game_spec("oshizumo:K=2,N=5")
    assert g.meta["K"] == 2 and g.meta["N"] == 5
    g = parse_game_spec("random:B=2,D=2,seed=11")
    assert g.meta["B"] == 2 and g.meta["seed"] == 11
    g = parse_game_spec("linbound:D=4,gamma=0.12,eta=0.001")
    assert g.meta["D"] == 4
    g = parse_game_spec("anti:D=3")
    assert g.meta["D"] == 3
    g = parse_game_spec("counterexample")
    assert g.meta["name"] == "counterexample"
    g = parse_game_spec("goofspiel:d=3,nature=2-0-1")
    assert g.meta["nature"] == (2, 0, 1)


def test_parse_game_spec_errors():
    with pytest.raises(ValueError):
        parse_game_spec("unknown:x=1")
    with pytest.raises(ValueError):
        parse_game_spec("goofspiel:q=3")
    with pytest.raises(ValueError):
        parse_game_spec("goofspiel:d=three")


def test_matrix_game_builder():
    game = make_matrix_game([[0.4, 0.5], [0.6, 0.5]])
    game.validate()
    assert compute_subgame_values(game).root_value == pytest.approx(0.5)


# ---------------------------------------------------------------------------
# Shared invariants
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("game", [
    make_goofspiel(3, nature="desc"),
    make_oshizumo(2, 4),
    make_random_game(2, 3, seed=3),
    make_linbound(3, gamma=0.1, eta=0.001),
    make_anti(3),
    make_counterexample_game(),
], ids=["goofspiel", "oshizumo", "random", "linbound", "anti", "cex"])
def test_all_games_validate_and_bound_utils(game):
    game.validate()
    for s in range(game.n_states):
        if game.kind[s] == TERMINAL:
            assert 0.0 <= game.util[s] <= 1.0
        elif game.kind[s] == INNER:
            assert len(game.actions1[s]) >= 1
            assert len(game.actions2[s]) >= 1
    assert game.max_depth() >= 1
