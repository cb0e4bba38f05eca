"""Builders for the benchmark games.

All games are two-player zero-sum with simultaneous moves and utilities in
[0, 1].  Games where distinct move orders reach identical positions share
those positions as one state, so the transition structure is a rooted DAG.
"""

from __future__ import annotations

import numpy as np

from .core import CHANCE, INNER, TERMINAL, Game

MAX_RANDOM_STATES = 500_000


class _Builder:
    def __init__(self):
        self.kind = []
        self.actions1 = []
        self.actions2 = []
        self.child = []
        self.chance_children = []
        self.chance_probs = []
        self.util = []
        self.keys = []
        self.ids = {}

    def alloc(self, key):
        sid = len(self.kind)
        self.kind.append(None)
        self.actions1.append(None)
        self.actions2.append(None)
        self.child.append(None)
        self.chance_children.append(None)
        self.chance_probs.append(None)
        self.util.append(None)
        self.keys.append(key)
        self.ids[key] = sid
        return sid

    def game(self, root, meta):
        return Game(self.kind, self.actions1, self.actions2, self.child,
                    self.chance_children, self.chance_probs, self.util,
                    keys=self.keys, root=root, meta=meta)


def build_game(root_key, expand, meta=None) -> Game:
    """Construct a game from an ``expand`` callback mapping a state key to
    one of ``("terminal", u)``, ``("chance", [(p, key), ...])`` or
    ``("inner", labels1, labels2, child_key_grid)``.  Keys are interned, so
    transposed histories merge."""
    b = _Builder()

    def intern(key):
        sid = b.ids.get(key)
        if sid is not None:
            return sid
        sid = b.alloc(key)
        spec = expand(key)
        tag = spec[0]
        if tag == "terminal":
            b.kind[sid] = TERMINAL
            b.util[sid] = float(spec[1])
        elif tag == "chance":
            pairs = spec[1]
            b.kind[sid] = CHANCE
            b.chance_probs[sid] = [p for p, _ in pairs]
            b.chance_children[sid] = [intern(k) for _, k in pairs]
        else:
            _, labels1, labels2, grid = spec
            b.kind[sid] = INNER
            b.actions1[sid] = tuple(labels1)
            b.actions2[sid] = tuple(labels2)
            b.child[sid] = [[intern(ck) for ck in row] for row in grid]
        return sid

    root = intern(root_key)
    return b.game(root, meta or {})


def _score_terminal(diff):
    if diff > 0:
        return ("terminal", 1.0)
    if diff < 0:
        return ("terminal", 0.0)
    return ("terminal", 0.5)


# ---------------------------------------------------------------------------
# Card-bidding race for a known prize sequence
# ---------------------------------------------------------------------------

def make_goofspiel(d, nature="desc") -> Game:
    """Both players hold cards 0..d-1 and bid one per round for the current
    prize card; the higher bid takes the prize's point value, ties discard
    it.  The prize order is fixed and known, so there are no chance states.
    Utility is 1 / 0.5 / 0 by final point comparison.  States are keyed by
    (round, remaining hands, point difference)."""
    if d < 2:
        raise ValueError("d must be at least 2")
    if nature == "desc":
        seq = tuple(range(d - 1, -1, -1))
    elif nature == "asc":
        seq = tuple(range(d))
    else:
        seq = tuple(int(x) for x in nature)
        if sorted(seq) != list(range(d)):
            raise ValueError(f"nature must be a permutation of 0..{d - 1}")

    full = tuple(range(d))

    def expand(key):
        if key[0] == "t":
            return _score_terminal(key[1])
        _, rnd, rem1, rem2, diff = key
        prize = seq[rnd]
        grid = []
        for c1 in rem1:
            row = []
            n1 = tuple(c for c in rem1 if c != c1)
            for c2 in rem2:
                n2 = tuple(c for c in rem2 if c != c2)
                if c1 > c2:
                    nd = diff + prize
                elif c2 > c1:
                    nd = diff - prize
                else:
                    nd = diff
                if rnd + 1 == d:
                    row.append(("t", nd))
                else:
                    row.append(("g", rnd + 1, n1, n2, nd))
            grid.append(row)
        return ("inner", rem1, rem2, grid)

    meta = {"name": "goofspiel", "d": d, "nature": seq}
    return build_game(("g", 0, full, full, 0), expand, meta)


# ---------------------------------------------------------------------------
# Coin-bidding push game
# ---------------------------------------------------------------------------

def make_oshizumo(K, N) -> Game:
    """A wrestler starts at the middle of a board with positions 0..2K; both
    players hold N coins and bid each round (at least one while solvent, zero
    when broke).  The higher bidder pushes the wrestler one step; player 1
    pushes toward 2K.  The game ends when the wrestler leaves the board or
    both players are broke; the player nearer the final position loses."""
    if K < 1 or N < 1:
        raise ValueError("K and N must be at least 1")

    def utility(pos):
        if pos > K:
            return 1.0
        if pos < K:
            return 0.0
        return 0.5

    def expand(key):
        _, pos, c1, c2 = key
        if pos < 0 or pos > 2 * K or (c1 == 0 and c2 == 0):
            return ("terminal", utility(pos))
        bids1 = (0,) if c1 == 0 else tuple(range(1, c1 + 1))
        bids2 = (0,) if c2 == 0 else tuple(range(1, c2 + 1))
        grid = []
        for b1 in bids1:
            row = []
            for b2 in bids2:
                step = (b1 > b2) - (b2 > b1)
                row.append(("o", pos + step, c1 - b1, c2 - b2))
            grid.append(row)
        return ("inner", bids1, bids2, grid)

    meta = {"name": "oshizumo", "K": K, "N": N}
    return build_game(("o", K, N, N), expand, meta)


# ---------------------------------------------------------------------------
# Seeded random trees
# ---------------------------------------------------------------------------

def make_random_game(B, D, seed) -> Game:
    """Complete depth-D tree where every inner state offers B actions per
    player; leaf utilities are iid uniform in [0, 1] drawn from a seeded
    generator (numpy ``default_rng``).  Leaves are numbered depth-first by
    joint-action digits, most significant first, and filled from one draw of
    the generator, so a seed pins the whole game."""
    if B < 2 or D < 1:
        raise ValueError("need B >= 2 and D >= 1")
    bb = B * B
    n_states = (bb ** (D + 1) - 1) // (bb - 1)
    if n_states > MAX_RANDOM_STATES:
        raise ValueError(
            f"random game with B={B}, D={D} has {n_states} states, "
            f"beyond the {MAX_RANDOM_STATES} guard")
    leaves = np.random.default_rng(seed).random(bb ** D)
    labels = tuple(range(B))

    def expand(key):
        _, depth, index = key
        if depth == D:
            return ("terminal", leaves[index])
        grid = [[("n", depth + 1, index * bb + i * B + j)
                 for j in range(B)] for i in range(B)]
        return ("inner", labels, labels, grid)

    meta = {"name": "random", "B": B, "D": D, "seed": seed}
    return build_game(("n", 0, 0), expand, meta)


# ---------------------------------------------------------------------------
# Single-player chains
# ---------------------------------------------------------------------------

def make_linbound(D, gamma, eta=0.001) -> Game:
    """Chain of D single-player choices (the opponent has one no-op action).
    Continuing to the end is worth 1; every earlier node offers a stop reward
    chosen so that a learner exploring uniformly at rate gamma is indifferent
    within eta between stopping and continuing.  Stop rewards follow
    u_1 = 1 - gamma/2 + eta, u_{j+1} = (1 - gamma/3) u_j, with u_1 at the
    deepest three-action node and the last value at the root."""
    if D < 1:
        raise ValueError("D must be at least 1")
    if not (0.0 < gamma < 1.0):
        raise ValueError("gamma must lie in (0, 1)")
    if not (0.0 < eta < gamma / 2.0):
        raise ValueError("eta must lie in (0, gamma/2)")
    u_values = []
    u = 1.0 - gamma / 2.0 + eta
    for _ in range(D - 1):
        u_values.append(u)
        u *= 1.0 - gamma / 3.0

    def expand(key):
        if key[0] == "t":
            return ("terminal", key[1])
        _, k = key
        noop = ("noop",)
        if k == D:
            grid = [[("t", 1.0)], [("t", 0.0)]]
            return ("inner", ("right", "down"), noop, grid)
        up = u_values[D - k - 1]
        grid = [[("t", up)], [("c", k + 1)], [("t", 0.0)]]
        return ("inner", ("up", "right", "down"), noop, grid)

    game = build_game(("c", 1), expand,
                      {"name": "linbound", "D": D, "gamma": gamma, "eta": eta,
                       "u_values": u_values})
    game.meta["chain"] = [game.state_id(("c", k)) for k in range(1, D + 1)]
    return game


def make_anti(D) -> Game:
    """Chain of D single-player stop/continue choices: stopping at node d is
    worth (D-d)/D, continuing past the last node is worth 1.  A configurable
    stand-in for reward ladders that mislead greedy tree search; the optimal
    play is to continue throughout (value 1)."""
    if D < 1:
        raise ValueError("D must be at least 1")

    def expand(key):
        if key[0] == "t":
            return ("terminal", key[1])
        _, d = key
        stop = ("t", (D - d) / D)
        go = ("t", 1.0) if d == D else ("c", d + 1)
        return ("inner", ("stop", "continue"), ("noop",), [[stop], [go]])

    game = build_game(("c", 1), expand, {"name": "anti", "D": D})
    game.meta["chain"] = [game.state_id(("c", d)) for d in range(1, D + 1)]
    return game


# ---------------------------------------------------------------------------
# Two-level game combining a safe action with a matching subgame
# ---------------------------------------------------------------------------

def make_counterexample_game() -> Game:
    """Root: player 1 either takes a safe terminal worth 0 or enters a 2x2
    subgame (player 2 has a single no-op at the root).  The subgame pays 1
    when the joint action lies on the agreeing diagonal, else 0; its value is
    1/2, so the root value is 1/2 as well."""

    def expand(key):
        if key[0] == "t":
            return ("terminal", key[1])
        if key == "I":
            return ("inner", ("X", "Y"), ("noop",), [[("t", 0.0)], ["J"]])
        grid = [[("t", 1.0), ("t", 0.0)], [("t", 0.0), ("t", 1.0)]]
        return ("inner", ("U", "D"), ("L", "R"), grid)

    game = build_game("I", expand, {"name": "counterexample"})
    game.meta["roles"] = {"I": game.state_id("I"), "J": game.state_id("J")}
    return game


def make_matrix_game(grid) -> Game:
    """Wrap a payoff matrix as a one-shot game (one inner state, terminals)."""
    rows = len(grid)
    cols = len(grid[0])

    def expand(key):
        if key != "root":
            return ("terminal", key[3])
        child = [[("t", i, j, float(grid[i][j])) for j in range(cols)]
                 for i in range(rows)]
        return ("inner", tuple(f"r{i}" for i in range(rows)),
                tuple(f"c{j}" for j in range(cols)), child)

    return build_game("root", expand, {"name": "matrix"})


# ---------------------------------------------------------------------------
# Spec strings
# ---------------------------------------------------------------------------

def _parse_params(text):
    params = {}
    if text:
        for part in text.split(","):
            if "=" not in part:
                raise ValueError(f"bad game parameter {part!r}")
            k, v = part.split("=", 1)
            params[k.strip()] = v.strip()
    return params


def _take(params, key, conv, default=None):
    if key in params:
        raw = params.pop(key)
        try:
            return conv(raw)
        except ValueError as exc:
            raise ValueError(f"bad value for {key}: {raw!r}") from exc
    if default is None:
        raise ValueError(f"missing game parameter {key}")
    return default


def parse_game_spec(spec: str) -> Game:
    """Build a game from a compact spec string such as
    ``goofspiel:d=5,nature=desc`` or ``oshizumo:K=2,N=5``."""
    name, _, rest = spec.partition(":")
    name = name.strip()
    params = _parse_params(rest)
    if name == "goofspiel":
        d = _take(params, "d", int)
        nature = params.pop("nature", "desc")
        if nature not in ("desc", "asc"):
            nature = tuple(int(x) for x in nature.split("-"))
        game = make_goofspiel(d, nature=nature)
    elif name == "oshizumo":
        game = make_oshizumo(_take(params, "K", int), _take(params, "N", int))
    elif name == "random":
        game = make_random_game(_take(params, "B", int),
                                _take(params, "D", int),
                                _take(params, "seed", int))
    elif name == "linbound":
        game = make_linbound(_take(params, "D", int),
                             _take(params, "gamma", float),
                             _take(params, "eta", float, 0.001))
    elif name == "anti":
        game = make_anti(_take(params, "D", int))
    elif name == "counterexample":
        game = make_counterexample_game()
    else:
        raise ValueError(f"unknown game {name!r}")
    if params:
        raise ValueError(f"unrecognized parameters for {name}: {sorted(params)}")
    game.meta["spec"] = spec
    return game
