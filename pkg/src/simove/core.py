"""Exact machinery for two-player zero-sum simultaneous-move games.

A game is a finite acyclic graph of states: inner states where both players
pick an action at once, chance states with a fixed outcome distribution, and
terminal states carrying player 1's utility in [0, 1] (player 2 receives one
minus that).  Stage matrices of subgame values are solved by linear
programming, which gives exact values, equilibrium profiles, best responses
and exploitability for every strategy profile.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linprog

INNER = 0
CHANCE = 1
TERMINAL = 2

_LP_OPTIONS = {
    "primal_feasibility_tolerance": 1e-10,
    "dual_feasibility_tolerance": 1e-10,
}


class IncompleteProfileError(ValueError):
    """A strategy profile has no entry for a reachable state."""


class Game:
    """Table-driven game over integer state ids.

    Transposed histories may share a state, so the structure is a rooted DAG
    in general; validation enforces that it is finite, acyclic and fully
    reachable from the root.
    """

    def __init__(self, kind, actions1, actions2, child, chance_children,
                 chance_probs, util, keys=None, root=0, meta=None):
        self.kind = kind
        self.actions1 = actions1
        self.actions2 = actions2
        self.child = child
        self.chance_children = chance_children
        self.chance_probs = chance_probs
        self.util = util
        self.keys = keys if keys is not None else list(range(len(kind)))
        self.root = root
        self.meta = meta or {}
        self._topo = None
        self._by_key = None

    @property
    def n_states(self):
        return len(self.kind)

    def inner_states(self):
        return [s for s in range(self.n_states) if self.kind[s] == INNER]

    def num_actions(self, s, player):
        return len(self.actions1[s] if player == 1 else self.actions2[s])

    def is_terminal(self, s):
        return self.kind[s] == TERMINAL

    def state_id(self, key):
        """Id of the state carrying this key (keys must be unique)."""
        if self._by_key is None:
            self._by_key = {k: s for s, k in enumerate(self.keys)}
        return self._by_key[key]

    def topological_order(self):
        """State ids with every child listed before its parents."""
        if self._topo is not None:
            return self._topo
        order, seen = [], set()
        stack = [(self.root, False)]
        on_path = set()
        while stack:
            s, done = stack.pop()
            if done:
                on_path.discard(s)
                order.append(s)
                continue
            if s in seen:
                continue
            if s in on_path:
                raise ValueError("cycle detected in game graph")
            seen.add(s)
            on_path.add(s)
            stack.append((s, True))
            for c in self._children(s):
                if c not in seen:
                    stack.append((c, False))
        self._topo = order
        return order

    def _children(self, s):
        if self.kind[s] == TERMINAL:
            return ()
        if self.kind[s] == CHANCE:
            return self.chance_children[s]
        return [c for row in self.child[s] for c in row]

    def validate(self):
        reached = set(self.topological_order())
        if len(reached) != self.n_states:
            raise ValueError("unreachable states present")
        for s in range(self.n_states):
            k = self.kind[s]
            if k == TERMINAL:
                u = self.util[s]
                if not (0.0 <= u <= 1.0):
                    raise ValueError(f"terminal utility {u} outside [0, 1]")
            elif k == CHANCE:
                p = self.chance_probs[s]
                if abs(sum(p) - 1.0) > 1e-9 or any(x < 0 for x in p):
                    raise ValueError("chance probabilities are not a distribution")
            else:
                if not self.actions1[s] or not self.actions2[s]:
                    raise ValueError("inner state with an empty action set")
        return self

    def max_depth(self):
        """Largest number of inner states on any root-to-terminal path."""
        memo = {}
        for s in self.topological_order():
            if self.kind[s] == TERMINAL:
                memo[s] = 0
            elif self.kind[s] == CHANCE:
                memo[s] = max(memo[c] for c in self.chance_children[s])
            else:
                memo[s] = 1 + max(memo[c] for c in self._children(s))
        return memo[self.root]


# ---------------------------------------------------------------------------
# Matrix games
# ---------------------------------------------------------------------------

@dataclass
class MatrixSolution:
    value: float
    row_strategy: Tuple[float, ...]
    col_strategy: Tuple[float, ...]


def solve_matrix_game(matrix) -> MatrixSolution:
    """Equilibrium value and mixed strategies of a zero-sum matrix game.

    The row player maximizes, the column player minimizes.  Solved with two
    LPs, then polished by re-solving the equalization system on the detected
    supports so the result is accurate well beyond LP tolerances.
    """
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.size == 0:
        raise ValueError("matrix must be a non-empty 2-d array")
    rows, cols = m.shape
    if rows == 1 and cols == 1:
        return MatrixSolution(float(m[0, 0]), (1.0,), (1.0,))
    if rows == 1:
        j = int(np.argmin(m[0]))
        q = tuple(1.0 if x == j else 0.0 for x in range(cols))
        return MatrixSolution(float(m[0, j]), (1.0,), q)
    if cols == 1:
        i = int(np.argmax(m[:, 0]))
        p = tuple(1.0 if x == i else 0.0 for x in range(rows))
        return MatrixSolution(float(m[i, 0]), p, (1.0,))

    p, v1 = _lp_row(m)
    q, v2 = _lp_col(m)
    value = 0.5 * (v1 + v2)
    polished = _polish(m, p, q, value)
    if polished is not None:
        value, p, q = polished
    return MatrixSolution(float(value), tuple(p), tuple(q))


def _lp_row(m):
    rows, cols = m.shape
    c = np.zeros(rows + 1)
    c[-1] = -1.0
    a_ub = np.hstack([-m.T, np.ones((cols, 1))])
    a_eq = np.ones((1, rows + 1))
    a_eq[0, -1] = 0.0
    bounds = [(0.0, 1.0)] * rows + [(None, None)]
    res = linprog(c, A_ub=a_ub, b_ub=np.zeros(cols), A_eq=a_eq, b_eq=[1.0],
                  bounds=bounds, method="highs", options=_LP_OPTIONS)
    if not res.success:
        raise RuntimeError(f"LP failed: {res.message}")
    return res.x[:rows], res.x[-1]


def _lp_col(m):
    rows, cols = m.shape
    c = np.zeros(cols + 1)
    c[-1] = 1.0
    a_ub = np.hstack([m, -np.ones((rows, 1))])
    a_eq = np.ones((1, cols + 1))
    a_eq[0, -1] = 0.0
    bounds = [(0.0, 1.0)] * cols + [(None, None)]
    res = linprog(c, A_ub=a_ub, b_ub=np.zeros(rows), A_eq=a_eq, b_eq=[1.0],
                  bounds=bounds, method="highs", options=_LP_OPTIONS)
    if not res.success:
        raise RuntimeError(f"LP failed: {res.message}")
    return res.x[:cols], res.x[-1]


def _polish(m, p, q, value, support_tol=1e-7, check_tol=1e-6):
    """Re-solve the equalization system on the LP supports.

    Returns a refined (value, p, q) or None when the supports are degenerate
    or the refined solution fails the equilibrium check.
    """
    s1 = np.flatnonzero(p > support_tol)
    s2 = np.flatnonzero(q > support_tol)
    if len(s1) != len(s2) or len(s1) == 0:
        return None
    size = len(s1)
    sub = m[np.ix_(s1, s2)]
    a = np.zeros((size + 1, size + 1))
    b = np.zeros(size + 1)
    b[size] = 1.0
    a[:size, :size] = sub.T
    a[:size, size] = -1.0
    a[size, :size] = 1.0
    try:
        x = np.linalg.solve(a, b)
        a[:size, :size] = sub
        y = np.linalg.solve(a, b)
    except np.linalg.LinAlgError:
        return None
    pp = np.zeros(m.shape[0])
    pp[s1] = x[:size]
    qq = np.zeros(m.shape[1])
    qq[s2] = y[:size]
    v = 0.5 * (x[size] + y[size])
    eps = 1e-10
    if abs(x[size] - y[size]) > check_tol or abs(v - value) > check_tol:
        return None
    if (pp < -eps).any() or (qq < -eps).any():
        return None
    if (pp @ m < v - eps * 10).any() or (m @ qq > v + eps * 10).any():
        return None
    np.clip(pp, 0.0, None, out=pp)
    np.clip(qq, 0.0, None, out=qq)
    return v, pp / pp.sum(), qq / qq.sum()


# ---------------------------------------------------------------------------
# Strategy profiles
# ---------------------------------------------------------------------------

class StrategyProfile:
    """Per-state mixed strategies for one or both players.

    With ``default_uniform`` unset, querying a state that has no entry raises
    ``IncompleteProfileError``; extraction from search trees turns the flag on
    so states never visited default to uniform play.
    """

    def __init__(self, p1=None, p2=None, default_uniform=False):
        self._p1 = dict(p1 or {})
        self._p2 = dict(p2 or {})
        self.default_uniform = default_uniform

    def set_probs(self, state, player, probs):
        (self._p1 if player == 1 else self._p2)[state] = tuple(probs)

    def probs(self, game, state, player):
        table = self._p1 if player == 1 else self._p2
        hit = table.get(state)
        if hit is not None:
            return hit
        if self.default_uniform:
            k = game.num_actions(state, player)
            return (1.0 / k,) * k
        raise IncompleteProfileError(
            f"no strategy for player {player} at state {state}")

    def states(self, player):
        return (self._p1 if player == 1 else self._p2).keys()


# ---------------------------------------------------------------------------
# Exact evaluation
# ---------------------------------------------------------------------------

@dataclass
class SolvedGame:
    game: Game
    values: List[float]
    row_strategies: Dict[int, Tuple[float, ...]] = field(default_factory=dict)
    col_strategies: Dict[int, Tuple[float, ...]] = field(default_factory=dict)

    @property
    def root_value(self):
        return self.values[self.game.root]

    def equilibrium_profile(self) -> StrategyProfile:
        return StrategyProfile(self.row_strategies, self.col_strategies,
                               default_uniform=True)


def compute_subgame_values(game: Game) -> SolvedGame:
    """Backward induction with an exact stage-game solve at every inner state."""
    values = [0.0] * game.n_states
    rows, cols = {}, {}
    for s in game.topological_order():
        k = game.kind[s]
        if k == TERMINAL:
            values[s] = game.util[s]
        elif k == CHANCE:
            values[s] = sum(p * values[c] for p, c in
                            zip(game.chance_probs[s], game.chance_children[s]))
        else:
            grid = [[values[c] for c in row] for row in game.child[s]]
            sol = solve_matrix_game(grid)
            values[s] = sol.value
            rows[s] = sol.row_strategy
            cols[s] = sol.col_strategy
    return SolvedGame(game, values, rows, cols)


def expected_utility(game: Game, profile: StrategyProfile) -> float:
    """Player 1's expected utility when both players follow the profile.

    Evaluation is lazy so the profile is only queried at states with positive
    reach probability; unreachable states may be missing from it.
    """
    memo = [None] * game.n_states

    def value(s):
        if memo[s] is not None:
            return memo[s]
        k = game.kind[s]
        if k == TERMINAL:
            total = game.util[s]
        elif k == CHANCE:
            total = sum(p * value(c) for p, c in
                        zip(game.chance_probs[s], game.chance_children[s]))
        else:
            p = profile.probs(game, s, 1)
            q = profile.probs(game, s, 2)
            total = 0.0
            grid = game.child[s]
            for i, pi in enumerate(p):
                if pi == 0.0:
                    continue
                row = grid[i]
                for j, qj in enumerate(q):
                    if qj != 0.0:
                        total += pi * qj * value(row[j])
        memo[s] = total
        return total

    return value(game.root)


def best_response_value(game: Game, fixed_player: int,
                        profile: StrategyProfile) -> float:
    """Player 1's utility when ``fixed_player`` follows the profile and the
    opponent plays an exact best response (ties broken toward the lowest
    action index)."""
    if fixed_player not in (1, 2):
        raise ValueError("fixed_player must be 1 or 2")
    values = [0.0] * game.n_states
    for s in game.topological_order():
        k = game.kind[s]
        if k == TERMINAL:
            values[s] = game.util[s]
        elif k == CHANCE:
            values[s] = sum(p * values[c] for p, c in
                            zip(game.chance_probs[s], game.chance_children[s]))
        else:
            grid = game.child[s]
            if fixed_player == 1:
                p = profile.probs(game, s, 1)
                best = None
                for j in range(len(game.actions2[s])):
                    v = sum(pi * values[grid[i][j]]
                            for i, pi in enumerate(p) if pi)
                    if best is None or v < best - 1e-15:
                        best = v
            else:
                q = profile.probs(game, s, 2)
                best = None
                for i in range(len(game.actions1[s])):
                    row = grid[i]
                    v = sum(qj * values[row[j]]
                            for j, qj in enumerate(q) if qj)
                    if best is None or v > best + 1e-15:
                        best = v
            values[s] = best
    return values[game.root]


def exploitability_pair(game: Game, solved: SolvedGame,
                        profile: StrategyProfile) -> Tuple[float, float]:
    """(expl1, expl2): each player's shortfall against a best-responding
    opponent.  Both are zero exactly at equilibrium and never negative up to
    solver precision."""
    v = solved.root_value
    e1 = v - best_response_value(game, 1, profile)
    e2 = best_response_value(game, 2, profile) - v
    return e1, e2


# ---------------------------------------------------------------------------
# Exploration removal
# ---------------------------------------------------------------------------

def remove_exploration(probs: Sequence[float], gamma: float) -> Tuple[float, ...]:
    """Undo a uniform exploration mixture: solve p = (1-gamma) q + gamma/K for q.

    Finite-sample averages can dip below the gamma/K floor, in which case the
    de-mixed entry is clamped to zero and the rest renormalized.
    """
    if not (0.0 <= gamma < 1.0):
        raise ValueError(f"gamma must lie in [0, 1), got {gamma}")
    if gamma == 0.0:
        return tuple(probs)
    k = len(probs)
    floor = gamma / k
    scale = 1.0 / (1.0 - gamma)
    out = [max(0.0, (p - floor) * scale) for p in probs]
    total = sum(out)
    if total <= 0.0:
        return (1.0 / k,) * k
    return tuple(x / total for x in out)
