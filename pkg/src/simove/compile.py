"""Flat array encoding of a game for the jitted search engine.

The object form of a game stores per-state python lists, which the numba
kernels cannot touch.  Compilation packs everything into a handful of numpy
arrays: the action grid of every inner state becomes a slice of one flat
child table, and each state claims a contiguous run of slots in per-player
action arrays so policy statistics for the whole tree live in two vectors.
Chance states are rejected; the array engine only covers deterministic
games, everything else runs on the reference tree.
"""

from __future__ import annotations

import numpy as np

from .core import CHANCE, TERMINAL, Game


class CompiledGame:
    """Numpy view of a game, shared read-only by every run over it."""

    __slots__ = ("n_states", "root", "kind", "k1", "k2", "grid_offset",
                 "child_flat", "util", "act_offset1", "act_offset2",
                 "n_slots1", "n_slots2", "n_cells", "max_actions",
                 "max_depth", "game")

    def __init__(self, game: Game):
        n = game.n_states
        if any(k == CHANCE for k in game.kind):
            raise ValueError("the array engine does not support chance states")
        self.game = game
        self.n_states = n
        self.root = game.root
        self.kind = np.array(game.kind, dtype=np.int64)
        self.k1 = np.zeros(n, dtype=np.int64)
        self.k2 = np.zeros(n, dtype=np.int64)
        self.util = np.zeros(n, dtype=np.float64)
        for s in range(n):
            if game.kind[s] == TERMINAL:
                self.util[s] = game.util[s]
            else:
                self.k1[s] = len(game.actions1[s])
                self.k2[s] = len(game.actions2[s])
        cells = self.k1 * self.k2
        self.grid_offset = np.zeros(n, dtype=np.int64)
        np.cumsum(cells[:-1], out=self.grid_offset[1:])
        self.n_cells = int(cells.sum())
        self.child_flat = np.zeros(self.n_cells, dtype=np.int64)
        for s in range(n):
            if game.kind[s] != TERMINAL:
                off = self.grid_offset[s]
                k2 = self.k2[s]
                for i, row in enumerate(game.child[s]):
                    self.child_flat[off + i * k2:off + (i + 1) * k2] = row
        self.act_offset1 = np.zeros(n, dtype=np.int64)
        np.cumsum(self.k1[:-1], out=self.act_offset1[1:])
        self.act_offset2 = np.zeros(n, dtype=np.int64)
        np.cumsum(self.k2[:-1], out=self.act_offset2[1:])
        self.n_slots1 = int(self.k1.sum())
        self.n_slots2 = int(self.k2.sum())
        self.max_actions = int(max(self.k1.max(), self.k2.max()))
        self.max_depth = game.max_depth()


def compile_game(game: Game) -> CompiledGame:
    return CompiledGame(game)
