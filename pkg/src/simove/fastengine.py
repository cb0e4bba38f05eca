"""Jitted array engine for the four bandit policies.

Runs the same per-iteration procedure as the reference tree: descend through
in-tree states selecting both actions independently, expand the first state
not yet in the tree after a uniform rollout, then walk back up updating
policies, joint counts, sampled-distribution sums and the root observation
trackers.  All statistics live in flat numpy arrays laid out by
``compile_game``, so a run can be advanced in chunks between read-outs.

Each instance owns a private xorshift generator state; the kernels never
touch global randomness, so interleaved runs stay reproducible.  The tiny
generator is deliberate: numba's builtin np.random state is process-global,
which would couple separate runs.

The policy-step helpers are shared between the tree kernel and a matrix
self-play arena used to measure bandit regret directly, so one set of
distribution tests covers both.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from .compile import compile_game
from .core import StrategyProfile, TERMINAL, remove_exploration
from .mcts import AVERAGED, FLAVORS, VARIANTS

_CODES = {"exp3": 0, "rm": 1, "exp3*": 2, "rm*": 3}
_TERM = TERMINAL
_MASK64 = (1 << 64) - 1


def _seed_state(seed):
    # splitmix64 of the seed gives a well-mixed nonzero xorshift state
    z = (int(seed) + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    z ^= z >> 31
    if z == 0:
        z = 0x9E3779B97F4A7C15
    return np.array([z], dtype=np.uint64)


@njit(cache=True)
def _rand_u01(state):
    # xorshift64*, top 53 bits scaled to [0, 1)
    x = state[0]
    x ^= x >> np.uint64(12)
    x ^= x << np.uint64(25)
    x ^= x >> np.uint64(27)
    state[0] = x
    bits = (x * np.uint64(0x2545F4914F6CDD1D)) >> np.uint64(11)
    return bits * (1.0 / 9007199254740992.0)


@njit(cache=True)
def _uniform_action(k, state):
    a = int(_rand_u01(state) * k)
    if a >= k:
        a = k - 1
    return a


@njit(cache=True)
def _draw(buf, k, state):
    u = _rand_u01(state)
    acc = 0.0
    for i in range(k):
        acc += buf[i]
        if u < acc:
            return i
    return k - 1


@njit(cache=True)
def _exp3_probs(stats, off, k, gamma, out):
    hi = stats[off]
    for i in range(1, k):
        if stats[off + i] > hi:
            hi = stats[off + i]
    eta = gamma / k
    tot = 0.0
    for i in range(k):
        w = math.exp(eta * (stats[off + i] - hi))
        out[i] = w
        tot += w
    scale = (1.0 - gamma) / tot
    mix = gamma / k
    for i in range(k):
        out[i] = scale * out[i] + mix


@njit(cache=True)
def _rm_probs(stats, off, k, gamma, out):
    tot = 0.0
    for i in range(k):
        r = stats[off + i]
        p = r if r > 0.0 else 0.0
        out[i] = p
        tot += p
    if tot <= 0.0:
        u = 1.0 / k
        for i in range(k):
            out[i] = u
        return
    scale = (1.0 - gamma) / tot
    mix = gamma / k
    for i in range(k):
        out[i] = scale * out[i] + mix


@njit(cache=True)
def _select(code, stats, off, k, gamma, state, pbuf, dbuf):
    """Draw one action; fills dbuf with the sampling distribution.

    Returns (action, selection probability, explored).  For the wrapped
    policies an explored step samples uniformly and must skip the update;
    the inner distribution still lands in pbuf, and dbuf carries the gamma
    mixture actually sampled from.
    """
    if code == 0 or code == 2:
        _exp3_probs(stats, off, k, gamma, pbuf)
    else:
        _rm_probs(stats, off, k, gamma, pbuf)
    if code >= 2:
        mix = gamma / k
        for i in range(k):
            dbuf[i] = (1.0 - gamma) * pbuf[i] + mix
        if _rand_u01(state) < gamma:
            return _uniform_action(k, state), 1.0, True
        a = _draw(pbuf, k, state)
        return a, pbuf[a], False
    for i in range(k):
        dbuf[i] = pbuf[i]
    a = _draw(pbuf, k, state)
    return a, pbuf[a], False


@njit(cache=True)
def _update(code, stats, off, k, chosen, p_sel, reward):
    if code == 1 or code == 3:
        for i in range(k):
            stats[off + i] -= reward
    stats[off + chosen] += reward / p_sel


@njit(cache=True)
def _upo_record(counts, plain, wsum, wval, pending, k_own, k_other,
                own, other, value):
    for i in range(k_own):
        if i != own:
            pending[i * k_other + other] += 1
    idx = own * k_other + other
    w = 1 + pending[idx]
    pending[idx] = 0
    counts[idx] += 1
    plain[idx] += value
    wsum[idx] += w
    wval[idx] += w * value


@njit(cache=True)
def _rollout(s, kind, k1v, k2v, grid_off, child_flat, util, state):
    while kind[s] != _TERM:
        a1 = _uniform_action(k1v[s], state)
        a2 = _uniform_action(k2v[s], state)
        s = child_flat[grid_off[s] + a1 * k2v[s] + a2]
    return util[s]


@njit(cache=True)
def _search_kernel(n_iters, averaged, code, gamma,
                   kind, k1v, k2v, grid_off, child_flat, util, root,
                   off1, off2, stat1, stat2, dist1, dist2, joint,
                   visits, value_sum,
                   uc1, up1, uw1, uv1, upend1,
                   uc2, up2, uw2, uv2, upend2, usteps,
                   state,
                   path, acts1, acts2, psel1, psel2, exf1, exf2,
                   pbuf1, dbuf1, pbuf2, dbuf2):
    for _ in range(n_iters):
        s = root
        depth = 0
        x = 0.0
        while True:
            if kind[s] == _TERM:
                x = util[s]
                break
            if visits[s] == 0:
                x = _rollout(s, kind, k1v, k2v, grid_off, child_flat, util,
                             state)
                visits[s] = 1
                value_sum[s] = x
                break
            k1 = k1v[s]
            k2 = k2v[s]
            a1, p1, e1 = _select(code, stat1, off1[s], k1, gamma, state,
                                 pbuf1, dbuf1)
            a2, p2, e2 = _select(code, stat2, off2[s], k2, gamma, state,
                                 pbuf2, dbuf2)
            o1 = off1[s]
            for i in range(k1):
                dist1[o1 + i] += dbuf1[i]
            o2 = off2[s]
            for j in range(k2):
                dist2[o2 + j] += dbuf2[j]
            path[depth] = s
            acts1[depth] = a1
            acts2[depth] = a2
            psel1[depth] = p1
            psel2[depth] = p2
            exf1[depth] = e1
            exf2[depth] = e2
            depth += 1
            s = child_flat[grid_off[s] + a1 * k2 + a2]
        # walk back up; the child's tallies are final before the parent
        # reads its running mean, matching the recursive reference
        child = s
        child_terminal = kind[child] == _TERM
        for d in range(depth - 1, -1, -1):
            ps = path[d]
            if averaged and not child_terminal:
                val = value_sum[child] / visits[child]
            else:
                val = x
            a1 = acts1[d]
            a2 = acts2[d]
            if not exf1[d]:
                _update(code, stat1, off1[ps], k1v[ps], a1, psel1[d], val)
            if not exf2[d]:
                _update(code, stat2, off2[ps], k2v[ps], a2, psel2[d],
                        1.0 - val)
            if ps == root:
                _upo_record(uc1, up1, uw1, uv1, upend1, k1v[ps], k2v[ps],
                            a1, a2, val)
                _upo_record(uc2, up2, uw2, uv2, upend2, k2v[ps], k1v[ps],
                            a2, a1, 1.0 - val)
                usteps[0] += 1
            joint[grid_off[ps] + a1 * k2v[ps] + a2] += 1
            visits[ps] += 1
            value_sum[ps] += x
            child = ps
            child_terminal = False


@njit(cache=True)
def _matrix_arena(payoff, code, gamma, steps, t_min, state,
                  stat1, stat2, pbuf1, dbuf1, pbuf2, dbuf2, tot1, tot2):
    k1, k2 = payoff.shape
    real1 = 0.0
    real2 = 0.0
    worst1 = 0.0
    worst2 = 0.0
    for t in range(1, steps + 1):
        a1, p1, e1 = _select(code, stat1, 0, k1, gamma, state, pbuf1, dbuf1)
        a2, p2, e2 = _select(code, stat2, 0, k2, gamma, state, pbuf2, dbuf2)
        x = payoff[a1, a2]
        if not e1:
            _update(code, stat1, 0, k1, a1, p1, x)
        if not e2:
            _update(code, stat2, 0, k2, a2, p2, 1.0 - x)
        for i in range(k1):
            tot1[i] += payoff[i, a2]
        real1 += x
        for j in range(k2):
            tot2[j] += 1.0 - payoff[a1, j]
        real2 += 1.0 - x
        if t >= t_min:
            hi = tot1[0]
            for i in range(1, k1):
                if tot1[i] > hi:
                    hi = tot1[i]
            r = (hi - real1) / t
            if r > worst1:
                worst1 = r
            hi = tot2[0]
            for j in range(1, k2):
                if tot2[j] > hi:
                    hi = tot2[j]
            r = (hi - real2) / t
            if r > worst2:
                worst2 = r
    return worst1, worst2


# ---------------------------------------------------------------------------
# Python-facing wrappers
# ---------------------------------------------------------------------------

def exp3_distribution(gains, gamma):
    """Sampling distribution over cumulative gains, jitted form.

    Exposed so tests can pin it against the object policy."""
    stats = np.ascontiguousarray(gains, dtype=np.float64)
    out = np.empty(len(stats))
    _exp3_probs(stats, 0, len(stats), gamma, out)
    return tuple(float(p) for p in out)


def rm_distribution(regrets, gamma):
    """Sampling distribution over cumulative regrets, jitted form."""
    stats = np.ascontiguousarray(regrets, dtype=np.float64)
    out = np.empty(len(stats))
    _rm_probs(stats, 0, len(stats), gamma, out)
    return tuple(float(p) for p in out)


def matrix_selfplay_max_regret(payoff, policy, gamma, steps, t_min, seed):
    """Bandit self-play on one payoff matrix.

    Both players run the named policy against each other for ``steps`` plays
    (row player receives the entry, column player one minus it) while a full
    counterfactual ledger tracks every action's cumulative reward.  Returns
    the largest per-player average regret seen at any step >= ``t_min``.
    """
    if policy not in _CODES:
        raise ValueError(f"unknown policy {policy!r}")
    if not (0.0 < gamma < 1.0):
        raise ValueError("gamma must lie in (0, 1)")
    payoff = np.ascontiguousarray(payoff, dtype=np.float64)
    if payoff.ndim != 2:
        raise ValueError("payoff must be a matrix")
    if payoff.min() < 0.0 or payoff.max() > 1.0:
        raise ValueError("payoffs must lie in [0, 1]")
    k1, k2 = payoff.shape
    worst1, worst2 = _matrix_arena(
        payoff, _CODES[policy], gamma, steps, t_min, _seed_state(seed),
        np.zeros(k1), np.zeros(k2),
        np.empty(k1), np.empty(k1), np.empty(k2), np.empty(k2),
        np.zeros(k1), np.zeros(k2))
    return float(worst1), float(worst2)


class FastSearch:
    """Array-backed search with the reference tree's read-out contract.

    Covers the four bandit policies on chance-free games.  Observation
    trackers are kept for the root only; per-node tracking stays with the
    reference engine.
    """

    def __init__(self, game, variant, policy, gamma, seed, compiled=None):
        if variant not in VARIANTS:
            raise ValueError(f"unknown search variant {variant!r}")
        if policy not in _CODES:
            raise ValueError(f"the array engine cannot run policy {policy!r}")
        if not (0.0 < gamma < 1.0):
            raise ValueError("gamma must lie in (0, 1)")
        cg = compiled if compiled is not None else compile_game(game)
        if cg.game is not game:
            raise ValueError("compiled tables belong to a different game")
        self.game = game
        self.cg = cg
        self.variant = variant
        self.policy = policy
        self.gamma = gamma
        self.seed = seed
        self.averaged = variant == AVERAGED
        self.iterations = 0
        self._state = _seed_state(seed)
        n = cg.n_states
        self.visits = np.zeros(n, dtype=np.int64)
        self.value_sum = np.zeros(n, dtype=np.float64)
        self.stat1 = np.zeros(cg.n_slots1)
        self.stat2 = np.zeros(cg.n_slots2)
        self.dist1 = np.zeros(cg.n_slots1)
        self.dist2 = np.zeros(cg.n_slots2)
        self.joint = np.zeros(cg.n_cells, dtype=np.int64)
        kr1 = int(cg.k1[cg.root])
        kr2 = int(cg.k2[cg.root])
        self._upo1 = _upo_arrays(kr1, kr2)
        self._upo2 = _upo_arrays(kr2, kr1)
        self._usteps = np.zeros(1, dtype=np.int64)
        depth = max(cg.max_depth, 1)
        self._path = np.zeros(depth, dtype=np.int64)
        self._acts1 = np.zeros(depth, dtype=np.int64)
        self._acts2 = np.zeros(depth, dtype=np.int64)
        self._psel1 = np.zeros(depth)
        self._psel2 = np.zeros(depth)
        self._exf1 = np.zeros(depth, dtype=np.bool_)
        self._exf2 = np.zeros(depth, dtype=np.bool_)
        self._pbuf1 = np.empty(cg.max_actions)
        self._dbuf1 = np.empty(cg.max_actions)
        self._pbuf2 = np.empty(cg.max_actions)
        self._dbuf2 = np.empty(cg.max_actions)

    def run(self, n):
        if n < 0:
            raise ValueError("iteration count must be nonnegative")
        if n == 0:
            return
        cg = self.cg
        _search_kernel(
            n, self.averaged, _CODES[self.policy], self.gamma,
            cg.kind, cg.k1, cg.k2, cg.grid_offset, cg.child_flat, cg.util,
            cg.root, cg.act_offset1, cg.act_offset2,
            self.stat1, self.stat2, self.dist1, self.dist2, self.joint,
            self.visits, self.value_sum,
            self._upo1[0], self._upo1[1], self._upo1[2], self._upo1[3],
            self._upo1[4],
            self._upo2[0], self._upo2[1], self._upo2[2], self._upo2[3],
            self._upo2[4], self._usteps,
            self._state,
            self._path, self._acts1, self._acts2, self._psel1, self._psel2,
            self._exf1, self._exf2,
            self._pbuf1, self._dbuf1, self._pbuf2, self._dbuf2)
        self.iterations += n

    # -- read-outs ----------------------------------------------------------

    def visit_counts(self):
        """Playout tallies per expanded inner state."""
        return {int(s): int(self.visits[s])
                for s in np.flatnonzero(self.visits)}

    def joint_counts_at(self, s):
        k1 = int(self.cg.k1[s])
        k2 = int(self.cg.k2[s])
        off = int(self.cg.grid_offset[s])
        return self.joint[off:off + k1 * k2].reshape(k1, k2)

    def extract_strategy(self, flavor):
        """Same semantics as the reference tree's extraction."""
        if flavor not in FLAVORS:
            raise ValueError(f"unknown strategy flavor {flavor!r}")
        base, _, suffix = flavor.partition("_")
        strip = suffix == "noexplore"
        profile = StrategyProfile(default_uniform=True)
        cg = self.cg
        for s in np.flatnonzero(self.visits > 1):
            s = int(s)
            sel = int(self.visits[s]) - 1
            if base == "empirical":
                grid = self.joint_counts_at(s)
                probs1 = grid.sum(axis=1) / sel
                probs2 = grid.sum(axis=0) / sel
            else:
                o1 = int(cg.act_offset1[s])
                o2 = int(cg.act_offset2[s])
                probs1 = self.dist1[o1:o1 + int(cg.k1[s])] / sel
                probs2 = self.dist2[o2:o2 + int(cg.k2[s])] / sel
            probs1 = tuple(float(p) for p in probs1)
            probs2 = tuple(float(p) for p in probs2)
            if strip:
                probs1 = remove_exploration(probs1, self.gamma)
                probs2 = remove_exploration(probs2, self.gamma)
            profile.set_probs(s, 1, probs1)
            profile.set_probs(s, 2, probs2)
        return profile

    def root_mean(self):
        v = self.visits[self.cg.root]
        return float(self.value_sum[self.cg.root] / v) if v else 0.0

    def root_upo_max(self):
        return max(_upo_metric(self._upo1), _upo_metric(self._upo2))


def _upo_arrays(k_own, k_other):
    cells = max(k_own * k_other, 1)
    return (np.zeros(cells, dtype=np.int64),    # observation counts
            np.zeros(cells),                    # plain value sums
            np.zeros(cells, dtype=np.int64),    # retroactive weight sums
            np.zeros(cells),                    # weighted value sums
            np.zeros(cells, dtype=np.int64))    # skipped-slot backlog


def _upo_metric(arrs):
    counts, plain, wsum, wval, _ = arrs
    gap = 0.0
    for idx in np.flatnonzero(counts):
        g = abs(plain[idx] / counts[idx] - wval[idx] / wsum[idx])
        if g > gap:
            gap = float(g)
    return gap
