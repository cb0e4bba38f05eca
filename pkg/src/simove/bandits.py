"""Per-node selection policies.

Each policy owns one player's statistics at one search-tree node and exposes
``k`` (action count), ``select() -> int``, ``update(reward)`` and
``probabilities() -> tuple``.  ``select`` draws from exactly the distribution
``probabilities`` reports at that moment; ``update`` must follow with the
realized reward in [0, 1], higher being better for the owning player.
Randomness comes from a caller-supplied ``random.Random`` so runs reproduce.
"""

from __future__ import annotations

import math
from collections import deque


class ProtocolError(RuntimeError):
    """A scripted policy observed a payoff the game protocol cannot produce."""


def _draw(rng, probs):
    u = rng.random()
    acc = 0.0
    for i, p in enumerate(probs):
        acc += p
        if u < acc:
            return i
    return len(probs) - 1


def _check_reward(reward):
    if not 0.0 <= reward <= 1.0:
        raise ValueError(f"reward must lie in [0, 1], got {reward}")


class Exp3:
    """Exponential weights over importance-weighted cumulative gains, mixed
    with uniform exploration at rate gamma.  The sampling probability of
    every action stays at or above gamma / k, which keeps the importance
    weights bounded."""

    def __init__(self, k, gamma, rng):
        if not (0.0 < gamma < 1.0):
            raise ValueError("gamma must lie in (0, 1)")
        self.k = k
        self.gamma = gamma
        self.rng = rng
        self.gains = [0.0] * k
        self._last = -1
        self._last_prob = 0.0

    def probabilities(self):
        eta = self.gamma / self.k
        hi = max(self.gains)
        w = [math.exp(eta * (g - hi)) for g in self.gains]
        tot = sum(w)
        scale = (1.0 - self.gamma) / tot
        mix = self.gamma / self.k
        return tuple(scale * x + mix for x in w)

    def select(self):
        probs = self.probabilities()
        i = _draw(self.rng, probs)
        self._last = i
        self._last_prob = probs[i]
        return i

    def update(self, reward):
        _check_reward(reward)
        self.gains[self._last] += reward / self._last_prob


class RegretMatching:
    """Play proportionally to positive cumulative regret with a gamma floor;
    with no positive regret anywhere the distribution is exactly uniform.
    Updates charge the realized reward to every action and refund the chosen
    one importance-weighted, so unchosen actions accrue regret in
    expectation exactly when they would have done better."""

    def __init__(self, k, gamma, rng):
        if not (0.0 < gamma < 1.0):
            raise ValueError("gamma must lie in (0, 1)")
        self.k = k
        self.gamma = gamma
        self.rng = rng
        self.regrets = [0.0] * k
        self._last = -1
        self._last_prob = 0.0

    def probabilities(self):
        pos = [r if r > 0.0 else 0.0 for r in self.regrets]
        tot = sum(pos)
        if tot <= 0.0:
            return (1.0 / self.k,) * self.k
        scale = (1.0 - self.gamma) / tot
        mix = self.gamma / self.k
        return tuple(scale * x + mix for x in pos)

    def select(self):
        probs = self.probabilities()
        i = _draw(self.rng, probs)
        self._last = i
        self._last_prob = probs[i]
        return i

    def update(self, reward):
        _check_reward(reward)
        for i in range(self.k):
            self.regrets[i] -= reward
        self.regrets[self._last] += reward / self._last_prob


class ExplorationWrapper:
    """Explore uniformly with probability gamma, otherwise delegate.

    Exploration steps bypass the inner policy entirely: it neither selects
    nor hears the reward, so its statistics reflect only its own plays."""

    def __init__(self, inner, gamma, rng):
        if not (0.0 < gamma < 1.0):
            raise ValueError("gamma must lie in (0, 1)")
        self.inner = inner
        self.gamma = gamma
        self.rng = rng
        self._explored = False

    @property
    def k(self):
        return self.inner.k

    def probabilities(self):
        mix = self.gamma / self.k
        return tuple((1.0 - self.gamma) * p + mix
                     for p in self.inner.probabilities())

    def select(self):
        if self.rng.random() < self.gamma:
            self._explored = True
            return self.rng.randrange(self.k)
        self._explored = False
        return self.inner.select()

    def update(self, reward):
        if not self._explored:
            self.inner.update(reward)


class RegretLedger:
    """External-regret meter: realized reward against the best single action
    in hindsight, fed with the full reward vector of every step."""

    def __init__(self, k):
        self.k = k
        self.totals = [0.0] * k
        self.realized = 0.0
        self.steps = 0

    def record(self, rewards, chosen):
        for i, r in enumerate(rewards):
            self.totals[i] += r
        self.realized += rewards[chosen]
        self.steps += 1

    def average_regret(self):
        if self.steps == 0:
            return 0.0
        return (max(self.totals) - self.realized) / self.steps


def make_policy(name, k, gamma, rng):
    """Factory for the selection policies addressable from experiment
    configurations.  The starred names wrap the base policy in explicit
    uniform exploration."""
    if name == "exp3":
        return Exp3(k, gamma, rng)
    if name == "rm":
        return RegretMatching(k, gamma, rng)
    if name == "exp3*":
        return ExplorationWrapper(Exp3(k, gamma, rng), gamma, rng)
    if name == "rm*":
        return ExplorationWrapper(RegretMatching(k, gamma, rng), gamma, rng)
    raise ValueError(f"unknown policy {name!r}")


# ---------------------------------------------------------------------------
# Scripted pattern policies
#
# These drive the search to a provably non-equilibrium fixed point while each
# policy's own local regret still vanishes.  Two paired instances sit at a
# 2x2 matching subgame and walk a four-step joint pattern covering every
# action pair; a solo instance sits at a parent node and interleaves a safe
# zero branch with visits to the subgame.  All three keep their empirical
# action frequencies uniform while the realized values stay biased.
# ---------------------------------------------------------------------------

_PAIR_OWN = {1: (0, 0, 1, 1), 2: (0, 1, 1, 0)}
_PAIR_PARTNER = {1: (0, 1, 1, 0), 2: (0, 0, 1, 1)}
_SOLO_PATTERN = (1, 0, 0, 1)

MIRROR_WINDOW = 20
MIRROR_LIMIT = 10


def _require_binary(reward):
    if abs(reward) > 1e-9 and abs(reward - 1.0) > 1e-9:
        raise ProtocolError(f"expected a 0/1 payoff, got {reward}")


class PairedPatternPolicy:
    """One side of the scripted subgame pair.

    The policy alternates learning buffers with cooperation phases.  Buffers
    run a fresh regret matcher for b0 * 2**cycle steps.  In cooperation the
    policy plays its pattern slot for the current step count, flipping it
    with probability epsilon as a probe, and reconstructs the partner's
    action from the binary payoff (the diagonal payoff matrix identifies the
    partner for either role).  Evidence of a non-patterned partner, either
    probe penalties pushing the long-run average over 2 * epsilon or ten
    deviations inside a twenty-step window, sends the policy back into the
    next, doubled buffer.
    """

    def __init__(self, role, epsilon, rng, b0=1000):
        if role not in (1, 2):
            raise ValueError("role must be 1 or 2")
        if not (0.0 < epsilon < 0.5):
            raise ValueError("epsilon must lie in (0, 0.5)")
        self.k = 2
        self.role = role
        self.epsilon = epsilon
        self.rng = rng
        self.b0 = b0
        self.clock = 0  # total steps seen; pattern position is clock mod 4
        self.cycle = 0
        self._enter_buffer()

    def _enter_buffer(self):
        self.cycle += 1
        self.phase = "buffer"
        nominal = self.b0 * 2 ** self.cycle
        # End at a shared clock milestone: both partners tick the same clock,
        # so buffers triggered a few steps apart still finish on the same
        # step and cooperation restarts in sync.
        self.buffer_end = -(-(self.clock + nominal) // nominal) * nominal
        self.buffer_len = self.buffer_end - self.clock
        self.inner = RegretMatching(2, self.epsilon, self.rng)

    def _enter_coop(self):
        self.phase = "coop"
        self.coop_steps = 0
        self.penalty = 0.0
        self.window = deque(maxlen=MIRROR_WINDOW)
        self._checking = False

    def probabilities(self):
        if self.phase == "buffer":
            return self.inner.probabilities()
        planned = _PAIR_OWN[self.role][self.clock % 4]
        p = [self.epsilon, self.epsilon]
        p[planned] = 1.0 - self.epsilon
        return tuple(p)

    def select(self):
        if self.phase == "buffer":
            self._played = self.inner.select()
            return self._played
        planned = _PAIR_OWN[self.role][self.clock % 4]
        self._checking = self.rng.random() < self.epsilon
        self._played = 1 - planned if self._checking else planned
        return self._played

    def update(self, reward):
        if self.phase == "buffer":
            self.inner.update(reward)
            self.clock += 1
            if self.clock >= self.buffer_end:
                self._enter_coop()
            return
        _require_binary(reward)
        won = reward > 0.5
        if self.role == 1:
            partner = self._played if won else 1 - self._played
        else:
            partner = 1 - self._played if won else self._played
        deviated = partner != _PAIR_PARTNER[self.role][self.clock % 4]
        self.window.append(deviated)
        if self._checking and deviated:
            self.penalty += 1.0 / self.epsilon
        self.coop_steps += 1
        self.clock += 1
        if self._suspicious():
            self._enter_buffer()

    def _suspicious(self):
        if sum(self.window) >= MIRROR_LIMIT:
            return True
        eps = self.epsilon
        ratio = (eps * self.buffer_len + self.penalty + 1.0 / eps) \
            / (self.buffer_len + self.coop_steps + 1.0)
        return ratio > 2.0 * eps


class AlternatingSoloPolicy:
    """The scripted parent-node policy above the subgame pair.

    Action 0 is a safe branch that always pays zero; action 1 visits the
    subgame, whose cooperating pair pays 1 and 0 on alternating visits.  The
    four-step pattern (1, 0, 0, 1) plays each action half the time while
    collecting payoff only on the even visits, pinning the realized average
    at one quarter.  Probes run at rate 2 * epsilon and flip two consecutive
    slots; any two consecutive pattern slots hold an even number of flips of
    action 1, so the subgame's visit-count parity survives every probe.
    Payoffs are verified during probes against the expected alternation
    (zero on the safe branch); sustained mismatch beyond 4 * epsilon sends
    the policy into the next, doubled buffer.
    """

    def __init__(self, epsilon, rng, b0=1000, warmup_visits=0):
        if not (0.0 < epsilon < 0.5):
            raise ValueError("epsilon must lie in (0, 0.5)")
        self.k = 2
        self.epsilon = epsilon
        self.rate = 2.0 * epsilon
        self.rng = rng
        self.b0 = b0
        self.clock = 0
        self.cycle = 0
        # warmup visits only initialize the subgame without stepping its
        # pattern (a freshly expanded subgame consumes one visit that way),
        # so they must not count toward the payoff alternation
        self.visits_to_subgame = -warmup_visits
        self.phase_shift = 0
        self._enter_buffer()

    def _enter_buffer(self):
        self.cycle += 1
        self.phase = "buffer"
        self.buffer_len = self.b0 * 2 ** self.cycle
        self.buffer_left = self.buffer_len
        self.inner = RegretMatching(2, self.rate, self.rng)
        self._checking = False
        self.mid_check = False

    def _enter_coop(self):
        self.phase = "coop"
        self.coop_steps = 0
        self.penalty = 0.0
        self._checking = False
        self.mid_check = False
        # Align the pattern with the payoff alternation: the second of the
        # two consecutive subgame slots (pattern index 0) must collect the
        # paying even-parity visit, otherwise its weight-1 observations read
        # zero while the skip-weighted ones read one.  The buffer leaves the
        # visit parity arbitrary, so re-anchor the pattern here.
        slot = 0 if self.visits_to_subgame % 2 == 0 else 3
        self.phase_shift = (slot - self.clock) % 4

    def _slot(self):
        return _SOLO_PATTERN[(self.clock + self.phase_shift) % 4]

    def probabilities(self):
        if self.phase == "buffer":
            return self.inner.probabilities()
        planned = self._slot()
        if self.mid_check:
            # second half of a probe pair: the flip is already committed
            return (1.0, 0.0) if planned == 1 else (0.0, 1.0)
        p = [self.rate, self.rate]
        p[planned] = 1.0 - self.rate
        return tuple(p)

    def select(self):
        if self.phase == "buffer":
            self._played = self.inner.select()
            return self._played
        planned = self._slot()
        if self.mid_check:
            self._played = 1 - planned
        else:
            self._checking = self.rng.random() < self.rate
            self._played = 1 - planned if self._checking else planned
        return self._played

    def update(self, reward):
        if self.phase == "buffer":
            self.inner.update(reward)
            if self._played == 1:
                self.visits_to_subgame += 1
            self.clock += 1
            self.buffer_left -= 1
            if self.buffer_left == 0:
                self._enter_coop()
            return
        _require_binary(reward)
        if self._played == 1:
            expected = 1.0 if self.visits_to_subgame % 2 == 0 else 0.0
            self.visits_to_subgame += 1
        else:
            expected = 0.0
        if (self._checking or self.mid_check) and abs(reward - expected) > 0.5:
            self.penalty += 1.0 / self.rate
        self.coop_steps += 1
        self.clock += 1
        if self.mid_check:
            self.mid_check = False
        elif self._checking:
            # defer the guard until the probe pair completes
            self.mid_check = True
            self._checking = False
            return
        if self._suspicious():
            self._enter_buffer()

    def _suspicious(self):
        ratio = (self.rate * self.buffer_len + self.penalty + 1.0 / self.rate) \
            / (self.buffer_len + self.coop_steps + 1.0)
        return ratio > 2.0 * self.rate
