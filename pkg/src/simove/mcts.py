"""Simultaneous-move Monte Carlo tree search over explicit game trees.

Each expanded state holds one independent selection policy per player.  An
iteration walks the tree by sampling both policies at every visited state,
expands the first state it leaves the tree at, finishes the playout with a
uniform rollout, and feeds the resulting payoff back up the path.  The
plain variant feeds every policy the raw playout payoff; the averaged
variant feeds each policy the visited child's running mean instead, which
smooths the leaf noise without touching the raw visit tallies.

Besides the policies, every state accumulates the statistics the analysis
side needs: joint action counts (the empirical strategy), running sums of
the sampled distributions (the average strategy), and a pair of streaming
trackers that compare plain and retroactively weighted payoff averages per
joint action, certifying whether the values fed to the policies behaved
like unbiased payoff observations.
"""

from random import Random

from .bandits import AlternatingSoloPolicy, PairedPatternPolicy, make_policy
from .core import CHANCE, TERMINAL, StrategyProfile, remove_exploration

PLAIN = "smmcts"
AVERAGED = "smmcts-a"
VARIANTS = (PLAIN, AVERAGED)

BANDIT_POLICIES = ("exp3", "rm", "exp3*", "rm*")
SCRIPTED_POLICY = "cex"

FLAVORS = ("empirical", "average", "empirical_noexplore", "average_noexplore")


class UpoTracker:
    """Streaming unbiased-payoff-observation check for one player at a state.

    Every recorded step carries the player's own action, the opponent's
    action, and the value fed into the player's policy update.  For each
    joint action pair the tracker keeps the plain mean over the steps the
    pair was played next to a weighted mean in which a play also stands in
    for the opponent-matched steps skipped since the pair's previous play
    (weight 1 + skips).  The weighted mean reconstructs the pair's payoff
    stream in whole-node time, so when the fed values are unbiased payoff
    observations the two means share a limit; a persistent gap certifies
    biased feedback.  The same weighted sums give a counterfactual regret
    estimate against the opponent's realized action stream.
    """

    __slots__ = ("k_own", "k_other", "counts", "plain_sum", "weight_sum",
                 "weighted_sum", "pending", "steps")

    def __init__(self, k_own, k_other):
        self.k_own = k_own
        self.k_other = k_other
        self.counts = [[0] * k_other for _ in range(k_own)]
        self.plain_sum = [[0.0] * k_other for _ in range(k_own)]
        self.weight_sum = [[0] * k_other for _ in range(k_own)]
        self.weighted_sum = [[0.0] * k_other for _ in range(k_own)]
        self.pending = [[0] * k_other for _ in range(k_own)]
        self.steps = 0

    def record(self, own, other, value):
        pending = self.pending
        for i in range(self.k_own):
            if i != own:
                pending[i][other] += 1
        w = 1 + pending[own][other]
        pending[own][other] = 0
        self.counts[own][other] += 1
        self.plain_sum[own][other] += value
        self.weight_sum[own][other] += w
        self.weighted_sum[own][other] += w * value
        self.steps += 1

    def pair_gap(self, own, other):
        """|plain mean - weighted mean| for one pair; None before any play."""
        c = self.counts[own][other]
        if c == 0:
            return None
        plain = self.plain_sum[own][other] / c
        weighted = self.weighted_sum[own][other] / self.weight_sum[own][other]
        return abs(plain - weighted)

    def metric(self):
        """Worst per-pair gap; zero until some pair has been played."""
        worst = 0.0
        for i in range(self.k_own):
            for j in range(self.k_other):
                gap = self.pair_gap(i, j)
                if gap is not None and gap > worst:
                    worst = gap
        return worst

    def weighted_total(self, own):
        return sum(self.weighted_sum[own])

    def realized_total(self):
        return sum(map(sum, self.plain_sum))

    def average_regret(self):
        """Per-step counterfactual regret implied by the weighted sums."""
        if self.steps == 0:
            return 0.0
        best = max(self.weighted_total(a) for a in range(self.k_own))
        return (best - self.realized_total()) / self.steps


class TreeNode:
    """Search statistics for one expanded inner state."""

    __slots__ = ("state", "pol1", "pol2", "visits", "value_sum",
                 "joint_counts", "dist1_sum", "dist2_sum", "selections",
                 "upo1", "upo2")

    def __init__(self, state, pol1, pol2, k1, k2):
        self.state = state
        self.pol1 = pol1
        self.pol2 = pol2
        self.visits = 0
        self.value_sum = 0.0
        self.joint_counts = [[0] * k2 for _ in range(k1)]
        self.dist1_sum = [0.0] * k1
        self.dist2_sum = [0.0] * k2
        self.selections = 0
        self.upo1 = UpoTracker(k1, k2)
        self.upo2 = UpoTracker(k2, k1)

    def mean(self):
        return self.value_sum / self.visits

    def empirical(self, player):
        """Normalized joint-count marginal for one player."""
        counts = self.joint_counts
        if player == 1:
            marg = [sum(row) for row in counts]
        else:
            marg = [sum(row[j] for row in counts)
                    for j in range(len(counts[0]))]
        total = self.selections
        return tuple(c / total for c in marg)

    def average(self, player):
        """Mean of the distributions the player actually sampled from."""
        sums = self.dist1_sum if player == 1 else self.dist2_sum
        return tuple(s / self.selections for s in sums)


class ChanceStats:
    """Pass-through tallies for a chance state on in-tree paths."""

    __slots__ = ("visits", "value_sum")

    def __init__(self):
        self.visits = 0
        self.value_sum = 0.0

    def mean(self):
        return self.value_sum / self.visits


class SearchTree:
    """One search instance: a game, a variant, per-state policies, a seed.

    ``policy`` names the per-state selection rule; the scripted "cex" wiring
    installs the pattern policies from the bandit module at the two inner
    states of the counterexample game (plain variant only, since those
    policies verify raw 0/1 payoffs).  ``policy_factory``, when given,
    overrides policy construction entirely with ``factory(state, player, k,
    rng)``.  All randomness flows through one ``random.Random(seed)``, so
    equal seeds reproduce runs bit for bit.
    """

    def __init__(self, game, variant, policy, gamma, seed,
                 policy_factory=None, b0=1000):
        if variant not in VARIANTS:
            raise ValueError(f"unknown variant {variant!r}")
        if not (0.0 < gamma < 1.0):
            raise ValueError("gamma must lie in (0, 1)")
        if policy_factory is None and policy != SCRIPTED_POLICY \
                and policy not in BANDIT_POLICIES:
            raise ValueError(f"unknown policy {policy!r}")
        self._roles = None
        if policy == SCRIPTED_POLICY and policy_factory is None:
            if variant != PLAIN:
                raise ValueError(
                    "the scripted counterexample policy needs the plain "
                    "variant: it verifies raw 0/1 payoffs")
            self._roles = game.meta.get("roles")
            if self._roles is None:
                raise ValueError(
                    "the scripted counterexample policy only plays the "
                    "counterexample game")
        self.game = game
        self.variant = variant
        self.policy = policy
        self.gamma = gamma
        self.b0 = b0
        self.averaged = variant == AVERAGED
        self.policy_factory = policy_factory
        self.rng = Random(seed)
        self.nodes = {}
        self.chance_stats = {}
        self.iterations = 0

    # -- policy wiring ------------------------------------------------------

    def _make_policies(self, state):
        k1 = self.game.num_actions(state, 1)
        k2 = self.game.num_actions(state, 2)
        if self.policy_factory is not None:
            return (self.policy_factory(state, 1, k1, self.rng),
                    self.policy_factory(state, 2, k2, self.rng)), k1, k2
        if self._roles is not None:
            if state == self._roles["I"]:
                # the first subgame entry expands the subgame node, which
                # installs its policies without stepping them
                solo = AlternatingSoloPolicy(self.gamma, self.rng, self.b0,
                                             warmup_visits=1)
                pair = (solo, make_policy("rm", k2, self.gamma, self.rng))
            elif state == self._roles["J"]:
                pair = (PairedPatternPolicy(1, self.gamma, self.rng, self.b0),
                        PairedPatternPolicy(2, self.gamma, self.rng, self.b0))
            else:
                raise ValueError(f"state {state} has no scripted role")
            return pair, k1, k2
        return (make_policy(self.policy, k1, self.gamma, self.rng),
                make_policy(self.policy, k2, self.gamma, self.rng)), k1, k2

    # -- search -------------------------------------------------------------

    def run_iteration(self):
        """One playout from the root; returns its payoff for player 1."""
        x = self._playout(self.game.root)
        self.iterations += 1
        return x

    def run(self, n):
        playout, root = self._playout, self.game.root
        for _ in range(n):
            playout(root)
        self.iterations += n

    def _playout(self, state):
        game = self.game
        kind = game.kind[state]
        if kind == TERMINAL:
            return game.util[state]
        if kind == CHANCE:
            child = game.chance_children[state][
                self._pick(game.chance_probs[state])]
            x = self._playout(child)
            stats = self.chance_stats.get(state)
            if stats is None:
                stats = self.chance_stats[state] = ChanceStats()
            stats.visits += 1
            stats.value_sum += x
            return x
        node = self.nodes.get(state)
        if node is None:
            x = self._rollout(state)
            (pol1, pol2), k1, k2 = self._make_policies(state)
            node = TreeNode(state, pol1, pol2, k1, k2)
            node.visits = 1
            node.value_sum = x
            self.nodes[state] = node
            return x
        p1 = node.pol1.probabilities()
        a1 = node.pol1.select()
        p2 = node.pol2.probabilities()
        a2 = node.pol2.select()
        child = game.child[state][a1][a2]
        x = self._playout(child)
        if self.averaged and game.kind[child] != TERMINAL:
            s = self._child_mean(child)
        else:
            s = x
        node.pol1.update(s)
        node.pol2.update(1.0 - s)
        node.upo1.record(a1, a2, s)
        node.upo2.record(a2, a1, 1.0 - s)
        node.joint_counts[a1][a2] += 1
        dist1, dist2 = node.dist1_sum, node.dist2_sum
        for i, p in enumerate(p1):
            dist1[i] += p
        for j, p in enumerate(p2):
            dist2[j] += p
        node.selections += 1
        node.visits += 1
        node.value_sum += x
        return x

    def _child_mean(self, child):
        # the child was visited inside this iteration, so its stats exist
        # and already include the current playout
        if self.game.kind[child] == CHANCE:
            return self.chance_stats[child].mean()
        return self.nodes[child].mean()

    def _rollout(self, state):
        game, rng = self.game, self.rng
        while True:
            kind = game.kind[state]
            if kind == TERMINAL:
                return game.util[state]
            if kind == CHANCE:
                state = game.chance_children[state][
                    self._pick(game.chance_probs[state])]
                continue
            a1 = rng.randrange(len(game.actions1[state]))
            a2 = rng.randrange(len(game.actions2[state]))
            state = game.child[state][a1][a2]

    def _pick(self, probs):
        u = self.rng.random()
        acc = 0.0
        for i, p in enumerate(probs):
            acc += p
            if u < acc:
                return i
        return len(probs) - 1

    # -- read-outs ----------------------------------------------------------

    def extract_strategy(self, flavor):
        """Per-state mixed strategies for both players.

        "empirical" normalizes the joint action counts, "average" takes the
        mean sampled distribution; the _noexplore forms strip the uniform
        gamma mixture from either.  States selected at least once carry
        data; everything else defaults to uniform.
        """
        if flavor not in FLAVORS:
            raise ValueError(f"unknown strategy flavor {flavor!r}")
        base, _, suffix = flavor.partition("_")
        strip = suffix == "noexplore"
        profile = StrategyProfile(default_uniform=True)
        for state, node in self.nodes.items():
            if node.selections == 0:
                continue
            for player in (1, 2):
                probs = (node.empirical(player) if base == "empirical"
                         else node.average(player))
                if strip:
                    probs = remove_exploration(probs, self.gamma)
                profile.set_probs(state, player, probs)
        return profile

    def root_mean(self):
        """Average root payoff over all playouts so far."""
        if self.game.kind[self.game.root] == CHANCE:
            stats = self.chance_stats.get(self.game.root)
        else:
            stats = self.nodes.get(self.game.root)
        return stats.mean() if stats is not None else 0.0

    def visit_counts(self):
        """Playout tallies per expanded inner state."""
        return {state: node.visits for state, node in self.nodes.items()}

    def root_upo_max(self):
        """Worst observation-bias gap at the root, over both players."""
        node = self.nodes.get(self.game.root)
        if node is None:
            return 0.0
        return max(node.upo1.metric(), node.upo2.metric())

    def upo_metric(self, state, player):
        node = self.nodes[state]
        return (node.upo1 if player == 1 else node.upo2).metric()

    def node_regret(self, state, player):
        node = self.nodes[state]
        return (node.upo1 if player == 1 else node.upo2).average_regret()
