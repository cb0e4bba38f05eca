"""Experiment harness: configuration, checkpointed runs, CSV traces, and
the finite-time guarantee calculator.

A run takes a textual game spec, solves the game exactly once, then plays
the configured search variant for every seed, pausing at each checkpoint to
extract strategies in the requested flavors and score them against the
exact solution.  Rows stream into one CSV whose bytes depend only on the
configuration (the wall-time column excepted), so traces diff cleanly
across machines and reruns.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

from .core import compute_subgame_values, exploitability_pair
from .fastengine import FastSearch, compile_game
from .games import parse_game_spec
from .mcts import (
    BANDIT_POLICIES,
    FLAVORS,
    SCRIPTED_POLICY,
    SearchTree,
    VARIANTS,
)

# exact evaluation solves one matrix game per inner state; above this size
# that is no longer a sane interactive operation
MAX_GROUND_TRUTH_STATES = 50_000

# minimum playouts through a node before its read-outs count as settled
HOT_NODE_VISITS = 100_000

_ENGINES = ("auto", "reference", "fast")

# games and their exact solutions, keyed by spec string; read-only after
# first construction so all runs of a session share one solve
_GAME_CACHE: Dict[str, tuple] = {}


@dataclass
class ExperimentConfig:
    game: str
    variant: str = "smmcts"
    policy: str = "rm"
    gamma: float = 0.1
    iterations: int = 10_000
    seeds: Tuple[int, ...] = (0,)
    out: Optional[str] = None
    flavors: Tuple[str, ...] = FLAVORS
    checkpoints: Optional[Tuple[int, ...]] = None
    engine: str = "auto"
    b0: int = 1000


@dataclass
class TraceRow:
    exp_id: str
    game: str
    variant: str
    policy: str
    gamma: float
    seed: int
    iteration: int
    expl: Dict[str, Tuple[float, float]]
    g_root: float
    upo_root_max: float
    wall_ms: float


@dataclass
class SeedSummary:
    seed: int
    iterations: int
    strategy_gap_hot: float
    strategy_gap_all: float
    hot_nodes: int
    node_strategies: Optional[dict] = None
    node_regrets: Optional[dict] = None


@dataclass
class RunResult:
    config: ExperimentConfig
    game: object
    solved: object
    engine_used: str
    rows: list = field(default_factory=list)
    summaries: list = field(default_factory=list)


def checkpoint_grid(total, per_decade=20):
    """Log-spaced checkpoints from iteration 10 through total.

    per_decade points per factor of ten, rounded to integers and
    deduplicated; the final iteration is always included."""
    if total < 1:
        raise ValueError("total iterations must be at least 1")
    pts = set()
    e = per_decade
    while True:
        v = round(10 ** (e / per_decade))
        if v > total:
            break
        pts.add(v)
        e += 1
    pts.add(total)
    return tuple(sorted(pts))


def csv_header(flavors):
    cols = ["exp_id", "game", "variant", "policy", "gamma", "seed",
            "iteration"]
    for flavor in flavors:
        cols.append(f"expl1_{flavor}")
        cols.append(f"expl2_{flavor}")
    cols += ["g_root", "upo_root_max", "wall_ms"]
    return cols


def _csv_values(row, flavors):
    vals = [row.exp_id, row.game, row.variant, row.policy,
            repr(float(row.gamma)), str(row.seed), str(row.iteration)]
    for flavor in flavors:
        e1, e2 = row.expl[flavor]
        vals.append(repr(float(e1)))
        vals.append(repr(float(e2)))
    vals += [repr(float(row.g_root)), repr(float(row.upo_root_max)),
             repr(float(row.wall_ms))]
    return vals


def write_trace_csv(path, rows, flavors):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(csv_header(flavors))
        for row in rows:
            writer.writerow(_csv_values(row, flavors))


def read_trace_csv(path):
    """Parse a trace back into (flavors, rows); inverse of the writer."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        flavor_cols = header[7:-3]
        flavors = tuple(c[len("expl1_"):] for c in flavor_cols[0::2])
        if header != csv_header(flavors):
            raise ValueError("unrecognized trace header")
        rows = []
        for rec in reader:
            expl = {}
            for i, flavor in enumerate(flavors):
                expl[flavor] = (float(rec[7 + 2 * i]), float(rec[8 + 2 * i]))
            rows.append(TraceRow(
                exp_id=rec[0], game=rec[1], variant=rec[2], policy=rec[3],
                gamma=float(rec[4]), seed=int(rec[5]), iteration=int(rec[6]),
                expl=expl, g_root=float(rec[-3]),
                upo_root_max=float(rec[-2]), wall_ms=float(rec[-1])))
    return flavors, rows


def solved_game(spec):
    """Game plus exact solution for a spec string, cached per session."""
    hit = _GAME_CACHE.get(spec)
    if hit is not None:
        return hit
    game = parse_game_spec(spec)
    if game.n_states > MAX_GROUND_TRUTH_STATES:
        raise RuntimeError(
            f"ground truth unavailable: {game.n_states} states exceed the "
            f"exact-evaluation limit of {MAX_GROUND_TRUTH_STATES}")
    solved = compute_subgame_values(game)
    _GAME_CACHE[spec] = (game, solved)
    return game, solved


def _resolve_engine(cfg):
    if cfg.engine not in _ENGINES:
        raise ValueError(f"unknown engine {cfg.engine!r}")
    fast_capable = cfg.policy in BANDIT_POLICIES
    if cfg.engine == "fast":
        if not fast_capable:
            raise ValueError(
                f"policy {cfg.policy!r} requires the reference engine")
        return "fast"
    if cfg.engine == "reference":
        return "reference"
    return "fast" if fast_capable else "reference"


def _validate(cfg):
    if cfg.variant not in VARIANTS:
        raise ValueError(f"unknown search variant {cfg.variant!r}")
    if cfg.policy not in BANDIT_POLICIES and cfg.policy != SCRIPTED_POLICY:
        raise ValueError(f"unknown policy {cfg.policy!r}")
    if cfg.iterations < 1:
        raise ValueError("iterations must be at least 1")
    if not cfg.seeds:
        raise ValueError("at least one seed is required")
    if not cfg.flavors:
        raise ValueError("at least one evaluation flavor is required")
    for flavor in cfg.flavors:
        if flavor not in FLAVORS:
            raise ValueError(f"unknown strategy flavor {flavor!r}")
    if cfg.checkpoints is not None:
        cps = tuple(cfg.checkpoints)
        if not cps or list(cps) != sorted(set(cps)):
            raise ValueError("checkpoints must be strictly increasing")
        if cps[0] < 1 or cps[-1] > cfg.iterations:
            raise ValueError("checkpoints must lie within [1, iterations]")


def run_experiment(cfg: ExperimentConfig) -> RunResult:
    """Run every seed, score at every checkpoint, optionally write the CSV."""
    _validate(cfg)
    engine_used = _resolve_engine(cfg)
    game, solved = solved_game(cfg.game)
    checkpoints = (tuple(cfg.checkpoints) if cfg.checkpoints is not None
                   else checkpoint_grid(cfg.iterations))
    compiled = compile_game(game) if engine_used == "fast" else None
    exp_id = "|".join((cfg.game, cfg.variant, cfg.policy,
                       repr(float(cfg.gamma))))
    result = RunResult(cfg, game, solved, engine_used)
    for seed in cfg.seeds:
        rows, summary = _run_seed(cfg, game, solved, compiled, engine_used,
                                  seed, checkpoints, exp_id)
        result.rows.extend(rows)
        result.summaries.append(summary)
    if cfg.out is not None:
        write_trace_csv(cfg.out, result.rows, cfg.flavors)
    return result


def _run_seed(cfg, game, solved, compiled, engine_used, seed, checkpoints,
              exp_id):
    if engine_used == "fast":
        engine = FastSearch(game, cfg.variant, cfg.policy, cfg.gamma, seed,
                            compiled=compiled)
    else:
        engine = SearchTree(game, cfg.variant, cfg.policy, cfg.gamma, seed,
                            b0=cfg.b0)
    rows = []
    done = 0
    start = time.perf_counter()
    for cp in checkpoints:
        engine.run(cp - done)
        done = cp
        expl = {}
        for flavor in cfg.flavors:
            profile = engine.extract_strategy(flavor)
            expl[flavor] = exploitability_pair(game, solved, profile)
        wall_ms = (time.perf_counter() - start) * 1000.0
        rows.append(TraceRow(exp_id, cfg.game, cfg.variant, cfg.policy,
                             cfg.gamma, seed, cp, expl, engine.root_mean(),
                             engine.root_upo_max(), wall_ms))
    if done < cfg.iterations:
        engine.run(cfg.iterations - done)
    return rows, _summarize(cfg, game, engine, seed)


def _summarize(cfg, game, engine, seed):
    emp = engine.extract_strategy("empirical")
    avg = engine.extract_strategy("average")
    gap_all = 0.0
    gap_hot = 0.0
    hot = 0
    for s, visits in engine.visit_counts().items():
        if visits < 2:
            continue
        gap = 0.0
        for player in (1, 2):
            for a, b in zip(emp.probs(game, s, player),
                            avg.probs(game, s, player)):
                gap = max(gap, abs(a - b))
        gap_all = max(gap_all, gap)
        if visits >= HOT_NODE_VISITS:
            hot += 1
            gap_hot = max(gap_hot, gap)
    summary = SeedSummary(seed, cfg.iterations, gap_hot, gap_all, hot)
    if cfg.policy == SCRIPTED_POLICY:
        summary.node_strategies = {}
        summary.node_regrets = {}
        for s in engine.nodes:
            summary.node_strategies[s] = (emp.probs(game, s, 1),
                                          emp.probs(game, s, 2))
            summary.node_regrets[s] = (engine.node_regret(s, 1),
                                       engine.node_regret(s, 2))
    return summary


# ---------------------------------------------------------------------------
# Finite-time guarantee calculator
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundReport:
    t0: float
    guarantee_eps: float
    failure_mass: Optional[float]
    constant_averaged: float
    constant_plain: float


def finite_time_bound(b, depth, gamma, eps, n_states, t_a):
    """Iterations after which the empirical frequencies of the averaged
    search form an approximate equilibrium.

    b is the largest per-player action count at any node, depth the number
    of simultaneous decisions on the longest line of play, n_states the
    node count of the game, gamma the exploration rate and eps the
    per-node consistency level reached within t_a steps."""
    if n_states < 2:
        raise ValueError("the game needs at least 2 nodes")
    if b < 2:
        raise ValueError("branching must be at least 2")
    if depth < 1:
        raise ValueError("depth must be at least 1")
    if not (0.0 < eps < 1.0):
        raise ValueError("eps must lie in (0, 1)")
    if not (0.0 < gamma < 1.0):
        raise ValueError("gamma must lie in (0, 1)")
    if t_a <= 0.0:
        raise ValueError("t_a must be positive")
    return (16.0 ** (depth - 1)
            * eps ** (-(depth - 1))
            * (b / gamma) ** (depth * (depth - 1) / 2)
            * math.log(2 * n_states - 2)
            * t_a)


def bound_report(b, depth, gamma, eps, n_states, t_a, delta=None):
    """finite_time_bound plus the guarantee it buys.

    The empirical frequencies form a (guarantee_eps)-equilibrium with
    probability at least 1 - failure_mass; the eventual-distance constants
    for the two search variants are reported alongside."""
    t0 = finite_time_bound(b, depth, gamma, eps, n_states, t_a)
    return BoundReport(
        t0=t0,
        guarantee_eps=4.0 * depth * (depth + 1) * eps,
        failure_mass=None if delta is None
        else (2.0 * n_states + depth) * delta,
        constant_averaged=2.0 * depth * (depth + 1),
        constant_plain=12.0 * (2.0 ** depth - 1.0) - 8.0 * depth)
