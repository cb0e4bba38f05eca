"""Command line entry points.

Three subcommands: ``run`` executes a checkpointed experiment and writes a
trace CSV, ``solve`` prints a game's exact value and root equilibrium, and
``bound`` evaluates the finite-time guarantee calculator.
"""

from __future__ import annotations

import argparse
import sys

from .core import INNER
from .harness import (
    ExperimentConfig,
    bound_report,
    run_experiment,
    solved_game,
)
from .mcts import BANDIT_POLICIES, FLAVORS, SCRIPTED_POLICY, VARIANTS


def _parse_ints(text):
    return tuple(int(x) for x in text.split(",") if x != "")


def _parse_flavors(text):
    return tuple(x.strip() for x in text.split(",") if x.strip())


def _cmd_run(args):
    cfg = ExperimentConfig(
        game=args.game, variant=args.variant, policy=args.policy,
        gamma=args.gamma, iterations=args.iters,
        seeds=_parse_ints(args.seeds), out=args.out,
        flavors=_parse_flavors(args.flavors), engine=args.engine, b0=args.b0)
    result = run_experiment(cfg)
    print(f"wrote {len(result.rows)} rows to {cfg.out} "
          f"(engine: {result.engine_used})")
    last = result.rows[-1].iteration
    finals = [r for r in result.rows if r.iteration == last]
    print(f"mean exploitability sum at iteration {last}:")
    for flavor in cfg.flavors:
        mean = sum(sum(r.expl[flavor]) for r in finals) / len(finals)
        print(f"  {flavor}: {mean:.6f}")
    return 0


def _cmd_solve(args):
    game, solved = solved_game(args.game)
    print(f"game: {args.game} ({game.n_states} states, "
          f"depth {game.max_depth()})")
    print(f"value: {solved.root_value!r}")
    root = game.root
    if game.kind[root] == INNER:
        p1 = ", ".join(f"{p:.6f}" for p in solved.row_strategies[root])
        p2 = ", ".join(f"{p:.6f}" for p in solved.col_strategies[root])
        print(f"root strategy p1: [{p1}]")
        print(f"root strategy p2: [{p2}]")
    return 0


def _cmd_bound(args):
    rep = bound_report(b=args.b, depth=args.D, gamma=args.gamma,
                       eps=args.eps, n_states=args.H, t_a=args.Ta,
                       delta=args.delta)
    print(f"T0 = {rep.t0!r}")
    if rep.failure_mass is None:
        confidence = "1 - (2|H| + D) * delta"
    else:
        confidence = f"{1.0 - rep.failure_mass:g}"
    print(f"guarantee: empirical frequencies form a {rep.guarantee_eps:g}-"
          f"equilibrium with probability >= {confidence}")
    print(f"eventual-distance constants: averaged {rep.constant_averaged:g}, "
          f"plain {rep.constant_plain:g}")
    return 0


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="simove",
        description="Simultaneous-move MCTS experiments with exact "
                    "game-theoretic evaluation.")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a checkpointed experiment")
    run_p.add_argument("--game", required=True,
                       help="game spec, e.g. goofspiel:d=4 or counterexample")
    run_p.add_argument("--variant", default="smmcts", choices=VARIANTS)
    run_p.add_argument("--policy", default="rm",
                       choices=BANDIT_POLICIES + (SCRIPTED_POLICY,))
    run_p.add_argument("--gamma", type=float, default=0.1,
                       help="exploration rate (the scripted counterexample "
                            "policy reads this as its epsilon)")
    run_p.add_argument("--iters", type=int, default=10_000)
    run_p.add_argument("--seeds", default="0", help="comma-separated ints")
    run_p.add_argument("--out", required=True, help="trace CSV path")
    run_p.add_argument("--flavors", default=",".join(FLAVORS))
    run_p.add_argument("--engine", default="auto",
                       choices=("auto", "reference", "fast"))
    run_p.add_argument("--b0", type=int, default=1000,
                       help="initial buffer length of the scripted policies")
    run_p.set_defaults(func=_cmd_run)

    solve_p = sub.add_parser("solve", help="print exact value and root "
                                           "equilibrium of a game")
    solve_p.add_argument("--game", required=True)
    solve_p.set_defaults(func=_cmd_solve)

    bound_p = sub.add_parser("bound", help="evaluate the finite-time "
                                           "guarantee")
    bound_p.add_argument("--b", type=int, required=True,
                         help="largest per-player action count at any node")
    bound_p.add_argument("--D", type=int, required=True, help="game depth")
    bound_p.add_argument("--gamma", type=float, required=True)
    bound_p.add_argument("--eps", type=float, required=True)
    bound_p.add_argument("--H", type=int, required=True,
                         help="number of game nodes")
    bound_p.add_argument("--Ta", type=float, required=True,
                         help="per-node consistency horizon")
    bound_p.add_argument("--delta", type=float, default=None)
    bound_p.set_defaults(func=_cmd_bound)
    return parser


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
