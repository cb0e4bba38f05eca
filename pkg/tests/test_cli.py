"""End-to-end checks of the command-line surface."""

import pytest

from simove.cli import main
from simove.harness import checkpoint_grid, read_trace_csv


def test_run_writes_a_trace(tmp_path, capsys):
    out = tmp_path / "trace.csv"
    rc = main(["run", "--game", "random:B=2,D=1,seed=3", "--policy", "rm",
               "--gamma", "0.1", "--iters", "200", "--seeds", "0,1",
               "--out", str(out)])
    assert rc == 0
    flavors, rows = read_trace_csv(str(out))
    assert len(rows) == 2 * len(checkpoint_grid(200))
    assert {r.seed for r in rows} == {0, 1}
    text = capsys.readouterr().out
    assert str(out) in text
    assert "rows" in text


def test_run_flavor_subset(tmp_path):
    out = tmp_path / "trace.csv"
    rc = main(["run", "--game", "random:B=2,D=1,seed=3", "--policy", "exp3",
               "--gamma", "0.2", "--iters", "50", "--seeds", "7",
               "--flavors", "empirical,average", "--out", str(out)])
    assert rc == 0
    flavors, rows = read_trace_csv(str(out))
    assert flavors == ("empirical", "average")


def test_solve_prints_root_value(capsys):
    rc = main(["solve", "--game", "counterexample"])
    assert rc == 0
    text = capsys.readouterr().out
    assert "0.5" in text


def test_bound_prints_t0_and_constants(capsys):
    rc = main(["bound", "--b", "2", "--D", "2", "--gamma", "0.1",
               "--eps", "0.1", "--H", "3", "--Ta", "1000", "--delta", "0.01"])
    assert rc == 0
    text = capsys.readouterr().out
    assert "4436141.9" in text
    assert "12" in text and "20" in text  # eventual-distance constants


def test_errors_surface_as_exit_code(capsys):
    rc = main(["bound", "--b", "2", "--D", "2", "--gamma", "0.1",
               "--eps", "0.1", "--H", "1", "--Ta", "1000"])
    assert rc == 2
    assert "error" in capsys.readouterr().err
    rc = main(["solve", "--game", "parcheesi"])
    assert rc == 2
    rc = main(["run", "--game", "counterexample", "--policy", "cex",
               "--gamma", "0.05", "--iters", "100", "--seeds", "0",
               "--engine", "fast", "--out", "/tmp/unused.csv"])
    assert rc == 2
