#!/usr/bin/env python3
"""Render figures from harness trace CSVs.

Three figure kinds, all with log-scaled iteration axes:

- ``convergence``: mean exploitability sum per group over checkpoints.
- ``upo``: for each checkpoint x, the maximum of the root payoff-bias
  metric from x to the end of the run, pooled over the group's runs.
- ``removal``: mean exploitability sum of the averaged strategy next to
  its exploration-removed version, one curve pair per group.

Besides the image (SVG plus a PNG sibling) every render writes the plotted
points to ``<out>.curves.csv``; identical inputs reproduce that file and the
SVG byte for byte.  Inputs are never modified.  Schema problems and empty
inputs abort before any output file is created.
"""

import argparse
import csv
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "simove-plots"
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

KINDS = ("convergence", "upo", "removal")
DEFAULT_FLAVOR = "average_noexplore"
REMOVAL_PAIR = (("average", "explore kept"),
                ("average_noexplore", "explore removed"))


@dataclass
class FigureSpec:
    inputs: List[str]
    kind: str
    group_cols: List[str]
    out: str
    flavor: str = DEFAULT_FLAVOR

    def metric_columns(self) -> List[str]:
        if self.kind == "convergence":
            return [f"expl1_{self.flavor}", f"expl2_{self.flavor}"]
        if self.kind == "upo":
            return ["upo_root_max"]
        return [f"expl{p}_{fl}" for fl, _ in REMOVAL_PAIR for p in (1, 2)]


@dataclass
class Curve:
    label: str
    xs: List[int] = field(default_factory=list)
    ys: List[float] = field(default_factory=list)


def load_rows(paths: Sequence[str], needed: Sequence[str]):
    """Read and pool the input CSVs, checking each header up front."""
    rows = []
    for path in paths:
        if not Path(path).exists():
            raise ValueError(f"input not found: {path}")
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            missing = [c for c in needed if c not in header]
            if missing:
                raise ValueError(
                    f"schema mismatch in {path}: missing column(s) "
                    + ", ".join(missing))
            rows.extend(reader)
    return rows


def group_key(row, cols) -> Tuple[str, ...]:
    return tuple(row[c] for c in cols)


def group_label(cols, key) -> str:
    return ", ".join(f"{c}={v}" for c, v in zip(cols, key))


def mean_curve(rows, label, value) -> Curve:
    per_x: Dict[int, List[float]] = {}
    for row in rows:
        per_x.setdefault(int(row["iteration"]), []).append(value(row))
    curve = Curve(label)
    for x in sorted(per_x):
        curve.xs.append(x)
        curve.ys.append(sum(per_x[x]) / len(per_x[x]))
    return curve


def tail_max_curve(rows, label, value) -> Curve:
    """y(x) is the largest metric seen at any checkpoint >= x in the group."""
    per_x: Dict[int, float] = {}
    for row in rows:
        x = int(row["iteration"])
        per_x[x] = max(per_x.get(x, -math.inf), value(row))
    curve = Curve(label, xs=sorted(per_x))
    running = -math.inf
    for x in reversed(curve.xs):
        running = max(running, per_x[x])
        curve.ys.append(running)
    curve.ys.reverse()
    return curve


def build_curves(spec: FigureSpec, rows) -> List[Curve]:
    grouped: Dict[Tuple[str, ...], list] = {}
    for row in rows:
        grouped.setdefault(group_key(row, spec.group_cols), []).append(row)
    if not grouped:
        raise ValueError("no data rows after grouping; nothing to plot")
    curves = []
    for key in sorted(grouped):
        label = group_label(spec.group_cols, key)
        members = grouped[key]
        if spec.kind == "convergence":
            fl = spec.flavor
            curves.append(mean_curve(
                members, label,
                lambda r, fl=fl: (float(r[f"expl1_{fl}"])
                                  + float(r[f"expl2_{fl}"]))))
        elif spec.kind == "upo":
            curves.append(tail_max_curve(
                members, label, lambda r: float(r["upo_root_max"])))
        else:
            for fl, tag in REMOVAL_PAIR:
                curves.append(mean_curve(
                    members, f"{label} [{tag}]",
                    lambda r, fl=fl: (float(r[f"expl1_{fl}"])
                                      + float(r[f"expl2_{fl}"]))))
    return curves


Y_LABELS = {"convergence": "exploitability sum",
            "upo": "payoff-bias tail max",
            "removal": "exploitability sum"}


def render(spec: FigureSpec, curves: List[Curve]) -> List[str]:
    out = Path(spec.out)
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for curve in curves:
        ax.plot(curve.xs, curve.ys, label=curve.label)
    ax.set_xscale("log")
    ax.set_xlabel("iterations")
    ax.set_ylabel(Y_LABELS[spec.kind])
    ax.legend(fontsize=8)
    fig.tight_layout()
    svg = out.with_suffix(".svg")
    png = out.with_suffix(".png")
    fig.savefig(svg, format="svg", metadata={"Date": None})
    fig.savefig(png, format="png")
    plt.close(fig)

    sidecar = out.with_suffix(out.suffix + ".curves.csv")
    with open(sidecar, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["curve", "iteration", "value"])
        for curve in curves:
            for x, y in zip(curve.xs, curve.ys):
                writer.writerow([curve.label, x, repr(float(y))])
    return [str(svg), str(png), str(sidecar)]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="plot.py", description="render figures from trace CSVs")
    parser.add_argument("--kind", required=True, choices=KINDS)
    parser.add_argument("--in", dest="inputs", required=True,
                        action="append", help="trace CSV (repeatable)")
    parser.add_argument("--group", default="gamma",
                        help="comma-separated grouping columns")
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--flavor", default=DEFAULT_FLAVOR,
                        help="strategy flavor for the convergence kind")
    args = parser.parse_args(argv)

    spec = FigureSpec(inputs=args.inputs, kind=args.kind,
                      group_cols=[c for c in args.group.split(",") if c],
                      out=args.out, flavor=args.flavor)
    try:
        if not spec.group_cols:
            raise ValueError("empty group set; pass at least one column")
        needed = (["iteration"] + spec.group_cols + spec.metric_columns())
        rows = load_rows(spec.inputs, needed)
        curves = build_curves(spec, rows)
        written = render(spec, curves)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {', '.join(written)} ({len(curves)} curves)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
