#!/usr/bin/env python3
"""Singular spectra of canonical bar constructs and how the nullity reacts to the threshold.

A construct is consistent when exactly one singular value falls below the
threshold; this prints every spectrum so the gap can be inspected.
"""

from __future__ import annotations

import argparse

import numpy as np

from hpgo.feasibility import analyze, bars_from_pairs, build_feasibility_matrix

SQUARE = [[0, 0, 0], [4, 0, 0], [4, 3, 0], [0, 3, 0]]
CYCLE4 = [(0, 1), (1, 2), (2, 3), (3, 0)]
CONSTRUCTS = {
    "self-loop": ([[0, 0, 0]], [(0, 0)]),
    "double-bar": ([[0, 0, 0], [2, 1, 0]], [(0, 1), (1, 0)]),
    "triangle": ([[0, 0, 0], [4, 0, 0], [2, 3, 0]], [(0, 1), (1, 2), (2, 0)]),
    "collinear": ([[0, 0, 0], [1, 0, 0], [3, 0, 0]], [(0, 1), (1, 2), (2, 0)]),
    "quadrilateral": (SQUARE, CYCLE4),
    "quad+diagonal": (SQUARE, CYCLE4 + [(0, 2)]),
    "tetra-cycle": ([[0, 0, 0], [4, 0, 0], [4, 3, 0], [1, 2, 5]], CYCLE4),
    "5-cycle": ([[0, 0, 0], [4, 0, 0], [5, 3, 1], [1, 4, 3], [-1, 2, 5]],
                [(k, (k + 1) % 5) for k in range(5)]),
}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--lift", type=float, default=0.0,
                    help="out-of-plane offset added to the quadrilateral's third corner")
    args = ap.parse_args(argv)
    thresholds = (1e-12, 1e-10, 1e-8, 1e-6, 1e-4)
    print(f"{'construct':<15} " + " ".join(f"{t:>7.0e}" for t in thresholds) + "  spectrum/max")
    for name, (pos, pairs) in CONSTRUCTS.items():
        pos = np.array(pos, dtype=float)
        if name.startswith("quad") and args.lift:
            pos[2, 2] += args.lift
        nodes, bars = bars_from_pairs(pos, pairs)
        fm = build_feasibility_matrix(nodes, bars)
        nulls = [analyze(fm, t).nullity for t in thresholds]
        sv = analyze(fm).singular_values
        rel = sv / sv[0]
        print(f"{name:<15} " + " ".join(f"{n:>7d}" for n in nulls) + "  "
              + " ".join(f"{x:.1e}" for x in rel[-4:]))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
