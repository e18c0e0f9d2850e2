"""Regenerate the shipped benchmark instances and their optima file.

Both instances have optima that are provable by construction:

* circle52 -- 52 points on a circle. Points in convex position admit exactly
  one crossing-free tour, the hull order, which is therefore optimal; the
  circle is large enough (adjacent chords ~1208 apart in length from the
  next chord level) that integer rounding (at most 0.5 per edge, 52 total)
  cannot overturn that.
* grid600 -- a 24 x 25 point grid with spacing 10. Distinct grid points are
  at least 10 apart, so every 600-edge tour is >= 6000; a serpentine
  Hamiltonian cycle of unit (length-10) steps achieves it.

Run from the repository root: python3 scripts/make_instances.py
"""

import json
import math
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

import numpy as np

from pacorn.instance import Instance, parse_tsplib, tour_length

DATA = os.path.join(os.path.dirname(__file__), "..", "data")


def make_circle(n=52, radius=10000.0, center=(12000.0, 12000.0)):
    coords = np.empty((n, 2))
    for i in range(n):
        angle = 2.0 * math.pi * i / n
        coords[i, 0] = center[0] + radius * math.cos(angle)
        coords[i, 1] = center[1] + radius * math.sin(angle)
    inst = Instance(f"circle{n}", coords)
    optimum = tour_length(inst, np.arange(n))
    return inst, optimum


def make_grid(cols=24, rows=25, spacing=10.0, origin=(100.0, 100.0)):
    assert cols % 2 == 0, "the serpentine cycle below needs an even column count"
    n = cols * rows
    coords = np.empty((n, 2))
    for x in range(cols):
        for y in range(rows):
            coords[x * rows + y, 0] = origin[0] + spacing * x
            coords[x * rows + y, 1] = origin[1] + spacing * y
    inst = Instance(f"grid{n}", coords)

    # serpentine Hamiltonian cycle of unit steps: bottom row left-to-right,
    # then each column over rows 1..rows-1, right-to-left, alternating
    # direction; ends at (0, 1), one step above the start (0, 0).
    cycle = [x * rows for x in range(cols)]
    for back, x in enumerate(range(cols - 1, -1, -1)):
        ys = range(1, rows) if back % 2 == 0 else range(rows - 1, 0, -1)
        cycle.extend(x * rows + y for y in ys)
    order = np.array(cycle)
    length = tour_length(inst, order)
    assert length == n * int(spacing), f"serpentine cycle length {length} != {n * int(spacing)}"
    return inst, length


def main():
    os.makedirs(DATA, exist_ok=True)
    optima = {}
    for inst, optimum in (make_circle(), make_grid()):
        path = os.path.join(DATA, f"{inst.name}.tsp")
        text = inst.to_tsplib()
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
        reparsed = parse_tsplib(text)
        assert np.array_equal(reparsed.coords, inst.coords), "round-trip mismatch"
        optima[inst.name] = int(optimum)
        print(f"{path}: n={inst.n} optimum={optimum}")
    with open(os.path.join(DATA, "optima.json"), "w", encoding="utf-8") as fh:
        json.dump(optima, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print("optima:", optima)


if __name__ == "__main__":
    main()
