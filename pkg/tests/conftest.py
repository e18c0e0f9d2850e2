import pathlib

import numpy as np
import pytest

from pacorn.instance import Instance

DATA_DIR = pathlib.Path(__file__).resolve().parent.parent / "data"


@pytest.fixture
def triangle():
    # 3-4-5 right triangle: d(0,1)=3, d(0,2)=4, d(1,2)=5
    return Instance("triangle", np.array([[0.0, 0.0], [0.0, 3.0], [4.0, 0.0]]))


@pytest.fixture
def unit_square():
    return Instance("square", np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]))


def naive_tour_length(inst, order):
    """Independent oracle: plain pairwise sum with explicit rounding."""
    import math

    total = 0
    n = len(order)
    for i in range(n):
        a = inst.coords[order[i]]
        b = inst.coords[order[(i + 1) % n]]
        total += int(math.sqrt((a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2) + 0.5)
    return total
