"""Tour improvement by 2-opt and 3-opt exchanges over candidate lists.

Both operators are first-improvement searches driven by don't-look bits,
finished by a full verification sweep so the returned tour is a true
fixpoint of the candidate-restricted move set: feeding the result back in
returns it unchanged. Pure functions over (instance, tour); safe to call
concurrently on separate data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .instance import Instance, Tour


@dataclass
class LocalSearchConfig:
    kind: str = "2opt"  # none | 2opt | 3opt
    use_dont_look_bits: bool = True
    candidate_k: int = 20  # governed by the instance's nn_lists

    def __post_init__(self):
        if self.kind not in ("none", "2opt", "3opt"):
            raise ValueError(f"unknown local search kind {self.kind!r}")
        if self.kind != "none" and self.candidate_k < 2:
            raise ValueError("candidate_k must be >= 2 for 2opt/3opt")


def _active_mask(inst: Instance, active) -> np.ndarray:
    if active is None:
        return np.ones(inst.n, dtype=np.bool_)
    mask = np.asarray(active, dtype=np.bool_)
    if mask.shape != (inst.n,):
        raise ValueError("active mask must have one flag per city")
    return mask


def improve_order(inst: Instance, order: np.ndarray, kind: str, active=None, use_dlb=True) -> int:
    """Improve ``order`` in place; returns the new length."""
    mask = _active_mask(inst, active)
    if kind == "2opt":
        return int(_kernels.two_opt(inst.coords, inst.nn_lists, order, mask, use_dlb))
    if kind == "3opt":
        if inst.n < 5:
            return int(_kernels.two_opt(inst.coords, inst.nn_lists, order, mask, use_dlb))
        return int(_kernels.three_opt(inst.coords, inst.nn_lists, order, mask, use_dlb))
    raise ValueError(f"unknown local search kind {kind!r}")


def two_opt(inst: Instance, tour: Tour, active=None, use_dlb=True) -> Tour:
    """2-exchange descent; the result admits no improving candidate move."""
    order = tour.order.copy()
    length = improve_order(inst, order, "2opt", active, use_dlb)
    return Tour(order, length)


def three_opt(inst: Instance, tour: Tour, active=None, use_dlb=True) -> Tour:
    """3-exchange descent (2-exchanges included); falls back to two_opt
    below five cities, where no proper 3-exchange exists."""
    order = tour.order.copy()
    length = improve_order(inst, order, "3opt", active, use_dlb)
    return Tour(order, length)
