"""City movement inside a ring neighborhood, with consistent instance repair.

Once per cycle a uniformly chosen city jumps to a random point of the
annulus centered at its old position (outer radius ``rad``, inner radius
``rad/3``). The move is generated on one side (the master, or the serial
runner) and replayed everywhere else from the broadcast record, so all
instance copies stay bit-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .instance import Instance, Tour

INNER_RATIO = 1.0 / 3.0


@dataclass
class DynamicsConfig:
    enabled: bool = True
    interval_mod: int = 100  # iterations per cycle; a move starts each cycle
    rad: float | None = None  # outer radius; None derives it from the instance
    inner_ratio: float = INNER_RATIO
    rng_seed: int = 0

    def __post_init__(self):
        if self.interval_mod < 4:
            raise ValueError("interval_mod must be >= 4")
        if self.rad is not None and self.rad <= 0:
            raise ValueError("rad must be positive")


@dataclass(frozen=True)
class CityMove:
    cycle_index: int
    city: int
    old_pos: tuple[float, float]
    new_pos: tuple[float, float]

    def log_line(self) -> str:
        ox, oy = self.old_pos
        nx, ny = self.new_pos
        return f"{self.cycle_index},{self.city},{ox!r},{oy!r},{nx!r},{ny!r}"

    @classmethod
    def from_log_line(cls, line: str) -> "CityMove":
        cycle, city, ox, oy, nx, ny = line.strip().split(",")
        return cls(int(cycle), int(city), (float(ox), float(oy)), (float(nx), float(ny)))


def compute_rad(inst: Instance) -> float:
    """Outer move radius: 10% of the mean of the coordinate ranges.

    Derived once from the coordinates the instance was built with (bbox is
    frozen), so the perturbation magnitude stays stationary even after
    cities drift outside the original box.
    """
    x_min, x_max, y_min, y_max = inst.bbox
    x_span = x_max - x_min
    y_span = y_max - y_min
    if x_span == 0 and y_span == 0:
        raise ValueError("degenerate instance: all cities coincide")
    return 0.1 * (x_span + y_span) / 2.0


def sample_ring_point(center, rad, rng, inner_ratio=INNER_RATIO):
    """Area-uniform point of the annulus around ``center``.

    Draw order is fixed (angle, then radius) so a given stream always yields
    the same move sequence.
    """
    if rad <= 0:
        raise ValueError("rad must be positive")
    theta = rng.random() * 2.0 * math.pi
    u = rng.random()
    r_in = inner_ratio * rad
    r = math.sqrt(u * (rad * rad - r_in * r_in) + r_in * r_in)
    return (center[0] + r * math.cos(theta), center[1] + r * math.sin(theta))


def perturb_instance(inst: Instance, cfg: DynamicsConfig, cycle: int, rng) -> CityMove:
    """Move one random city inside its ring; repairs candidate lists.

    Master-side only: consumes the move stream. Returns the record to
    broadcast and log.
    """
    rad = cfg.rad if cfg.rad is not None else compute_rad(inst)
    city = int(rng.integers(0, inst.n))
    old = (float(inst.coords[city, 0]), float(inst.coords[city, 1]))
    new = sample_ring_point(old, rad, rng, cfg.inner_ratio)
    move = CityMove(cycle_index=cycle, city=city, old_pos=old, new_pos=new)
    inst._move_city(city, new[0], new[1])
    inst.last_move_cycle = cycle
    return move


def apply_move(inst: Instance, move: CityMove) -> bool:
    """Replay a broadcast move on a private instance copy.

    Stale records (cycle index at or below the last applied one) are
    ignored, which also makes re-delivery of the same move a no-op. Returns
    whether the move was applied.
    """
    if not 0 <= move.city < inst.n:
        raise ValueError(f"move references city {move.city} outside 0..{inst.n - 1}")
    if move.cycle_index <= inst.last_move_cycle:
        return False
    inst._move_city(move.city, move.new_pos[0], move.new_pos[1])
    inst.last_move_cycle = move.cycle_index
    return True


def reevaluate_tour(inst: Instance, tour: Tour) -> Tour:
    """Same order, length recomputed under the current coordinates."""
    from .instance import tour_length

    return Tour(tour.order, tour_length(inst, tour.order))


def affected_cities(inst: Instance) -> np.ndarray:
    """Cities whose local-search neighborhood the last applied move touched:
    the moved city, its former and current candidates, and every list it
    left or entered. Use it to seed don't-look bits when re-polishing an
    existing tour after a move instead of re-scanning the whole instance."""
    if inst.last_move_affected is None:
        return np.arange(inst.n, dtype=np.int64)
    return inst.last_move_affected
