"""Pheromone-trail management and probabilistic tour construction.

Two update variants are implemented: the classic all-ants rule ("as") and
the bounded-trail single-depositor rule ("mmas"). The engine runs one colony
on one instance; concurrent colonies each own their engine, instance copy and
random stream.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels, local_search
from .instance import Instance, Tour

VARIANTS = ("as", "mmas")
DEPOSIT_RULES = ("ib", "bs", "schedule")
LOCAL_SEARCH_KINDS = ("none", "2opt", "3opt")


@dataclass
class ColonyParams:
    alpha: float = 1.0
    beta: float = 5.0
    rho: float = 0.2
    n_ants: int = 50
    candidate_k: int = 20
    local_search: str = "2opt"
    deposit_rule: str = "schedule"
    bs_period: int = 25
    restart_threshold: int = 250
    seed: int = 0
    variant: str = "mmas"
    tau_min_divisor: float = 2.0

    def __post_init__(self):
        if not 0.0 < self.rho <= 1.0:
            raise ValueError(f"rho must be in (0, 1], got {self.rho}")
        if self.n_ants < 1:
            raise ValueError("need at least one ant")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be nonnegative")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.deposit_rule not in DEPOSIT_RULES:
            raise ValueError(f"deposit_rule must be one of {DEPOSIT_RULES}")
        if self.local_search not in LOCAL_SEARCH_KINDS:
            raise ValueError(f"local_search must be one of {LOCAL_SEARCH_KINDS}")


def compute_trail_limits(rho, best_length, n, tau_min_divisor=2.0):
    """Bounded-trail interval from the best tour length seen so far."""
    if best_length <= 0:
        raise ValueError(f"best_length must be positive, got {best_length}")
    if not 0.0 < rho <= 1.0:
        raise ValueError(f"rho must be in (0, 1], got {rho}")
    if n < 3:
        raise ValueError(f"n must be >= 3, got {n}")
    tau_max = 1.0 / (rho * best_length)
    tau_min = tau_max / (tau_min_divisor * n)
    return tau_max, tau_min


class PheromoneMatrix:
    """Symmetric trail values, optionally clamped to [tau_min, tau_max]."""

    def __init__(self, n, mode, init_value, tau_min=0.0, tau_max=np.inf):
        if mode not in VARIANTS:
            raise ValueError(f"mode must be one of {VARIANTS}")
        if mode == "mmas" and not 0.0 < tau_min < tau_max:
            raise ValueError("mmas mode needs 0 < tau_min < tau_max")
        self.mode = mode
        self.tau = np.full((n, n), float(init_value), dtype=np.float64)
        self.tau_min = float(tau_min)
        self.tau_max = float(tau_max)

    @property
    def n(self):
        return self.tau.shape[0]

    def set_limits(self, tau_max, tau_min):
        if not 0.0 < tau_min < tau_max:
            raise ValueError("need 0 < tau_min < tau_max")
        self.tau_max = float(tau_max)
        self.tau_min = float(tau_min)

    def evaporate(self, rho):
        self.tau *= 1.0 - rho

    def deposit(self, tour: Tour, rho=None):
        """Reinforce the edges of one tour.

        "as" adds rho/length per edge (each constructed tour deposits);
        "mmas" adds 1/length (only the selected ant deposits).
        """
        if tour.length <= 0:
            raise ValueError("cannot deposit on a zero-length tour")
        if self.mode == "as":
            if rho is None:
                raise ValueError("as-mode deposit needs rho")
            amount = rho / tour.length
        else:
            amount = 1.0 / tour.length
        _kernels.deposit_edges(self.tau, tour.order, amount)

    def clamp_trails(self):
        """Clamp into [tau_min, tau_max]; no-op outside mmas mode."""
        if self.mode == "mmas":
            np.clip(self.tau, self.tau_min, self.tau_max, out=self.tau)

    def reset(self, value):
        self.tau[:] = float(value)


@dataclass
class AntState:
    current: int
    visited: np.ndarray
    partial: list = field(default_factory=list)


@dataclass
class IterationReport:
    iteration: int
    iteration_best: int
    best_so_far: int
    elapsed_s: float
    improved: bool = False
    restarted: bool = False


def choose_next(ant: AntState, inst: Instance, pher: PheromoneMatrix, params: ColonyParams, rng):
    """Sample the next city proportionally to tau^alpha * eta^beta.

    Restricted to unvisited candidate-list members of the current city; when
    none remain, the unvisited city maximizing the weight is taken
    deterministically (lowest index on ties).
    """
    if ant.visited.all():
        raise ValueError("no unvisited city left")
    nxt = int(
        _kernels.choose_next(
            inst.coords, inst.nn_lists, pher.tau, params.alpha, params.beta,
            ant.visited, ant.current, rng,
        )
    )
    return nxt


def construct_tour(inst: Instance, pher: PheromoneMatrix, params: ColonyParams, rng) -> Tour:
    """Build one complete tour from a uniformly random start city."""
    start = int(rng.integers(0, inst.n))
    order = _kernels.construct(
        inst.coords, inst.nn_lists, pher.tau, params.alpha, params.beta, start, rng
    )
    return Tour(order, int(_kernels.tour_length(inst.coords, order)))


class Engine:
    """One colony on one instance: construction, update, restart logic.

    Strictly single-threaded; run several engines in separate workers for
    parallel search. In mmas mode a greedy nearest-neighbor tour seeds the
    best-so-far length, the trail limits are derived from it and every trail
    starts at tau_max. In as mode trails start at n_ants / nn_length.
    """

    def __init__(self, inst: Instance, params: ColonyParams):
        self.inst = inst
        self.params = params
        self.rng = np.random.default_rng(params.seed)
        nn_order = _kernels.nearest_neighbor_tour(inst.coords, 0)
        nn_len = int(_kernels.tour_length(inst.coords, nn_order))
        self.best = Tour(nn_order, nn_len)
        if params.variant == "mmas":
            tau_max, tau_min = compute_trail_limits(
                params.rho, nn_len, inst.n, params.tau_min_divisor
            )
            self.pher = PheromoneMatrix(inst.n, "mmas", tau_max, tau_min, tau_max)
        else:
            self.pher = PheromoneMatrix(inst.n, "as", params.n_ants / nn_len)
        self.iteration = 0
        self.stagnation = 0
        self.iteration_best: Tour | None = None
        self.restart_best: Tour | None = None
        self.copy_ant: Tour | None = None
        self._all_active = np.ones(inst.n, dtype=np.bool_)

    # -- exchange hooks -----------------------------------------------------

    def set_best(self, tour: Tour):
        """Replace the best-so-far (pool adoption). Lengths must already be
        valid under this engine's coordinates."""
        improved = tour.length < self.best.length
        self.best = tour.copy()
        if improved:
            self.stagnation = 0
        if self.params.variant == "mmas":
            self._refresh_limits()

    def set_copy_ant(self, tour: Tour | None):
        self.copy_ant = None if tour is None else tour.copy()

    def reevaluate(self):
        """Recompute stored tour lengths after a coordinate change."""
        for t in (self.best, self.iteration_best, self.restart_best, self.copy_ant):
            if t is not None:
                t.length = int(_kernels.tour_length(self.inst.coords, t.order))

    # -- iteration ----------------------------------------------------------

    def _refresh_limits(self):
        tau_max, tau_min = compute_trail_limits(
            self.params.rho, self.best.length, self.inst.n, self.params.tau_min_divisor
        )
        self.pher.set_limits(tau_max, tau_min)

    def select_deposit_ant(self) -> Tour:
        """The tour reinforced this iteration.

        An active copy_ant overrides everything; otherwise the configured
        rule applies, where "schedule" uses the iteration best except every
        bs_period-th iteration.
        """
        if self.iteration_best is None:
            raise RuntimeError("no iteration completed yet")
        if self.copy_ant is not None:
            return self.copy_ant
        rule = self.params.deposit_rule
        if rule == "bs":
            return self.best
        if rule == "schedule" and self.iteration % self.params.bs_period == 0:
            return self.best
        return self.iteration_best

    def detect_stagnation_and_restart(self) -> bool:
        """Reset all trails to tau_max after too long without improvement."""
        if self.params.variant != "mmas":
            return False
        if self.stagnation >= self.params.restart_threshold:
            self.pher.reset(self.pher.tau_max)
            self.stagnation = 0
            self.restart_best = None
            return True
        return False

    def run_iteration(self) -> IterationReport:
        t0 = time.perf_counter()
        p = self.params
        inst = self.inst
        ib: Tour | None = None
        tours = []
        for _ in range(p.n_ants):
            start = int(self.rng.integers(0, inst.n))
            order = _kernels.construct(
                inst.coords, inst.nn_lists, self.pher.tau, p.alpha, p.beta, start, self.rng
            )
            if p.local_search == "none":
                length = int(_kernels.tour_length(inst.coords, order))
            else:
                length = local_search.improve_order(inst, order, p.local_search)
            if p.variant == "as":
                tours.append(Tour(order, length))
            if ib is None or length < ib.length:
                ib = Tour(order, length)
        self.iteration_best = ib
        self.iteration += 1
        improved = ib.length < self.best.length
        if improved:
            self.best = ib.copy()
            self.stagnation = 0
            if p.variant == "mmas":
                self._refresh_limits()
            if self.copy_ant is not None and self.best.length < self.copy_ant.length:
                # never keep reinforcing a tour the colony already beat
                self.copy_ant = self.best.copy()
        else:
            self.stagnation += 1
        if self.restart_best is None or ib.length < self.restart_best.length:
            self.restart_best = ib.copy()
        self.pher.evaporate(p.rho)
        if p.variant == "as":
            for t in tours:
                self.pher.deposit(t, p.rho)
        else:
            self.pher.deposit(self.select_deposit_ant())
        self.pher.clamp_trails()
        restarted = self.detect_stagnation_and_restart()
        return IterationReport(
            iteration=self.iteration,
            iteration_best=ib.length,
            best_so_far=self.best.length,
            elapsed_s=time.perf_counter() - t0,
            improved=improved,
            restarted=restarted,
        )


def init_colony(inst: Instance, params: ColonyParams) -> Engine:
    """Build a ready-to-run engine (seed tour, trail limits, initial trails)."""
    return Engine(inst, params)
