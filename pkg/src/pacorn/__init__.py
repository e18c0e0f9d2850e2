"""pacorn: ant-colony solver for the dynamic TSP with ring-neighborhood
city moves, runnable serially or as a master-slave worker protocol with a
top-10 solution pool."""

from .colony import ColonyParams, Engine, PheromoneMatrix, compute_trail_limits, init_colony
from .dynamics import CityMove, DynamicsConfig, apply_move, compute_rad, perturb_instance, reevaluate_tour, sample_ring_point
from .instance import Instance, Tour, build_neighbor_lists, euc2d_distance, load_instance, parse_tsplib, tour_length
from .local_search import LocalSearchConfig, three_opt, two_opt
from .oracle import exact_optimum, generate_random_instance
from .orchestrator import (
    RunConfig,
    RunReport,
    SolutionPool,
    gap,
    pool_insert,
    pool_restore,
    run,
    run_parallel,
    run_serial,
    worker_seed,
)

__version__ = "0.1.0"

__all__ = [
    "ColonyParams",
    "Engine",
    "PheromoneMatrix",
    "compute_trail_limits",
    "init_colony",
    "CityMove",
    "DynamicsConfig",
    "apply_move",
    "compute_rad",
    "perturb_instance",
    "reevaluate_tour",
    "sample_ring_point",
    "Instance",
    "Tour",
    "build_neighbor_lists",
    "euc2d_distance",
    "load_instance",
    "parse_tsplib",
    "tour_length",
    "LocalSearchConfig",
    "two_opt",
    "three_opt",
    "exact_optimum",
    "generate_random_instance",
    "RunConfig",
    "RunReport",
    "SolutionPool",
    "gap",
    "pool_insert",
    "pool_restore",
    "run",
    "run_parallel",
    "run_serial",
    "worker_seed",
]
