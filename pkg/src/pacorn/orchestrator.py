"""Master-slave run protocol with a capacity-10 elite pool, plus the serial
baseline runner.

Workers are in-host threads connected to the master by ordered point-to-point
channels (star topology). The master moves a city at each cycle start,
broadcasts the move, keeps the pool current, and answers the slaves' periodic
best-tour reports with the pool head; slaves adopt what they receive and can
keep it in a dedicated copy-ant that takes over pheromone reinforcement until
the next exchange. Exchanges fire every ``interval_mod / 4`` iterations and
are served in worker-id order at fixed iteration indices, so fixed-seed runs
under an iteration budget are fully reproducible.

An optional per-message latency models transport cost; an optional loss rate
drops exchange messages (reports and replies only) to exercise omission
tolerance.
"""

from __future__ import annotations

import hashlib
import os
import queue
import threading
import time
from dataclasses import dataclass, field, asdict, replace

import numpy as np

from . import _kernels
from .colony import ColonyParams, Engine
from .dynamics import CityMove, DynamicsConfig, apply_move, perturb_instance
from .instance import Instance, Tour

POOL_CAPACITY = 10


def gap(length, optimum) -> float:
    """Signed percentage excess over a reference optimum."""
    if optimum <= 0:
        raise ValueError(f"optimum must be positive, got {optimum}")
    return 100.0 * (length - optimum) / optimum


def worker_seed(base: int, worker_id: int) -> int:
    """Colony seed of one worker. Worker 0 (the master, and the serial
    runner) keeps the base seed; the others get derived independent seeds."""
    if worker_id == 0:
        return int(base)
    return int(np.random.SeedSequence((base, worker_id)).generate_state(1)[0])


def _digest(order: np.ndarray, length: int) -> str:
    h = hashlib.blake2b(order.tobytes(), digest_size=6)
    h.update(str(length).encode())
    return h.hexdigest()


def _move_stream(seed: int):
    """The city-move stream. Namespaced away from the colony streams so a
    serial run and a parallel run with the same seed see the same moves."""
    return np.random.default_rng(np.random.SeedSequence((seed, 109)))


# ---------------------------------------------------------------------------
# Solution pool
# ---------------------------------------------------------------------------


@dataclass
class PoolEntry:
    order: np.ndarray
    length: int
    found_at: float  # seconds since run start
    source_worker: int
    seq: int
    key: bytes


class SolutionPool:
    """The master's sorted elite set. Duplicates are detected on the
    canonical cyclic form, so rotations and reflections of one tour occupy
    one slot."""

    def __init__(self, capacity=POOL_CAPACITY):
        self.capacity = capacity
        self.entries: list[PoolEntry] = []
        self._keys: set[bytes] = set()
        self._seq = 0

    def __len__(self):
        return len(self.entries)

    def best(self) -> PoolEntry | None:
        return self.entries[0] if self.entries else None

    def insert(self, order, length, found_at, source_worker) -> bool:
        """Insert unless duplicate or worse than a full pool's worst entry.
        Evicts the worst entry when over capacity."""
        order = np.asarray(order, dtype=np.int64)
        key = Tour(order, length).canonical_key()
        if key in self._keys:
            return False
        if len(self.entries) >= self.capacity and length >= self.entries[-1].length:
            return False
        entry = PoolEntry(order.copy(), int(length), found_at, source_worker, self._seq, key)
        self._seq += 1
        self.entries.append(entry)
        self._keys.add(key)
        self.entries.sort(key=lambda e: (e.length, e.seq))
        while len(self.entries) > self.capacity:
            evicted = self.entries.pop()
            self._keys.discard(evicted.key)
        return True

    def restore(self, inst: Instance):
        """Re-evaluate every entry under the current coordinates, re-sort."""
        for e in self.entries:
            e.length = int(_kernels.tour_length(inst.coords, e.order))
        self.entries.sort(key=lambda e: (e.length, e.seq))

    def snapshot(self) -> list[dict]:
        return [
            {
                "order": e.order.tolist(),
                "length": e.length,
                "found_at_s": e.found_at,
                "source_worker": e.source_worker,
            }
            for e in self.entries
        ]


def pool_insert(pool: SolutionPool, order, length, found_at, worker) -> bool:
    return pool.insert(order, length, found_at, worker)


def pool_restore(pool: SolutionPool, inst: Instance):
    pool.restore(inst)


# ---------------------------------------------------------------------------
# Messages and channels
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MoveBroadcast:
    move: CityMove


@dataclass(frozen=True)
class BestReport:
    order: np.ndarray
    length: int
    worker_id: int
    iteration: int
    round_index: int


@dataclass(frozen=True)
class PoolBest:
    order: np.ndarray
    length: int
    cycle_index: int
    round_index: int


@dataclass(frozen=True)
class Terminate:
    pass


@dataclass(frozen=True)
class Done:
    worker_id: int
    iterations: int
    best_order: np.ndarray
    best_length: int


@dataclass(frozen=True)
class WorkerFailure:
    worker_id: int
    error: str


class Channel:
    """Ordered, reliable point-to-point link with a single consumer.

    ``latency_s`` delays delivery of every message; ``loss_rate`` drops
    exchange traffic (BestReport / PoolBest) at send time, never control
    messages, so fault injection models omission without killing the run.
    """

    def __init__(self, latency_s=0.0, loss_rate=0.0, fault_rng=None):
        self._q = queue.Queue()
        self._held = None
        self.latency_s = latency_s
        self.loss_rate = loss_rate
        self.fault_rng = fault_rng

    def send(self, msg):
        if (
            self.loss_rate > 0.0
            and isinstance(msg, (BestReport, PoolBest))
            and self.fault_rng.random() < self.loss_rate
        ):
            return
        self._q.put((time.perf_counter() + self.latency_s, msg))

    def recv(self, timeout=None):
        """Next message, or None on timeout."""
        if self._held is not None:
            deliver_at, msg = self._held
            self._held = None
        else:
            try:
                deliver_at, msg = self._q.get(timeout=timeout)
            except queue.Empty:
                return None
        delay = deliver_at - time.perf_counter()
        if delay > 0:
            time.sleep(delay)
        return msg

    def try_recv(self):
        """Nonblocking: a message only if one has already been delivered."""
        if self._held is None:
            try:
                self._held = self._q.get_nowait()
            except queue.Empty:
                return None
        deliver_at, msg = self._held
        if time.perf_counter() >= deliver_at:
            self._held = None
            return msg
        return None


# ---------------------------------------------------------------------------
# Run configuration and report
# ---------------------------------------------------------------------------


@dataclass
class RunConfig:
    workers: int = 1
    exchange_mode: str = "sr"  # sr | gs; ignored for serial runs
    copy_ant_enabled: bool = False
    iterations: int | None = None  # exactly one budget must be set
    time_limit_s: float | None = None
    params: ColonyParams = field(default_factory=ColonyParams)
    dynamics: DynamicsConfig = field(default_factory=DynamicsConfig)
    optimum: int | None = None
    latency_ms: float = 0.0
    loss_rate: float = 0.0
    adopt_if_better: bool = False  # ablation switch; default adopts unconditionally
    exchange_timeout_s: float | None = None
    log_dir: str | None = None

    def __post_init__(self):
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.exchange_mode not in ("sr", "gs"):
            raise ValueError("exchange_mode must be 'sr' or 'gs'")
        if (self.iterations is None) == (self.time_limit_s is None):
            raise ValueError("set exactly one of iterations / time_limit_s")
        if self.dynamics.interval_mod % 4 != 0:
            raise ValueError("interval_mod must be divisible by 4")

    @property
    def interval_mod(self) -> int:
        return self.dynamics.interval_mod

    @property
    def interval_update(self) -> int:
        return self.dynamics.interval_mod // 4

    @property
    def mode_name(self) -> str:
        return "serial" if self.workers == 1 else self.exchange_mode

    def config_echo(self) -> dict:
        d = asdict(self)
        return d


@dataclass
class RunReport:
    instance: str
    mode: str
    workers: int
    copy_ant: bool
    seed: int
    dynamics_seed: int
    pool: list[dict]
    per_worker_iterations: list[int]
    iterations_total: int
    best_gap: float | None
    avg3_gap: float | None
    avg10_gap: float | None
    avg_time3_s: float | None
    avg_time10_s: float | None
    wall_time_s: float
    move_log: list[str]
    move_log_path: str | None
    events: list[tuple]
    config: dict

    def to_dict(self) -> dict:
        d = asdict(self)
        d["events"] = [list(e) for e in self.events]
        return d


def _pool_stats(pool: SolutionPool, optimum):
    entries = pool.entries
    stats = {
        "best_gap": None,
        "avg3_gap": None,
        "avg10_gap": None,
        "avg_time3_s": None,
        "avg_time10_s": None,
    }
    if not entries:
        return stats
    stats["avg_time3_s"] = float(np.mean([e.found_at for e in entries[:3]]))
    stats["avg_time10_s"] = float(np.mean([e.found_at for e in entries]))
    if optimum is not None:
        gaps = [gap(e.length, optimum) for e in entries]
        stats["best_gap"] = gaps[0]
        stats["avg3_gap"] = float(np.mean(gaps[:3]))
        stats["avg10_gap"] = float(np.mean(gaps))
    return stats


class RunLogger:
    """Shared event and move log. One line per protocol event; moves are
    appended as 'cycle,city,old_x,old_y,new_x,new_y' for replay."""

    def __init__(self, log_dir=None, tag="run"):
        self.t0 = time.perf_counter()
        self.events: list[tuple] = []
        self.move_lines: list[str] = []
        self.path = None
        if log_dir:
            os.makedirs(log_dir, exist_ok=True)
            self.path = os.path.join(log_dir, f"{tag}.log")

    def event(self, worker, kind, digest=""):
        self.events.append((round(time.perf_counter() - self.t0, 6), worker, kind, digest))

    def move(self, mv: CityMove):
        self.move_lines.append(mv.log_line())
        self.event(0, "move", f"city={mv.city}")

    def close(self):
        if self.path:
            with open(self.path, "w", encoding="utf-8") as fh:
                for t, worker, kind, digest in self.events:
                    fh.write(f"{t},{worker},{kind},{digest}\n")
                for line in self.move_lines:
                    fh.write(f"move,{line}\n")


# ---------------------------------------------------------------------------
# Serial baseline
# ---------------------------------------------------------------------------


def _budget_done(cfg: RunConfig, iteration: int, start: float) -> bool:
    if cfg.iterations is not None:
        return iteration >= cfg.iterations
    return time.perf_counter() - start >= cfg.time_limit_s


def run_serial(inst: Instance, cfg: RunConfig) -> RunReport:
    """One worker solves the (possibly dynamic) instance; a local pool
    collects its improving best-so-far tours. No messages are exchanged."""
    if cfg.workers != 1:
        raise ValueError("run_serial needs workers == 1")
    local = inst.copy()
    engine = Engine(local, cfg.params)
    pool = SolutionPool()
    logger = RunLogger(cfg.log_dir, tag=f"{inst.name}_serial_{cfg.params.seed}")
    move_rng = _move_stream(cfg.dynamics.rng_seed)
    start = time.perf_counter()
    pool.insert(engine.best.order, engine.best.length, 0.0, 0)
    t = 0
    cycle = 0
    while not _budget_done(cfg, t, start):
        t += 1
        if cfg.dynamics.enabled and (t - 1) % cfg.interval_mod == 0:
            cycle += 1
            mv = perturb_instance(local, cfg.dynamics, cycle, move_rng)
            logger.move(mv)
            pool.restore(local)
            engine.reevaluate()
        rep = engine.run_iteration()
        if rep.improved:
            pool.insert(
                engine.best.order, engine.best.length, time.perf_counter() - start, 0
            )
    logger.close()
    stats = _pool_stats(pool, cfg.optimum)
    return RunReport(
        instance=inst.name,
        mode="serial",
        workers=1,
        copy_ant=cfg.copy_ant_enabled,
        seed=cfg.params.seed,
        dynamics_seed=cfg.dynamics.rng_seed,
        pool=pool.snapshot(),
        per_worker_iterations=[t],
        iterations_total=t,
        wall_time_s=time.perf_counter() - start,
        move_log=list(logger.move_lines),
        move_log_path=logger.path,
        events=list(logger.events),
        config=cfg.config_echo(),
        **stats,
    )


# ---------------------------------------------------------------------------
# Parallel run
# ---------------------------------------------------------------------------


def _slave_main(worker_id, inst, params, cfg: RunConfig, ch_in: Channel, ch_out: Channel, logger):
    try:
        engine = Engine(inst, params)
        iu = cfg.interval_update
        timeout = _exchange_timeout(cfg)
        t = 0
        running = True
        pending = []  # a MoveBroadcast received early (its reply was dropped)

        def next_msg(block_timeout):
            if pending:
                return pending.pop(0)
            return ch_in.recv(timeout=block_timeout)

        while running:
            if cfg.iterations is not None and t >= cfg.iterations:
                break
            if cfg.dynamics.enabled and t % cfg.interval_mod == 0:
                # cycle start: the master's move arrives before we construct
                msg = next_msg(None)
                while isinstance(msg, PoolBest):  # stale reply of a skipped round
                    msg = next_msg(None)
                if isinstance(msg, Terminate):
                    break
                apply_move(inst, msg.move)
                engine.reevaluate()
                logger.event(worker_id, "move_applied", f"cycle={msg.move.cycle_index}")
            else:
                msg = ch_in.try_recv()
                while msg is not None:
                    if isinstance(msg, Terminate):
                        running = False
                        break
                    if isinstance(msg, MoveBroadcast):
                        pending.append(msg)  # belongs to our next cycle start
                        break
                    msg = ch_in.try_recv()  # stale PoolBest: discard
                if not running:
                    break
            t += 1
            engine.run_iteration()
            if t % iu == 0:
                rnd = t // iu
                ch_out.send(
                    BestReport(engine.best.order.copy(), engine.best.length, worker_id, t, rnd)
                )
                logger.event(worker_id, "report_sent", _digest(engine.best.order, engine.best.length))
                while True:
                    reply = next_msg(timeout)
                    if reply is None:
                        logger.event(worker_id, "reply_missing", f"round={rnd}")
                        break
                    if isinstance(reply, Terminate):
                        running = False
                        break
                    if isinstance(reply, MoveBroadcast):
                        # FIFO: the reply would have preceded it, so ours was lost
                        pending.append(reply)
                        logger.event(worker_id, "reply_missing", f"round={rnd}")
                        break
                    if reply.round_index < rnd:
                        continue  # stale reply of a skipped round
                    adopted = Tour(
                        reply.order.copy(),
                        int(_kernels.tour_length(inst.coords, reply.order)),
                    )
                    if not cfg.adopt_if_better or adopted.length < engine.best.length:
                        engine.set_best(adopted)
                    if cfg.copy_ant_enabled:
                        engine.set_copy_ant(adopted)
                    logger.event(worker_id, "adopted", _digest(adopted.order, adopted.length))
                    break
        ch_out.send(Done(worker_id, t, engine.best.order.copy(), engine.best.length))
    except Exception as exc:  # surfaced by the master as a run abort
        import traceback

        ch_out.send(WorkerFailure(worker_id, f"{exc}\n{traceback.format_exc()}"))


def _exchange_timeout(cfg: RunConfig):
    if cfg.exchange_timeout_s is not None:
        return cfg.exchange_timeout_s
    if cfg.loss_rate > 0.0:
        return 1.0
    return None  # reliable channels: block


class _MasterRun:
    def __init__(self, inst: Instance, cfg: RunConfig):
        self.cfg = cfg
        self.inst = inst.copy()
        self.params = replace(cfg.params, seed=worker_seed(cfg.params.seed, 0))
        self.engine = Engine(self.inst, self.params)
        self.pool = SolutionPool()
        self.logger = RunLogger(
            cfg.log_dir, tag=f"{inst.name}_{cfg.mode_name}_{cfg.params.seed}"
        )
        self.move_rng = _move_stream(cfg.dynamics.rng_seed)
        latency = cfg.latency_ms / 1000.0
        self.to_slave: dict[int, Channel] = {}
        self.from_slave: dict[int, Channel] = {}
        self.threads: dict[int, threading.Thread] = {}
        self.finished: dict[int, int] = {}  # worker -> iterations
        self.failure: WorkerFailure | None = None
        self.slave_ids = list(range(1, cfg.workers))
        for w in self.slave_ids:
            down_rng = np.random.default_rng(np.random.SeedSequence((cfg.params.seed, 7919, w)))
            up_rng = np.random.default_rng(np.random.SeedSequence((cfg.params.seed, 104729, w)))
            self.to_slave[w] = Channel(latency, cfg.loss_rate, down_rng)
            self.from_slave[w] = Channel(latency, cfg.loss_rate, up_rng)
            params_w = replace(cfg.params, seed=worker_seed(cfg.params.seed, w))
            self.threads[w] = threading.Thread(
                target=_slave_main,
                args=(w, inst.copy(), params_w, cfg, self.to_slave[w], self.from_slave[w], self.logger),
                name=f"pacorn-slave-{w}",
                daemon=True,
            )

    # -- gather helpers ------------------------------------------------------

    def _recv_report(self, w, rnd, timeout):
        """Next in-round report from slave w; handles Done/Failure/stale."""
        while True:
            msg = self.from_slave[w].recv(timeout=timeout)
            if msg is None:
                return None
            if isinstance(msg, WorkerFailure):
                self.failure = msg
                return msg
            if isinstance(msg, Done):
                self.finished[msg.worker_id] = msg.iterations
                self.pool.insert(
                    msg.best_order, msg.best_length, self._elapsed(), msg.worker_id
                )
                return msg
            if isinstance(msg, BestReport) and msg.round_index < rnd:
                continue  # stale; its round was skipped
            return msg

    def _elapsed(self):
        return time.perf_counter() - self.start

    def _serve_report(self, msg: BestReport):
        self.pool.insert(msg.order, msg.length, self._elapsed(), msg.worker_id)
        self.pool.restore(self.inst)
        self.logger.event(0, "report_recv", _digest(msg.order, msg.length))

    def _exchange_sr(self, rnd, cycle):
        """Point-to-point round: serve each slave fully before the next, in
        worker-id order. A slave whose report was lost is skipped."""
        timeout = _exchange_timeout(self.cfg)
        for w in self.slave_ids:
            if w in self.finished or self.failure:
                continue
            msg = self._recv_report(w, rnd, timeout)
            if msg is None or isinstance(msg, (Done, WorkerFailure)):
                continue
            self._serve_report(msg)
            head = self.pool.best()
            self.to_slave[w].send(PoolBest(head.order.copy(), head.length, cycle, rnd))
            self.logger.event(0, "pool_best_sent", _digest(head.order, head.length))

    def _exchange_gs(self, rnd, cycle):
        """Collective round: gather every report, fold the batch into the
        pool, then scatter one identical reply to all participants. The
        collective is synchronous: the master stays inside it until the
        scatter has been delivered, so nobody leaves the barrier early --
        unlike the buffered point-to-point sends of the sr mode."""
        timeout = self.cfg.exchange_timeout_s or 60.0
        reports = []
        for w in self.slave_ids:
            if w in self.finished or self.failure:
                continue
            msg = self._recv_report(w, rnd, timeout)
            if msg is None:
                raise RuntimeError(
                    f"gather barrier timed out waiting for worker {w} in round {rnd}"
                )
            if isinstance(msg, (Done, WorkerFailure)):
                continue
            reports.append(msg)
        for msg in reports:
            self._serve_report(msg)
        if not reports:
            return
        head = self.pool.best()
        for msg in reports:
            self.to_slave[msg.worker_id].send(
                PoolBest(head.order.copy(), head.length, cycle, rnd)
            )
        self.logger.event(0, "pool_best_scatter", _digest(head.order, head.length))
        if self.cfg.latency_ms > 0:
            # deliveries go out one per destination; the root leaves last
            time.sleep(len(reports) * self.cfg.latency_ms / 1000.0)

    # -- main loop -------------------------------------------------------------

    def run(self) -> RunReport:
        cfg = self.cfg
        self.start = time.perf_counter()
        for th in self.threads.values():
            th.start()
        self.pool.insert(self.engine.best.order, self.engine.best.length, 0.0, 0)
        t = 0
        cycle = 0
        iu = cfg.interval_update
        while not _budget_done(cfg, t, self.start) and not self.failure:
            if cfg.dynamics.enabled and t % cfg.interval_mod == 0:
                cycle += 1
                mv = perturb_instance(self.inst, cfg.dynamics, cycle, self.move_rng)
                self.logger.move(mv)
                for w in self.slave_ids:
                    if w not in self.finished:
                        self.to_slave[w].send(MoveBroadcast(mv))
                self.pool.restore(self.inst)
                self.engine.reevaluate()
            t += 1
            rep = self.engine.run_iteration()
            if rep.improved:
                self.pool.insert(
                    self.engine.best.order, self.engine.best.length, self._elapsed(), 0
                )
            if t % iu == 0:
                rnd = t // iu
                if cfg.exchange_mode == "sr":
                    self._exchange_sr(rnd, cycle)
                else:
                    self._exchange_gs(rnd, cycle)
        # shutdown: unblock everyone, then collect Done records
        for w in self.slave_ids:
            self.to_slave[w].send(Terminate())
        self.logger.event(0, "terminate", "")
        deadline = time.perf_counter() + 60.0
        for w in self.slave_ids:
            while w not in self.finished and not self.failure:
                msg = self.from_slave[w].recv(timeout=max(0.1, deadline - time.perf_counter()))
                if msg is None:
                    raise RuntimeError(f"worker {w} failed to shut down")
                if isinstance(msg, WorkerFailure):
                    self.failure = msg
                elif isinstance(msg, Done):
                    self.finished[msg.worker_id] = msg.iterations
                    self.pool.insert(
                        msg.best_order, msg.best_length, self._elapsed(), msg.worker_id
                    )
        for th in self.threads.values():
            th.join(timeout=10.0)
        if self.failure:
            raise RuntimeError(
                f"worker {self.failure.worker_id} failed:\n{self.failure.error}"
            )
        self.pool.restore(self.inst)
        self.logger.close()
        per_worker = [t] + [self.finished[w] for w in self.slave_ids]
        stats = _pool_stats(self.pool, cfg.optimum)
        return RunReport(
            instance=self.inst.name,
            mode=cfg.mode_name,
            workers=cfg.workers,
            copy_ant=cfg.copy_ant_enabled,
            seed=cfg.params.seed,
            dynamics_seed=cfg.dynamics.rng_seed,
            pool=self.pool.snapshot(),
            per_worker_iterations=per_worker,
            iterations_total=sum(per_worker),
            wall_time_s=time.perf_counter() - self.start,
            move_log=list(self.logger.move_lines),
            move_log_path=self.logger.path,
            events=list(self.logger.events),
            config=cfg.config_echo(),
            **stats,
        )


def run_parallel(inst: Instance, cfg: RunConfig) -> RunReport:
    """One master plus ``workers - 1`` slaves, each on a private instance
    copy with an independent colony stream. Aborts with a diagnostic if any
    worker fails."""
    if cfg.workers < 2:
        raise ValueError("run_parallel needs workers >= 2")
    return _MasterRun(inst, cfg).run()


def run(inst: Instance, cfg: RunConfig) -> RunReport:
    return run_serial(inst, cfg) if cfg.workers == 1 else run_parallel(inst, cfg)
