"""Load sampling, the sleep-job overhead benchmark, and scaling reports.

The boss records a load sample after every supervision state change;
the resulting timeline can be written as CSV and replayed to audit the
scheduler.  The benchmark helpers quantify per-job queue overhead with
sleep jobs and derive speedup/efficiency figures for a deterministic
workload run at several worker counts.
"""

from __future__ import annotations

import csv
import multiprocessing
import time
from array import array
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator

from . import codec
from .wire import pick_free_port


@dataclass(frozen=True)
class LoadSample:
    t: float            # seconds since supervision start
    active_workers: int  # jobs assigned but not yet returned
    queued_jobs: int     # jobs waiting in the global queue


class LoadLog:
    """Columnar store of load samples; cheap enough to append on every
    boss event even in million-job runs."""

    def __init__(self):
        self._t = array("d")
        self._active = array("q")
        self._queued = array("q")

    def record(self, t: float, active_workers: int, queued_jobs: int) -> None:
        self._t.append(t)
        self._active.append(active_workers)
        self._queued.append(queued_jobs)

    def clear(self) -> None:
        del self._t[:], self._active[:], self._queued[:]

    def __len__(self) -> int:
        return len(self._t)

    def __getitem__(self, i: int) -> LoadSample:
        return LoadSample(self._t[i], self._active[i], self._queued[i])

    def __iter__(self) -> Iterator[LoadSample]:
        for i in range(len(self._t)):
            yield LoadSample(self._t[i], self._active[i], self._queued[i])


def emit_load_csv(samples: Iterable[LoadSample], path) -> None:
    """Write samples as CSV: header t_sec,active_workers,queued_jobs
    then one row per sample."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["t_sec", "active_workers", "queued_jobs"])
        for sample in samples:
            writer.writerow([f"{sample.t:.6f}", sample.active_workers, sample.queued_jobs])


SLEEP_JOB = 1


@dataclass(frozen=True)
class OverheadReport:
    """One row of the sleep-job overhead experiment.

    ideal is jobs_n * sleep_s / workers: the floor a perfect scheduler
    could reach with every worker sleeping back to back; everything
    above it is queue overhead.
    """

    jobs_n: int
    payload_doubles: int
    workers: int
    sleep_s: float
    runtime_t: float

    @property
    def ideal(self) -> float:
        return self.jobs_n * self.sleep_s / self.workers

    @property
    def overhead(self) -> float:
        return self.runtime_t - self.ideal

    @property
    def per_job_overhead(self) -> float:
        return self.overhead / self.jobs_n


def bench_overhead(jobs: int, payload_doubles: int, sleep_s: float, workers: int) -> OverheadReport:
    """Run *jobs* sleep jobs over an in-process cluster and report the
    runtime against the ideal.

    With payload_doubles > 0 every job carries that many floats, and the
    handler decodes and re-encodes them so the payload is serialized,
    deserialized and sent both ways, mirroring real data-carrying jobs.
    """
    if jobs < 1:
        raise ValueError("at least one job is required")
    if workers < 1:
        raise ValueError("at least one worker is required")
    if payload_doubles < 0 or sleep_s < 0:
        raise ValueError("payload_doubles and sleep_s must not be negative")
    from .runtime import HandlerRegistry, InprocConfig, Job, start

    def sleep_handler(job, ctx):
        if job.data:
            values = codec.decode(job.data)
            time.sleep(sleep_s)
            return codec.encode(values)
        time.sleep(sleep_s)
        return b""

    registry = HandlerRegistry(worker={SLEEP_JOB: sleep_handler})
    payload = codec.encode([float(i) for i in range(payload_doubles)]) if payload_doubles else b""
    with start(InprocConfig(workers), registry) as boss:
        # one untimed round wakes every worker before measurement starts
        boss.run_jobs([Job(SLEEP_JOB, payload) for _ in range(workers)])
        queue = [Job(SLEEP_JOB, payload) for _ in range(jobs)]
        t0 = time.perf_counter()
        boss.run_jobs(queue)
        runtime_t = time.perf_counter() - t0
    return OverheadReport(jobs, payload_doubles, workers, sleep_s, runtime_t)


@dataclass(frozen=True)
class ScalingReport:
    """Scaling figures for one worker count, relative to the 1-worker
    run of the same workload.  p counts the boss as a node."""

    workers: int
    runtime_t: float
    baseline_t: float

    @property
    def p(self) -> int:
        return self.workers + 1

    @property
    def worker_usage(self) -> float:
        return self.workers * self.runtime_t

    @property
    def total_usage(self) -> float:
        return self.p * self.runtime_t

    @property
    def speedup(self) -> float:
        return self.baseline_t / self.runtime_t

    @property
    def efficiency(self) -> float:
        return self.speedup / self.p


def scaling_report(workload: Callable[[int], float], worker_counts: Iterable[int]) -> list[ScalingReport]:
    """Run *workload* (worker count -> measured runtime seconds) at each
    count and derive speedup/efficiency against the 1-worker run."""
    counts = list(worker_counts)
    if 1 not in counts:
        raise ValueError("worker_counts must include 1, the speedup baseline")
    times = {}
    for count in counts:
        if count < 1:
            raise ValueError("worker counts must be at least 1")
        times[count] = workload(count)
    baseline = times[1]
    return [ScalingReport(count, times[count], baseline) for count in counts]


def format_overhead_table(reports: Iterable[OverheadReport]) -> str:
    header = f"{'Jobs n':>8}  {'Doubles':>8}  {'Workers':>8}  {'Runtime (s)':>12}  {'Ideal (s)':>10}  {'Overhead (s)':>13}  {'Per-job (s)':>12}"
    lines = [header, "-" * len(header)]
    for r in reports:
        lines.append(
            f"{r.jobs_n:>8}  {r.payload_doubles:>8}  {r.workers:>8}  "
            f"{r.runtime_t:>12.4f}  {r.ideal:>10.4f}  {r.overhead:>13.4f}  {r.per_job_overhead:>12.6f}"
        )
    return "\n".join(lines)


def format_scaling_table(reports: Iterable[ScalingReport]) -> str:
    header = f"{'Nodes p':>8}  {'Runtime (s)':>12}  {'Worker usage':>13}  {'Total usage':>12}  {'Speedup':>8}  {'Efficiency':>10}"
    lines = [header, "-" * len(header)]
    for r in reports:
        lines.append(
            f"{r.p:>8}  {r.runtime_t:>12.4f}  {r.worker_usage:>13.4f}  "
            f"{r.total_usage:>12.4f}  {r.speedup:>8.2f}  {r.efficiency:>10.2f}"
        )
    return "\n".join(lines)


def _worker_process_main(app: str, connect: str, timeout: float) -> None:
    # entry point for spawned worker processes; must stay module level
    # so multiprocessing can import it by reference
    from .apps import registry_for
    from .runtime import TcpWorkerConfig, start

    start(TcpWorkerConfig(connect, timeout), registry_for(app))


def spawn_local_workers(app: str, connect: str, count: int, timeout: float = 30.0) -> list:
    """Start *count* worker processes for the named application, each
    connecting to *connect*.  Returns the process handles."""
    ctx = multiprocessing.get_context("spawn")
    procs = []
    for _ in range(count):
        proc = ctx.Process(target=_worker_process_main, args=(app, connect, timeout), daemon=True)
        proc.start()
        procs.append(proc)
    return procs


@dataclass(frozen=True)
class QueensRunMeasurement:
    workers: int
    runtime_t: float
    solutions: int
    samples: LoadLog


def measure_queens_run(size: int, overflow: int, workers: int, transport: str = "tcp",
                       host: str = "127.0.0.1") -> QueensRunMeasurement:
    """Time one queens run at the given worker count.

    transport "tcp" spawns local worker processes (real CPU parallelism);
    "inproc" uses threads, which serialize Python compute but exercise
    the same protocol.  The measured span covers supervision only, not
    cluster startup.
    """
    from .apps.queens import Queens
    from .runtime import InprocConfig, TcpBossConfig, start

    app = Queens()
    procs = []
    if transport == "inproc":
        boss = start(InprocConfig(workers), app.registry())
    elif transport == "tcp":
        port = pick_free_port(host)
        addr = f"{host}:{port}"
        procs = spawn_local_workers("queens", addr, workers)
        boss = start(TcpBossConfig(addr, workers), app.registry())
    else:
        raise ValueError(f"unknown transport {transport!r}")
    try:
        t0 = time.perf_counter()
        solutions = app.run(boss, size, overflow)
        runtime_t = time.perf_counter() - t0
        samples = boss.samples
    finally:
        boss.stop()
        for proc in procs:
            proc.join(timeout=30)
    return QueensRunMeasurement(workers, runtime_t, solutions, samples)


class QueensWorkload:
    """Callable workload for scaling_report; remembers the last run so
    its load samples can be inspected or written to CSV."""

    def __init__(self, size: int, overflow: int, transport: str = "tcp"):
        self.size = size
        self.overflow = overflow
        self.transport = transport
        self.last: QueensRunMeasurement | None = None

    def __call__(self, workers: int) -> float:
        self.last = measure_queens_run(self.size, self.overflow, workers, self.transport)
        return self.last.runtime_t
