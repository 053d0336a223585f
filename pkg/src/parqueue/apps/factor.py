"""Prime factorization by repeated balanced splitting.

Each job splits its integer into the most balanced factor pair and
submits both halves back into the running queue; primes cannot be split
and are returned as results, so the output queue accumulates exactly
the prime factorization.
"""

from __future__ import annotations

from math import isqrt

from .. import codec
from ..runtime import Boss, HandlerRegistry, Job, WorkerContext

SPLIT = 1


def largest_split(n: int) -> tuple[int, int]:
    """Return (a, b) with a*b == n, a <= b and a as large as possible,
    i.e. a is the largest divisor of n not exceeding sqrt(n)."""
    if n < 2:
        raise ValueError(f"need an integer >= 2, got {n}")
    a = isqrt(n)
    while n % a:
        a -= 1
    return a, n // a


def handle_split(job: Job, ctx: WorkerContext) -> bytes:
    n = codec.decode(job.data)
    a, b = largest_split(n)
    if a == 1:
        return job.data  # prime: pass the input through as the result
    ctx.submit(Job(SPLIT, codec.encode(a)))
    ctx.submit(Job(SPLIT, codec.encode(b)))
    return b""


def registry() -> HandlerRegistry:
    return HandlerRegistry(worker={SPLIT: handle_split})


def factor(boss: Boss, n: int) -> list[int]:
    """Run the factorization of n on an already-started cluster and
    return the prime factors in ascending order."""
    if not isinstance(n, int) or isinstance(n, bool) or n < 2:
        raise ValueError(f"need an integer >= 2, got {n!r}")
    results = boss.run_jobs([Job(SPLIT, codec.encode(n))])
    return sorted(codec.decode(job.data) for job in results)


def format_factorization(n: int, primes: list[int]) -> str:
    return f"{n} = " + " * ".join(str(p) for p in primes)
