"""Test helpers: endpoint instrumentation, value generators, comparers."""

import struct
from collections import Counter
from random import Random


class RecordingEndpoint:
    """Wraps an endpoint and records every frame that crosses it as
    (direction, kind, job_type) events."""

    def __init__(self, inner):
        self.inner = inner
        self.events = []

    @property
    def node_id(self):
        return self.inner.node_id

    def send(self, dest, frame):
        self.events.append(("send", frame.kind, frame.job_type))
        self.inner.send(dest, frame)

    def recv(self):
        src, frame = self.inner.recv()
        self.events.append(("recv", frame.kind, frame.job_type))
        return src, frame

    def broadcast(self, frame):
        self.events.append(("broadcast", frame.kind, frame.job_type))
        self.inner.broadcast(frame)

    def close(self, reason=None):
        self.inner.close(reason)

    def kind_counts(self, direction=None) -> Counter:
        return Counter(
            (d, kind) for d, kind, _ in self.events if direction is None or d == direction
        )


def record_boss(boss) -> RecordingEndpoint:
    """Install a recording wrapper on a boss before running jobs."""
    recorder = RecordingEndpoint(boss.endpoint)
    boss.endpoint = recorder
    return recorder


_KINDS = ("uint", "int", "float", "bytes")
_NESTED = ("seq", "record")
_SPECIAL_FLOATS = (float("inf"), float("-inf"), float("nan"), 0.0, -0.0)


def random_value(rng: Random, depth: int = 3):
    kinds = _KINDS + _NESTED + _NESTED if depth > 0 else _KINDS
    return value_of_kind(rng, rng.choice(kinds), depth)


def value_of_kind(rng: Random, kind: str, depth: int):
    if kind == "uint":
        return rng.randrange(0, 2**64)
    if kind == "int":
        return -rng.randrange(1, 2**63 + 1)
    if kind == "float":
        if rng.random() < 0.08:
            return rng.choice(_SPECIAL_FLOATS)
        return rng.uniform(-1e18, 1e18)
    if kind == "bytes":
        return rng.randbytes(rng.randrange(0, 24))
    if kind == "seq":
        n = rng.randrange(0, 6)
        if n == 0:
            return []
        inner = _KINDS + _NESTED if depth > 1 else _KINDS
        elem_kind = rng.choice(inner)
        return [value_of_kind(rng, elem_kind, depth - 1) for _ in range(n)]
    if kind == "record":
        n = rng.randrange(0, 5)
        record = {}
        for _ in range(n):
            name = "".join(rng.choice("abcdefgh") for _ in range(rng.randrange(1, 6)))
            record[name] = random_value(rng, depth - 1)
        return record
    raise AssertionError(kind)


def values_equal(a, b) -> bool:
    """Structural equality where floats compare by bit pattern, so NaN
    payloads and signed zeros are significant."""
    if type(a) is not type(b):
        return False
    if isinstance(a, float):
        return struct.pack("<d", a) == struct.pack("<d", b)
    if isinstance(a, list):
        return len(a) == len(b) and all(values_equal(x, y) for x, y in zip(a, b))
    if isinstance(a, dict):
        return a.keys() == b.keys() and all(values_equal(a[k], b[k]) for k in a)
    return a == b
