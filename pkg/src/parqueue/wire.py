"""Message framing and the boss↔worker transport abstraction.

A frame is a 13-byte header followed by the payload bytes:

    offset  size  field
    0       2     magic 0x4D 0x51 ("MQ")
    2       1     version (currently 1)
    3       1     message kind code
    4       1     reserved, must be zero
    5       4     job type, unsigned 32-bit little-endian (0 when unused)
    9       4     payload length, unsigned 32-bit little-endian
    13      len   payload

Two interchangeable backends implement the Endpoint contract: an
in-process backend linking node threads through ordered queues, and a
TCP backend speaking the frame grammar over sockets.  Frames between a
given pair of nodes are delivered in send order; a lost peer surfaces as
a TransportError (there is no reconnection or failover).
"""

from __future__ import annotations

import socket
import struct
import threading
import time
from collections import deque
from enum import IntEnum
from queue import SimpleQueue
from random import Random
from typing import BinaryIO, NamedTuple

from .errors import (
    LifecycleError,
    ProtocolError,
    StartupError,
    TransportError,
    TruncationError,
)

MAGIC = b"MQ"
VERSION = 1
HEADER = struct.Struct("<2sBBxII")
HEADER_SIZE = HEADER.size  # 13

BOSS_ID = 0


class MessageKind(IntEnum):
    """Frame kinds; the byte codes are part of the stable wire format."""

    JOB_ASSIGN = 1
    JOB_RESULT = 2
    JOB_SUBMIT = 3
    TASK_REQUEST = 4
    TASK_RESPONSE = 5
    INFO_REQUEST = 6
    INFO_RESPONSE = 7
    DATA_SHARE = 8
    STOP = 9


class Frame(NamedTuple):
    kind: MessageKind
    job_type: int = 0
    payload: bytes = b""


def encode_frame(frame: Frame) -> bytes:
    if len(frame.payload) > 0xFFFFFFFF:
        raise ProtocolError("frame payload exceeds the 32-bit length field")
    if not 0 <= frame.job_type <= 0xFFFFFFFF:
        raise ProtocolError(f"job type {frame.job_type} exceeds the 32-bit field")
    header = HEADER.pack(MAGIC, VERSION, int(frame.kind), frame.job_type, len(frame.payload))
    return header + frame.payload


def write_frame(sink: BinaryIO, frame: Frame) -> None:
    """Write one frame; sink failures surface as TransportError."""
    try:
        sink.write(encode_frame(frame))
    except OSError as exc:
        raise TransportError(f"frame write failed: {exc}") from exc


def _read_exact(source: BinaryIO, count: int) -> bytes:
    chunks = []
    got = 0
    while got < count:
        chunk = source.read(count - got)
        if not chunk:
            raise TruncationError(f"stream ended after {got} of {count} bytes")
        chunks.append(chunk)
        got += len(chunk)
    return chunks[0] if len(chunks) == 1 else b"".join(chunks)


def read_frame(source: BinaryIO) -> Frame:
    """Consume exactly one frame from a byte source positioned at a
    frame boundary."""
    header = _read_exact(source, HEADER_SIZE)
    magic, version, kind_code, job_type, length = HEADER.unpack(header)
    if magic != MAGIC:
        raise ProtocolError(f"bad frame magic {magic!r}")
    if version != VERSION:
        raise ProtocolError(f"unsupported frame version {version}")
    if header[4] != 0:
        raise ProtocolError("reserved header byte must be zero")
    try:
        kind = MessageKind(kind_code)
    except ValueError:
        raise ProtocolError(f"unknown message kind code {kind_code}") from None
    payload = _read_exact(source, length) if length else b""
    return Frame(kind, job_type, payload)


class Endpoint:
    """Transport handle owned by one node.

    send/recv pair frames with their source node; broadcast (boss only)
    delivers one frame to every worker, ordered with respect to other
    boss-to-worker traffic on each channel.
    """

    node_id: int

    def send(self, dest: int, frame: Frame) -> None:
        raise NotImplementedError

    def recv(self) -> tuple[int, Frame]:
        raise NotImplementedError

    def broadcast(self, frame: Frame) -> None:
        raise NotImplementedError

    def close(self, reason: str | None = None) -> None:
        raise NotImplementedError


class _Closed(NamedTuple):
    reason: str | None


class InprocEndpoint(Endpoint):
    """In-process node endpoint: one arrival-ordered inbox fed by all
    peers.  Arrival order keeps receive-from-any fair (no peer can be
    starved) and preserves per-channel FIFO, since each sender appends
    in its own send order."""

    def __init__(self, node_id: int):
        self.node_id = node_id
        self._inbox: SimpleQueue = SimpleQueue()
        self._peers: dict[int, Endpoint] = {}
        self._order: list[int] = []
        self._closed = False

    def _connect(self, peer: Endpoint) -> None:
        self._peers[peer.node_id] = peer
        self._order.append(peer.node_id)

    def _deliver(self, src: int, item) -> bool:
        if self._closed:
            return False
        self._inbox.put((src, item))
        return True

    def send(self, dest: int, frame: Frame) -> None:
        peer = self._peers.get(dest)
        if peer is None:
            raise TransportError(f"node {self.node_id} has no channel to node {dest}")
        if not peer._deliver(self.node_id, frame):
            raise TransportError(f"node {dest} is closed")

    def broadcast(self, frame: Frame) -> None:
        if self.node_id != BOSS_ID:
            raise LifecycleError("broadcast is a boss-only operation")
        for dest in self._order:
            self.send(dest, frame)

    def recv(self) -> tuple[int, Frame]:
        if self._closed:
            raise TransportError("endpoint is closed")
        if not self._order:
            raise TransportError("all peers disconnected")
        src, item = self._inbox.get()
        if isinstance(item, _Closed):
            detail = f": {item.reason}" if item.reason else ""
            raise TransportError(f"node {src} disconnected{detail}")
        return src, item

    def close(self, reason: str | None = None) -> None:
        if self._closed:
            return
        self._closed = True
        for peer in self._peers.values():
            peer._deliver(self.node_id, _Closed(reason))


class SeededInprocEndpoint(Endpoint):
    """Test-oriented in-process endpoint keeping one deque per peer and
    choosing among ready channels with a seeded Random, so protocol
    tests can explore message interleavings reproducibly."""

    def __init__(self, node_id: int, rng: Random):
        self.node_id = node_id
        self._rng = rng
        self._cond = threading.Condition()
        self._channels: dict[int, deque] = {}
        self._order: list[int] = []
        self._dead: set[int] = set()
        self._peers: dict[int, Endpoint] = {}
        self._closed = False

    def _connect(self, peer: Endpoint) -> None:
        self._peers[peer.node_id] = peer
        self._channels[peer.node_id] = deque()
        self._order.append(peer.node_id)

    def _deliver(self, src: int, item) -> bool:
        with self._cond:
            if self._closed:
                return False
            self._channels[src].append(item)
            self._cond.notify()
            return True

    def send(self, dest: int, frame: Frame) -> None:
        peer = self._peers.get(dest)
        if peer is None:
            raise TransportError(f"node {self.node_id} has no channel to node {dest}")
        if not peer._deliver(self.node_id, frame):
            raise TransportError(f"node {dest} is closed")

    def broadcast(self, frame: Frame) -> None:
        if self.node_id != BOSS_ID:
            raise LifecycleError("broadcast is a boss-only operation")
        for dest in self._order:
            self.send(dest, frame)

    def recv(self) -> tuple[int, Frame]:
        with self._cond:
            while True:
                if self._closed:
                    raise TransportError("endpoint is closed")
                ready = [src for src in self._order if self._channels[src]]
                if not ready:
                    if len(self._dead) == len(self._order):
                        raise TransportError("all peers disconnected")
                    self._cond.wait()
                    continue
                src = ready[self._rng.randrange(len(ready))]
                item = self._channels[src].popleft()
                if isinstance(item, _Closed):
                    self._dead.add(src)
                    detail = f": {item.reason}" if item.reason else ""
                    raise TransportError(f"node {src} disconnected{detail}")
                return src, item

    def close(self, reason: str | None = None) -> None:
        with self._cond:
            if self._closed:
                return
            self._closed = True
            self._cond.notify_all()
        for peer in self._peers.values():
            peer._deliver(self.node_id, _Closed(reason))


def inproc_cluster(workers: int, recv_rng: Random | None = None) -> list[Endpoint]:
    """Build boss + worker endpoints wired together; index 0 is the boss.

    recv_rng, when given, seeds the boss's choice among ready channels
    (workers have a single channel, so only the boss choice matters).
    """
    if workers < 0:
        raise ValueError("worker count must not be negative")
    boss: Endpoint
    if recv_rng is None:
        boss = InprocEndpoint(BOSS_ID)
    else:
        boss = SeededInprocEndpoint(BOSS_ID, recv_rng)
    endpoints: list[Endpoint] = [boss]
    for node_id in range(1, workers + 1):
        worker = InprocEndpoint(node_id)
        worker._connect(boss)
        boss._connect(worker)
        endpoints.append(worker)
    return endpoints


def _parse_addr(addr: str) -> tuple[str, int]:
    host, sep, port = addr.rpartition(":")
    if not sep or not host or not port.isdigit():
        raise ValueError(f"address {addr!r} is not host:port")
    return host, int(port)


def pick_free_port(host: str = "127.0.0.1") -> int:
    """Ask the OS for a currently free TCP port."""
    with socket.socket() as probe:
        probe.bind((host, 0))
        return probe.getsockname()[1]


class TcpBossEndpoint(Endpoint):
    """Boss side of the TCP backend.

    Workers are numbered 1..N in connection order; each learns its id
    from a one-frame handshake (kind=INFO_RESPONSE, job_type=id).  One
    reader thread per connection feeds a single arrival-ordered queue,
    which keeps receive-from-any fair and per-channel FIFO intact.
    """

    node_id = BOSS_ID

    def __init__(self, listen: str, workers: int, timeout: float = 30.0):
        if workers < 0:
            raise ValueError("worker count must not be negative")
        host, port = _parse_addr(listen)
        self._conns: dict[int, socket.socket] = {}
        self._queue: SimpleQueue = SimpleQueue()
        self._readers: list[threading.Thread] = []
        self._closed = False
        deadline = time.monotonic() + timeout
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        try:
            listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
            try:
                listener.bind((host, port))
                listener.listen(workers or 1)
            except OSError as exc:
                raise StartupError(f"cannot listen on {listen}: {exc}") from exc
            for node_id in range(1, workers + 1):
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    raise StartupError(
                        f"timed out waiting for worker {node_id} of {workers} to connect"
                    )
                listener.settimeout(remaining)
                try:
                    conn, _ = listener.accept()
                except socket.timeout:
                    raise StartupError(
                        f"timed out waiting for worker {node_id} of {workers} to connect"
                    ) from None
                except OSError as exc:
                    raise StartupError(f"accept failed: {exc}") from exc
                conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
                self._conns[node_id] = conn
                conn.sendall(encode_frame(Frame(MessageKind.INFO_RESPONSE, node_id)))
        except BaseException:
            for conn in self._conns.values():
                conn.close()
            listener.close()
            raise
        listener.close()
        for node_id, conn in self._conns.items():
            reader = threading.Thread(
                target=self._read_loop,
                args=(node_id, conn),
                name=f"parqueue-reader-{node_id}",
                daemon=True,
            )
            reader.start()
            self._readers.append(reader)

    def _read_loop(self, node_id: int, conn: socket.socket) -> None:
        source = conn.makefile("rb")
        try:
            while True:
                frame = read_frame(source)
                self._queue.put((node_id, frame))
        except (TruncationError, ProtocolError, OSError) as exc:
            self._queue.put((node_id, _Closed(str(exc))))

    def send(self, dest: int, frame: Frame) -> None:
        conn = self._conns.get(dest)
        if conn is None:
            raise TransportError(f"no connection to node {dest}")
        try:
            conn.sendall(encode_frame(frame))
        except OSError as exc:
            raise TransportError(f"send to node {dest} failed: {exc}") from exc

    def broadcast(self, frame: Frame) -> None:
        for dest in sorted(self._conns):
            self.send(dest, frame)

    def recv(self) -> tuple[int, Frame]:
        if self._closed:
            raise TransportError("endpoint is closed")
        if not self._conns:
            raise TransportError("all peers disconnected")
        src, item = self._queue.get()
        if isinstance(item, _Closed):
            detail = f": {item.reason}" if item.reason else ""
            raise TransportError(f"worker {src} disconnected{detail}")
        return src, item

    def close(self, reason: str | None = None) -> None:
        self._closed = True
        for conn in self._conns.values():
            try:
                conn.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            conn.close()
        for reader in self._readers:
            reader.join(timeout=5)


class TcpWorkerEndpoint(Endpoint):
    """Worker side of the TCP backend: one socket to the boss."""

    def __init__(self, connect: str, timeout: float = 30.0):
        host, port = _parse_addr(connect)
        deadline = time.monotonic() + timeout
        sock = None
        while True:
            try:
                sock = socket.create_connection((host, port), timeout=max(deadline - time.monotonic(), 0.01))
                break
            except OSError as exc:
                if time.monotonic() >= deadline:
                    raise StartupError(f"cannot connect to boss at {connect}: {exc}") from exc
                time.sleep(0.02)
        sock.settimeout(None)
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self._sock = sock
        self._source = sock.makefile("rb")
        try:
            hello = read_frame(self._source)
        except (TruncationError, OSError) as exc:
            sock.close()
            raise StartupError(f"handshake with boss failed: {exc}") from exc
        if hello.kind is not MessageKind.INFO_RESPONSE:
            sock.close()
            raise ProtocolError(f"expected handshake frame, got {hello.kind.name}")
        self.node_id = hello.job_type

    def send(self, dest: int, frame: Frame) -> None:
        if dest != BOSS_ID:
            raise TransportError(f"workers may only send to the boss, not node {dest}")
        try:
            self._sock.sendall(encode_frame(frame))
        except OSError as exc:
            raise TransportError(f"send to boss failed: {exc}") from exc

    def broadcast(self, frame: Frame) -> None:
        raise LifecycleError("broadcast is a boss-only operation")

    def recv(self) -> tuple[int, Frame]:
        try:
            return BOSS_ID, read_frame(self._source)
        except (TruncationError, OSError) as exc:
            raise TransportError(f"boss disconnected: {exc}") from exc

    def close(self, reason: str | None = None) -> None:
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()
