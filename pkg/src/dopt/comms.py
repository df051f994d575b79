"""
Synchronous neighbor exchange over pluggable transports.

Wire format (little-endian), one frame per message::

    u32  byte count of everything that follows
    4s   magic b"DOPT"
    u8   version (1)
    u8   kind
    u32  sender
    u64  round
    u16  tensor count
    per tensor: u8 rank, rank x u32 dims, float64 values (row-major)

:func:`encode` produces the message bytes without the length prefix;
:func:`frame` adds it.
"""

import socket
import struct
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"DOPT"
VERSION = 1
_HEADER = struct.Struct("<4sBBIQH")
_LEN = struct.Struct("<I")

DATA = 0
BARRIER = 1
# instance files reuse the envelope: one header record, then one record per agent
INSTANCE_HEADER = 2
INSTANCE_AGENT = 3

# tensor-count schema per message kind (None = any)
KIND_SCHEMAS = {DATA: None, BARRIER: 0, INSTANCE_HEADER: None, INSTANCE_AGENT: None}

DEFAULT_TIMEOUT = 30.0


class ProtocolError(RuntimeError):
    pass


class ExchangeTimeout(TimeoutError):
    def __init__(self, agent, missing, round_, kind=DATA):
        what = "barrier" if kind == BARRIER else "exchange"
        super().__init__("agent {}: {} round {} timed out waiting for neighbor(s) {}".format(
            agent, what, round_, sorted(missing)))
        self.agent = agent
        self.missing = sorted(missing)
        self.round = round_


class NetworkAborted(RuntimeError):
    pass


@dataclass
class Message:
    sender: int
    round: int
    kind: int = DATA
    payload: list = field(default_factory=list)

    def __post_init__(self):
        self.payload = [np.asarray(t, dtype=np.float64) for t in self.payload]
        schema = KIND_SCHEMAS.get(self.kind, None)
        if self.kind not in KIND_SCHEMAS:
            raise ProtocolError("unregistered message kind {}".format(self.kind))
        if schema is not None and len(self.payload) != schema:
            raise ProtocolError("kind {} carries {} tensors, got {}".format(self.kind, schema, len(self.payload)))
        if self.round < 0:
            raise ProtocolError("negative round")


def encode(msg):
    parts = [_HEADER.pack(MAGIC, VERSION, msg.kind, msg.sender, msg.round, len(msg.payload))]
    for t in msg.payload:
        parts.append(struct.pack("<B", t.ndim))
        if t.ndim:
            parts.append(struct.pack("<{}I".format(t.ndim), *t.shape))
        parts.append(np.ascontiguousarray(t, dtype="<f8").tobytes())
    return b"".join(parts)


def decode(data):
    data = memoryview(data)
    if len(data) < _HEADER.size:
        raise ProtocolError("truncated header ({} bytes)".format(len(data)))
    magic, version, kind, sender, round_, count = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise ProtocolError("bad magic {!r}".format(bytes(magic)))
    if version != VERSION:
        raise ProtocolError("unsupported wire version {}".format(version))
    off = _HEADER.size
    payload = []
    for _ in range(count):
        (rank,) = struct.unpack_from("<B", data, off)
        off += 1
        shape = struct.unpack_from("<{}I".format(rank), data, off) if rank else ()
        off += 4 * rank
        size = int(np.prod(shape)) if rank else 1
        nbytes = 8 * size
        if off + nbytes > len(data):
            raise ProtocolError("truncated tensor payload")
        t = np.frombuffer(data[off:off + nbytes], dtype="<f8").astype(np.float64).reshape(shape)
        payload.append(t)
        off += nbytes
    if off != len(data):
        raise ProtocolError("{} trailing bytes after message".format(len(data) - off))
    return Message(sender, round_, kind, payload)


def frame(msg):
    body = encode(msg)
    return _LEN.pack(len(body)) + body


def as_tensor_list(payload):
    if isinstance(payload, (list, tuple)):
        return [np.asarray(t, dtype=np.float64) for t in payload]
    return [np.asarray(payload, dtype=np.float64)]


class Mailbox:
    """Received messages keyed by ``(sender, kind, round)``."""

    def __init__(self):
        self._cond = threading.Condition()
        self._box = {}
        self._last = {}
        self._error = None

    def deliver(self, msg):
        with self._cond:
            key = (msg.sender, msg.kind)
            last = self._last.get(key, -1)
            if msg.round <= last:
                self._error = ProtocolError("round {} from agent {} after round {} (kind {})".format(
                    msg.round, msg.sender, last, msg.kind))
            self._last[key] = msg.round
            self._box[(msg.sender, msg.kind, msg.round)] = msg
            self._cond.notify_all()

    def fail(self, exc):
        with self._cond:
            self._error = exc
            self._cond.notify_all()

    def take(self, sender, kind, round_, deadline):
        key = (sender, kind, round_)
        with self._cond:
            while key not in self._box:
                if self._error is not None:
                    raise self._error
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    return None
                self._cond.wait(remaining)
            return self._box.pop(key)

    def pending_rounds(self, kind):
        with self._cond:
            return {(s, r) for (s, k, r) in self._box if k == kind}


class Transport:
    """Reliable, per-sender FIFO point-to-point channel for one agent."""

    agent_id = None
    n_agents = None
    timeout = DEFAULT_TIMEOUT

    def send(self, to, msg):
        raise NotImplementedError

    def receive_from(self, sender, round_, kind=DATA, timeout=None):
        deadline = time.monotonic() + (self.timeout if timeout is None else timeout)
        msg = self.mailbox.take(sender, kind, round_, deadline)
        if msg is None:
            raise ExchangeTimeout(self.agent_id, [sender], round_, kind)
        return msg

    def barrier(self, round_):
        """Block until every agent has entered barrier ``round_``."""
        others = [j for j in range(self.n_agents) if j != self.agent_id]
        for j in others:
            self.send(j, Message(self.agent_id, round_, BARRIER))
        deadline = time.monotonic() + self.timeout
        for j in others:
            if self.mailbox.take(j, BARRIER, round_, deadline) is None:
                stray = {r for s, r in self.mailbox.pending_rounds(BARRIER) if s == j}
                if stray:
                    raise ProtocolError("agent {} is in barrier round {} but agent {} sent {}".format(
                        self.agent_id, round_, j, sorted(stray)))
                raise ExchangeTimeout(self.agent_id, [j], round_, BARRIER)

    def close(self):
        pass


# -- in-process transport ----------------------------------------------------

class _SharedBarrier:
    def __init__(self, n):
        self.n = n
        self._cond = threading.Condition()
        self._arrived = []
        self._generation = 0
        self._error = None

    def wait(self, agent, round_, timeout):
        with self._cond:
            if self._error is not None:
                raise self._error
            gen = self._generation
            if self._arrived and self._arrived[0][1] != round_:
                self._error = ProtocolError("agent {} entered barrier round {} while others are in round {}".format(
                    agent, round_, self._arrived[0][1]))
                self._cond.notify_all()
                raise self._error
            self._arrived.append((agent, round_))
            if len(self._arrived) == self.n:
                self._arrived = []
                self._generation += 1
                self._cond.notify_all()
                return
            deadline = time.monotonic() + timeout
            while self._generation == gen:
                if self._error is not None:
                    raise self._error
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    missing = set(range(self.n)) - {a for a, _ in self._arrived}
                    raise ExchangeTimeout(agent, missing, round_, BARRIER)
                self._cond.wait(remaining)

    def fail(self, exc):
        with self._cond:
            self._error = exc
            self._cond.notify_all()


class InProcessNetwork:
    """Deterministic in-memory channels between ``n`` agents of one process."""

    def __init__(self, n, timeout=DEFAULT_TIMEOUT):
        self.n = n
        self.timeout = timeout
        self.mailboxes = [Mailbox() for _ in range(n)]
        self._barrier = _SharedBarrier(n)

    def transport(self, agent_id):
        return InProcessTransport(self, agent_id)

    def abort(self, exc=None):
        exc = exc or NetworkAborted("network aborted")
        for mb in self.mailboxes:
            mb.fail(exc)
        self._barrier.fail(exc)


class InProcessTransport(Transport):
    def __init__(self, network, agent_id):
        self.network = network
        self.agent_id = agent_id
        self.n_agents = network.n
        self.timeout = network.timeout
        self.mailbox = network.mailboxes[agent_id]

    def send(self, to, msg):
        # copy so the receiver never aliases the sender's buffers
        self.network.mailboxes[to].deliver(Message(msg.sender, msg.round, msg.kind, [t.copy() for t in msg.payload]))

    def barrier(self, round_):
        self.network._barrier.wait(self.agent_id, round_, self.timeout)


# -- TCP transport -------------------------------------------------------------

def read_roster(path):
    """``id host port`` per line."""
    roster = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ValueError("{}:{}: expected 'id host port', got {!r}".format(path, lineno, line))
        roster[int(parts[0])] = (parts[1], int(parts[2]))
    return roster


def write_roster(roster, path):
    Path(path).write_text("".join("{} {} {}\n".format(i, h, p) for i, (h, p) in sorted(roster.items())))


def make_roster(n, host="127.0.0.1", base_port=47000):
    return {i: (host, base_port + i) for i in range(n)}


def _recv_exact(sock, k):
    buf = bytearray()
    while len(buf) < k:
        chunk = sock.recv(k - len(buf))
        if not chunk:
            return None
        buf.extend(chunk)
    return bytes(buf)


class TcpTransport(Transport):
    """One listening socket per agent; one outgoing connection per peer."""

    def __init__(self, agent_id, roster, timeout=DEFAULT_TIMEOUT):
        self.agent_id = agent_id
        self.roster = dict(roster)
        self.n_agents = len(self.roster)
        self.timeout = timeout
        self.mailbox = Mailbox()
        self._out = {}
        self._out_lock = threading.Lock()
        self._closed = threading.Event()
        self._readers = []
        host, port = self.roster[agent_id]
        self._server = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._server.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._server.bind((host, port))
        self._server.listen(max(8, self.n_agents))
        self._server.settimeout(0.2)
        self._acceptor = threading.Thread(target=self._accept_loop, daemon=True,
                                          name="dopt-accept-{}".format(agent_id))
        self._acceptor.start()

    def _accept_loop(self):
        while not self._closed.is_set():
            try:
                conn, _ = self._server.accept()
            except socket.timeout:
                continue
            except OSError:
                return
            conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            t = threading.Thread(target=self._read_loop, args=(conn,), daemon=True)
            t.start()
            self._readers.append((t, conn))

    def _read_loop(self, conn):
        conn.settimeout(None)
        try:
            while True:
                head = _recv_exact(conn, _LEN.size)
                if head is None:
                    return
                (length,) = _LEN.unpack(head)
                body = _recv_exact(conn, length)
                if body is None:
                    self.mailbox.fail(ProtocolError("connection closed mid-frame"))
                    return
                self.mailbox.deliver(decode(body))
        except ProtocolError as exc:
            self.mailbox.fail(exc)
        except OSError:
            return

    def _connection(self, to):
        with self._out_lock:
            entry = self._out.get(to)
            if entry is None:
                host, port = self.roster[to]
                deadline = time.monotonic() + self.timeout
                while True:
                    try:
                        sock = socket.create_connection((host, port), timeout=self.timeout)
                        break
                    except OSError:
                        if time.monotonic() > deadline:
                            raise ExchangeTimeout(self.agent_id, [to], -1)
                        time.sleep(0.05)
                sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
                entry = (sock, threading.Lock())
                self._out[to] = entry
            return entry

    def send(self, to, msg):
        sock, lock = self._connection(to)
        data = frame(msg)
        with lock:
            sock.sendall(data)

    def close(self):
        self._closed.set()
        for sock, _ in self._out.values():
            try:
                sock.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            sock.close()
        self._out.clear()
        try:
            self._server.close()
        except OSError:
            pass
        for _, conn in self._readers:
            try:
                conn.close()
            except OSError:
                pass
        self._acceptor.join(timeout=1.0)


# -- exchange primitives -------------------------------------------------------

def neighbors_exchange(transport, payload, in_neighbors, out_neighbors, round_):
    """Send one payload to every out-neighbor; collect one from every in-neighbor."""
    tensors = as_tensor_list(payload)
    msg = Message(transport.agent_id, round_, DATA, tensors)
    for j in out_neighbors:
        transport.send(j, msg)
    return _collect(transport, in_neighbors, round_)


def neighbors_exchange_keyed(transport, payloads, in_neighbors, out_neighbors, round_):
    """Like :func:`neighbors_exchange` with a distinct payload per out-neighbor."""
    keys = set(payloads)
    if keys != set(out_neighbors):
        raise ValueError("agent {}: keyed payloads for {} but out-neighbors are {}".format(
            transport.agent_id, sorted(keys), sorted(out_neighbors)))
    msgs = {j: Message(transport.agent_id, round_, DATA, as_tensor_list(payloads[j])) for j in out_neighbors}
    for j in out_neighbors:
        transport.send(j, msgs[j])
    return _collect(transport, in_neighbors, round_)


def _collect(transport, in_neighbors, round_):
    deadline = time.monotonic() + transport.timeout
    out = {}
    missing = []
    for j in in_neighbors:
        msg = transport.mailbox.take(j, DATA, round_, deadline)
        if msg is None:
            missing.append(j)
            continue
        out[j] = msg.payload
    if missing:
        raise ExchangeTimeout(transport.agent_id, missing, round_)
    return out


def barrier(transport, round_):
    transport.barrier(round_)
