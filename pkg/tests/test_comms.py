import time

import numpy as np
import pytest
from helpers import free_base_port, run_threads
from hypothesis import given
from hypothesis import strategies as st

from dopt import comms
from dopt.comms import (
    DATA,
    ExchangeTimeout,
    InProcessNetwork,
    Message,
    ProtocolError,
    TcpTransport,
    decode,
    encode,
    frame,
    make_roster,
    neighbors_exchange,
    neighbors_exchange_keyed,
    read_roster,
    write_roster,
)
from dopt.graph import example_six_agents, ring

shapes = st.lists(st.integers(1, 4), min_size=0, max_size=3)
finite = st.floats(allow_nan=False, allow_infinity=True, width=64)


@st.composite
def messages(draw):
    tensors = []
    for _ in range(draw(st.integers(0, 4))):
        shape = tuple(draw(shapes))
        size = int(np.prod(shape)) if shape else 1
        vals = draw(st.lists(finite, min_size=size, max_size=size))
        tensors.append(np.array(vals, dtype=float).reshape(shape))
    return Message(draw(st.integers(0, 2**32 - 1)), draw(st.integers(0, 2**64 - 1)), DATA, tensors)


@given(messages())
def test_encode_decode_byte_identity(msg):
    data = encode(msg)
    again = encode(decode(data))
    assert again == data
    back = decode(data)
    assert back.sender == msg.sender and back.round == msg.round
    for a, b in zip(back.payload, msg.payload):
        assert a.shape == b.shape and a.tobytes() == b.tobytes()


def test_header_layout():
    msg = Message(7, 3, DATA, [np.array([1.0, 2.0])])
    data = encode(msg)
    assert data[:4] == b"DOPT" and data[4] == 1 and data[5] == DATA
    assert int.from_bytes(data[6:10], "little") == 7
    assert int.from_bytes(data[10:18], "little") == 3
    assert int.from_bytes(data[18:20], "little") == 1
    assert data[20] == 1 and int.from_bytes(data[21:25], "little") == 2
    assert np.frombuffer(data[25:], "<f8").tolist() == [1.0, 2.0]
    f = frame(msg)
    assert int.from_bytes(f[:4], "little") == len(data) and f[4:] == data


def test_decode_rejects_garbage():
    data = encode(Message(0, 0, DATA, [np.ones(3)]))
    with pytest.raises(ProtocolError):
        decode(b"XXXX" + data[4:])
    with pytest.raises(ProtocolError):
        decode(data[:-4])
    with pytest.raises(ProtocolError):
        decode(data + b"\0")
    with pytest.raises(ProtocolError):
        decode(data[:4] + bytes([9]) + data[5:])  # unknown version
    with pytest.raises(ProtocolError):
        Message(0, 0, 99, [])


def exchange_all(graph, payloads, net=None):
    net = net or InProcessNetwork(graph.n, timeout=5)
    fns = [lambda i=i: neighbors_exchange(net.transport(i), payloads[i], graph.in_neighbors(i),
                                          graph.out_neighbors(i), 0) for i in range(graph.n)]
    return run_threads(fns)


def test_six_agent_exchange_keys():
    g = example_six_agents()
    got = exchange_all(g, [np.array([i, -i], float) for i in range(6)])
    assert set(got[1]) == {2, 3}
    for i in range(6):
        assert set(got[i]) == set(g.in_neighbors(i))
        for j, payload in got[i].items():
            assert payload[0].tolist() == [j, -j]


def test_no_in_neighbors_gives_empty_map():
    net = InProcessNetwork(2, timeout=1)
    assert neighbors_exchange(net.transport(0), np.ones(1), (), (1,), 0) == {}


def test_three_ring_one_round():
    got = exchange_all(ring(3), [np.array([float(i)]) for i in range(3)])
    for i in range(3):
        j = (i - 1) % 3
        assert list(got[i]) == [j] and got[i][j][0].tolist() == [j]


def test_exchange_is_deterministic():
    g = example_six_agents()
    pay = [np.arange(3.0) * i for i in range(6)]
    a, b = exchange_all(g, pay), exchange_all(g, pay)
    for x, y in zip(a, b):
        assert x.keys() == y.keys()
        assert all(x[k][0].tobytes() == y[k][0].tobytes() for k in x)


def test_keyed_pair():
    net = InProcessNetwork(2, timeout=5)
    fa = lambda: neighbors_exchange_keyed(net.transport(0), {1: np.array([1.0])}, (1,), (1,), 0)
    fb = lambda: neighbors_exchange_keyed(net.transport(1), {0: np.array([2.0])}, (0,), (0,), 0)
    a, b = run_threads([fa, fb])
    assert a[1][0].tolist() == [2.0] and b[0][0].tolist() == [1.0]


def test_keyed_missing_key_rejected_before_send():
    net = InProcessNetwork(3, timeout=1)
    with pytest.raises(ValueError):
        neighbors_exchange_keyed(net.transport(0), {1: np.ones(1)}, (), (1, 2), 0)
    assert net.mailboxes[1].pending_rounds(DATA) == set()


def test_keyed_six_agents_payload_is_sender():
    g = example_six_agents()
    net = InProcessNetwork(6, timeout=5)
    fns = [lambda i=i: neighbors_exchange_keyed(net.transport(i), {j: np.array([float(i)]) for j in g.out_neighbors(i)},
                                                g.in_neighbors(i), g.out_neighbors(i), 0) for i in range(6)]
    got = run_threads(fns)
    received = {(j, i) for i in range(6) for j in got[i]}
    assert received == set(g.edges)
    assert all(got[i][j][0][0] == j for i in range(6) for j in got[i])


def test_timeout_names_missing_neighbor():
    net = InProcessNetwork(3, timeout=0.2)
    with pytest.raises(ExchangeTimeout) as info:
        neighbors_exchange(net.transport(0), np.ones(1), (1, 2), (), 0)
    assert info.value.missing == [1, 2]
    assert "[1, 2]" in str(info.value)


def test_round_must_increase():
    net = InProcessNetwork(2, timeout=0.5)
    t0, t1 = net.transport(0), net.transport(1)
    t0.send(1, Message(0, 5, DATA, []))
    t0.send(1, Message(0, 4, DATA, []))
    with pytest.raises(ProtocolError):
        t1.receive_from(0, 7)


def test_barrier_single_agent():
    net = InProcessNetwork(1)
    t = time.monotonic()
    comms.barrier(net.transport(0), 0)
    assert time.monotonic() - t < 0.1


def test_barrier_releases_after_last_arrival():
    net = InProcessNetwork(4, timeout=5)
    arrive, release = [0.0] * 4, [0.0] * 4

    def agent(i):
        time.sleep(0.05 * i)
        arrive[i] = time.monotonic()
        comms.barrier(net.transport(i), 0)
        release[i] = time.monotonic()

    run_threads([lambda i=i: agent(i) for i in range(4)])
    assert min(release) >= max(arrive)


def test_barrier_round_mismatch():
    net = InProcessNetwork(2, timeout=2)
    with pytest.raises(ProtocolError):
        run_threads([lambda: comms.barrier(net.transport(0), 0), lambda: (time.sleep(0.05), comms.barrier(net.transport(1), 1))])


def test_roster_roundtrip(tmp_path):
    r = make_roster(3, base_port=5000)
    write_roster(r, tmp_path / "r.txt")
    assert read_roster(tmp_path / "r.txt") == r
    (tmp_path / "bad.txt").write_text("0 localhost\n")
    with pytest.raises(ValueError):
        read_roster(tmp_path / "bad.txt")


def tcp_exchange(graph, payloads, rounds=2):
    roster = make_roster(graph.n, base_port=free_base_port(graph.n))
    transports = [TcpTransport(i, roster, timeout=10) for i in range(graph.n)]
    try:
        def agent(i):
            out = []
            for r in range(rounds):
                out.append(neighbors_exchange(transports[i], payloads[i] * (r + 1), graph.in_neighbors(i),
                                              graph.out_neighbors(i), r))
                transports[i].barrier(r)
            return out
        return run_threads([lambda i=i: agent(i) for i in range(graph.n)])
    finally:
        for t in transports:
            t.close()


def test_tcp_matches_inprocess_bit_for_bit():
    g = example_six_agents()
    rng = np.random.default_rng(0)
    pay = [rng.normal(size=(2, 3)) for _ in range(6)]
    tcp = tcp_exchange(g, pay)
    local = exchange_all(g, [p for p in pay])
    for i in range(6):
        assert tcp[i][0].keys() == local[i].keys()
        for j in local[i]:
            assert tcp[i][0][j][0].tobytes() == local[i][j][0].tobytes()
            assert tcp[i][1][j][0].tobytes() == (pay[j] * 2).tobytes()


def test_tcp_timeout():
    roster = make_roster(2, base_port=free_base_port(2))
    t0 = TcpTransport(0, roster, timeout=0.3)
    t1 = TcpTransport(1, roster, timeout=0.3)
    try:
        with pytest.raises(ExchangeTimeout):
            neighbors_exchange(t0, np.ones(1), (1,), (1,), 0)
    finally:
        t0.close()
        t1.close()
