from __future__ import annotations

import io
import threading
import time

import pytest

from spacebus.broker.core import Broker
from spacebus.broker.listener import BrokerClient, BrokerListener
from spacebus.broker.wire import decode_frame, encode_frame, read_frame
from spacebus.errors import FrameCodecError


class TestCodec:
    def test_roundtrip(self):
        frame = encode_frame("a.b.c", {"k": "v", "n": "2"}, b"\x00\x01payload")
        topic, headers, payload = decode_frame(frame[4:])
        assert topic == "a.b.c"
        assert headers == {"k": "v", "n": "2"}
        assert payload == b"\x00\x01payload"

    def test_empty_headers_and_payload(self):
        frame = encode_frame("t", {}, b"")
        topic, headers, payload = decode_frame(frame[4:])
        assert (topic, headers, payload) == ("t", {}, b"")

    def test_unicode_topic_and_headers(self):
        frame = encode_frame("espacio.música", {"título": "señal"}, b"")
        topic, headers, _ = decode_frame(frame[4:])
        assert topic == "espacio.música"
        assert headers["título"] == "señal"

    def test_stream_read(self):
        buf = io.BytesIO(
            encode_frame("one", {}, b"1") + encode_frame("two", {}, b"22")
        )
        assert read_frame(buf)[0] == "one"
        assert read_frame(buf)[2] == b"22"
        assert read_frame(buf) is None  # clean EOF

    def test_partial_frame_is_an_error(self):
        whole = encode_frame("topic", {"a": "b"}, b"data")
        buf = io.BytesIO(whole[:-2])
        with pytest.raises(FrameCodecError):
            read_frame(buf)

    def test_truncated_length_prefix(self):
        buf = io.BytesIO(b"\x00\x00")
        with pytest.raises(FrameCodecError):
            read_frame(buf)

    def test_oversize_guard(self):
        big = (17 * 1024 * 1024).to_bytes(4, "big")
        buf = io.BytesIO(big + b"x")
        with pytest.raises(FrameCodecError):
            read_frame(buf)

    def test_garbage_body(self):
        with pytest.raises(FrameCodecError):
            decode_frame(b"\xff\xff")


@pytest.fixture
def served_broker():
    broker = Broker(dispatch="threaded")
    listener = BrokerListener(broker)
    yield broker, listener
    listener.close()
    broker.close()


def wait_for(pred, timeout=5.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        if pred():
            return True
        time.sleep(0.005)
    return pred()


class TestListener:
    def test_publish_reaches_local_subscriber(self, served_broker):
        broker, listener = served_broker
        got = []
        seen = threading.Event()

        def cb(m):
            got.append(m)
            seen.set()

        broker.subscribe("remote.#", mode="push", callback=cb)
        client = BrokerClient(listener.host, listener.port)
        try:
            client.publish("remote.hello", b"hi", {"source": "test"})
            assert seen.wait(5.0)
            assert got[0].payload == b"hi"
            assert got[0].headers.get("source") == "test"
            assert got[0].publisher.startswith("conn-")
        finally:
            client.close()

    def test_subscribe_push_roundtrip(self, served_broker):
        broker, listener = served_broker
        client = BrokerClient(listener.host, listener.port)
        got = []
        seen = threading.Event()
        try:
            client.subscribe("a.#", lambda t, h, p: (got.append((t, p)), seen.set()))
            broker.publish("a.x", b"data")
            assert seen.wait(5.0)
            assert got == [("a.x", b"data")]
        finally:
            client.close()

    def test_two_clients_talk_through_broker(self, served_broker):
        _, listener = served_broker
        c1 = BrokerClient(listener.host, listener.port)
        c2 = BrokerClient(listener.host, listener.port)
        got = []
        seen = threading.Event()
        try:
            c2.subscribe("chat.#", lambda t, h, p: (got.append(p), seen.set()))
            c1.publish("chat.msg", b"over the wire")
            assert seen.wait(5.0)
            assert got == [b"over the wire"]
        finally:
            c1.close()
            c2.close()

    def test_fetch_over_wire(self, served_broker):
        broker, listener = served_broker
        client = BrokerClient(listener.host, listener.port)
        try:
            sub = client.subscribe_fetch("jobs.#")
            broker.publish("jobs.a", b"j1")
            broker.publish("jobs.b", b"j2")
            assert wait_for(lambda: broker_queue_len(broker) == 2)
            msgs = []
            deadline = time.monotonic() + 5.0
            while len(msgs) < 2 and time.monotonic() < deadline:
                m = client.fetch(sub)
                if m is None:
                    time.sleep(0.01)
                    continue
                msgs.append(m)
            assert [m[2] for m in msgs] == [b"j1", b"j2"]
            assert client.fetch(sub) is None
        finally:
            client.close()

    def test_cancel_over_wire(self, served_broker):
        broker, listener = served_broker
        client = BrokerClient(listener.host, listener.port)
        try:
            sub = client.subscribe_fetch("x.#")
            client.cancel(sub)
            assert wait_for(lambda: len(broker._subs) == 0)
        finally:
            client.close()

    def test_history_declare_over_wire(self, served_broker):
        broker, listener = served_broker
        client = BrokerClient(listener.host, listener.port)
        got = []
        seen = threading.Event()
        try:
            client.declare_history("h.#", 5)
            client.publish("h.one", b"cached")

            def cb(t, h, p):
                got.append(p)
                seen.set()

            assert wait_for(lambda: history_total(broker) == 1)
            client.subscribe("h.#", cb, history_replay=True)
            assert seen.wait(5.0)
            assert got == [b"cached"]
        finally:
            client.close()

    def test_disconnect_cleans_subscriptions(self, served_broker):
        broker, listener = served_broker
        client = BrokerClient(listener.host, listener.port)
        client.subscribe("gone.#", lambda t, h, p: None)
        assert wait_for(lambda: len(broker._subs) == 1)
        client.close()
        assert wait_for(lambda: len(broker._subs) == 0)


def broker_queue_len(broker) -> int:
    return sum(len(s.queue) for s in broker._subs)


def history_total(broker) -> int:
    return sum(len(h.ring) for h in broker._history.values())
