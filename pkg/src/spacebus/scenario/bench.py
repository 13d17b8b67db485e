"""Delivery-latency benchmark for the broker.

Publishes timestamped messages at a paced rate and measures the wall
time from publish to callback. The in-process transport exercises the
threaded dispatch path; the loopback transport adds one TCP hop out and
back through the frame listener.
"""

from __future__ import annotations

import math
import struct
import threading
import time
from dataclasses import dataclass
from typing import Any

from ..broker.core import Broker
from ..broker.listener import BrokerClient, BrokerListener
from ..errors import InsufficientSamplesError, InvalidArgumentError, InvalidRateError

MIN_SAMPLES = 1000
WARMUP_MESSAGES = 50
BENCH_TOPIC = "bench.latency"
WARMUP_TOPIC = "bench.warmup"


@dataclass
class BenchReport:
    transport: str
    n: int
    received: int
    size: int
    rate_hz: float
    elapsed_s: float
    p50_ms: float
    p99_ms: float
    p995_ms: float
    max_ms: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "transport": self.transport,
            "n": self.n,
            "received": self.received,
            "size": self.size,
            "rate_hz": self.rate_hz,
            "elapsed_s": round(self.elapsed_s, 3),
            "p50_ms": round(self.p50_ms, 4),
            "p99_ms": round(self.p99_ms, 4),
            "p995_ms": round(self.p995_ms, 4),
            "max_ms": round(self.max_ms, 4),
        }

    def summary(self) -> str:
        return (
            f"{self.transport}: n={self.received}/{self.n} size={self.size}B "
            f"rate={self.rate_hz:g}Hz elapsed={self.elapsed_s:.2f}s | "
            f"p50={self.p50_ms:.3f}ms p99={self.p99_ms:.3f}ms "
            f"p99.5={self.p995_ms:.3f}ms max={self.max_ms:.3f}ms"
        )


def _percentile(sorted_vals: list[float], p: float) -> float:
    """Nearest-rank percentile over an ascending list."""
    if not sorted_vals:
        return float("nan")
    rank = max(1, math.ceil(p / 100.0 * len(sorted_vals)))
    return sorted_vals[rank - 1]


def _make_payload(size: int) -> bytearray:
    buf = bytearray(size)
    return buf


def _stamp(buf: bytearray) -> bytes:
    struct.pack_into(">Q", buf, 0, time.perf_counter_ns())
    return bytes(buf)


def _latency_ms(payload: bytes) -> float:
    (sent,) = struct.unpack_from(">Q", payload, 0)
    return (time.perf_counter_ns() - sent) / 1e6


def _paced_send(n: int, rate_hz: float, send) -> float:
    """Send n messages at rate_hz; returns elapsed seconds.

    Waiting always yields the interpreter (sleep, never a hard spin), so
    the delivery threads being measured are not starved by the pacer.
    """
    interval = 1.0 / rate_hz
    start = time.perf_counter()
    for i in range(n):
        target = start + i * interval
        while True:
            lag = target - time.perf_counter()
            if lag <= 0:
                break
            time.sleep(lag if lag > 0.0002 else 0)
        send()
    return time.perf_counter() - start


def bench_latency(
    *,
    n: int,
    size: int,
    rate_hz: float,
    transport: str = "inproc",
    timeout_s: float | None = None,
) -> BenchReport:
    if rate_hz <= 0:
        raise InvalidRateError(f"rate must be positive, got {rate_hz}")
    if n < MIN_SAMPLES:
        raise InsufficientSamplesError(
            f"need at least {MIN_SAMPLES} samples for stable tail percentiles, got {n}"
        )
    if size < 8:
        raise InvalidArgumentError("payload size must be at least 8 bytes for the timestamp")
    if transport not in ("inproc", "loopback"):
        raise InvalidArgumentError(f"unknown transport {transport!r}")

    if timeout_s is None:
        timeout_s = n / rate_hz + 30.0

    latencies: list[float] = []
    done = threading.Event()
    lock = threading.Lock()

    def on_sample(payload: bytes) -> None:
        ms = _latency_ms(payload)
        with lock:
            latencies.append(ms)
            if len(latencies) >= n:
                done.set()

    buf = _make_payload(size)

    if transport == "inproc":
        broker = Broker(dispatch="threaded")
        try:
            broker.subscribe(
                BENCH_TOPIC,
                mode="push",
                callback=lambda m: on_sample(m.payload),
                queue_capacity=n,
            )
            for _ in range(WARMUP_MESSAGES):
                broker.publish(WARMUP_TOPIC, _stamp(buf))
            elapsed = _paced_send(n, rate_hz, lambda: broker.publish(BENCH_TOPIC, _stamp(buf)))
            done.wait(timeout_s)
        finally:
            broker.close()
    else:
        broker = Broker(dispatch="threaded", default_queue_capacity=max(4096, n))
        listener = BrokerListener(broker)
        sub = BrokerClient(listener.host, listener.port)
        pub = BrokerClient(listener.host, listener.port)
        try:
            sub.subscribe(BENCH_TOPIC, lambda _t, _h, payload: on_sample(payload))
            for _ in range(WARMUP_MESSAGES):
                pub.publish(WARMUP_TOPIC, _stamp(buf))
            elapsed = _paced_send(n, rate_hz, lambda: pub.publish(BENCH_TOPIC, _stamp(buf)))
            done.wait(timeout_s)
        finally:
            pub.close()
            sub.close()
            listener.close()
            broker.close()

    with lock:
        vals = sorted(latencies)
    return BenchReport(
        transport=transport,
        n=n,
        received=len(vals),
        size=size,
        rate_hz=rate_hz,
        elapsed_s=elapsed,
        p50_ms=_percentile(vals, 50.0),
        p99_ms=_percentile(vals, 99.0),
        p995_ms=_percentile(vals, 99.5),
        max_ms=_percentile(vals, 100.0),
    )
