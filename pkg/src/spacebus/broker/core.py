"""Topic-exchange message broker.

Supports the four delivery paradigms the middleware is built on:

* asynchronous push (callback per subscription),
* consumer-paced fetch (private queue, pull one message at a time),
* round-robin groups (a set of push subscribers sharing one stream),
* history-cache exchanges (recent matching messages replayed to new
  subscribers before any live traffic).

The broker runs in one of two dispatch modes. ``inline`` delivers push
callbacks synchronously on the publisher's stack through a single FIFO
drain loop, which makes runs fully deterministic; the scenario harness
uses it. ``threaded`` gives every push subscription its own dispatcher
thread so publishers never block on slow consumers; servers and the
latency benchmark use it.
"""

from __future__ import annotations

import logging
import threading
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

from ..clock import Clock, SystemClock
from ..errors import (
    InvalidCapacityError,
    InvalidSubscriptionError,
    ModeMismatchError,
    RejectedPublishError,
    StaleHandleError,
)
from ..topics import Topic, TopicPattern, matches, parse_pattern, parse_topic

logger = logging.getLogger(__name__)

DEFAULT_QUEUE_CAPACITY = 4096


@dataclass(frozen=True)
class Message:
    """The universal event/command envelope routed by the broker."""

    topic: Topic
    payload: bytes = b""
    headers: dict[str, str] = field(default_factory=dict)
    publish_time: int = 0  # ns, broker clock
    seq: int = 0  # per-publisher monotonic counter
    publisher: str = "anonymous"
    global_seq: int = 0  # broker-wide publish order

    def __str__(self) -> str:
        return f"[{self.topic}] #{self.publisher}/{self.seq} {len(self.payload)}B"


class SubscriptionHandle:
    """Live subscription; yields messages per its mode until cancelled."""

    def __init__(
        self,
        broker: "Broker",
        pattern: TopicPattern,
        mode: str,
        group: Optional[str],
        history_replay: bool,
        capacity: int,
        callback: Optional[Callable[[Message], None]],
    ):
        self.broker = broker
        self.pattern = pattern
        self.mode = mode
        self.group = group
        self.history_replay = history_replay
        self.callback = callback
        self.capacity = capacity
        self.queue: deque[Message] = deque()
        self.dropped = 0
        self.delivered = 0
        self.cancelled = False
        self.on_enqueue: Optional[Callable[[], None]] = None
        # threaded mode plumbing
        self._cond: Optional[threading.Condition] = None
        self._thread: Optional[threading.Thread] = None
        self._delivering = False

    def fetch(self) -> Optional[Message]:
        """Pop and return the oldest queued message, or None when empty."""
        if self.cancelled:
            raise StaleHandleError("handle was cancelled")
        if self.mode != "fetch":
            raise ModeMismatchError("fetch() requires a fetch-mode subscription")
        with self.broker._lock:
            if self.queue:
                self.delivered += 1
                return self.queue.popleft()
            return None

    def cancel(self) -> None:
        """Remove the subscription; no delivery happens after return."""
        self.broker._cancel(self)

    def _enqueue(self, msg: Message) -> None:
        # caller holds the broker lock
        if len(self.queue) >= self.capacity:
            self.queue.popleft()
            self.dropped += 1
        self.queue.append(msg)
        if self.on_enqueue is not None:
            self.on_enqueue()

    def __repr__(self) -> str:
        state = "cancelled" if self.cancelled else "live"
        return f"SubscriptionHandle({self.pattern}, {self.mode}, {state})"


class _Group:
    """Round-robin set: one stream, each message to exactly one member."""

    def __init__(self, name: str, pattern: TopicPattern):
        self.name = name
        self.pattern = pattern
        self.members: list[SubscriptionHandle] = []
        self.next = 0

    def pick(self) -> Optional[SubscriptionHandle]:
        if not self.members:
            return None
        member = self.members[self.next % len(self.members)]
        self.next += 1
        return member


class _HistoryExchange:
    def __init__(self, pattern: TopicPattern, capacity: int):
        self.pattern = pattern
        self.ring: deque[Message] = deque(maxlen=capacity)

    def redeclare(self, capacity: int) -> None:
        self.ring = deque(self.ring, maxlen=capacity)


class Broker:
    """In-process topic exchange with an optional wire listener on top."""

    def __init__(
        self,
        *,
        clock: Optional[Clock] = None,
        dispatch: str = "threaded",
        default_queue_capacity: int = DEFAULT_QUEUE_CAPACITY,
    ):
        if dispatch not in ("inline", "threaded"):
            raise ValueError(f"unknown dispatch mode {dispatch!r}")
        self.clock: Clock = clock if clock is not None else SystemClock()
        self.dispatch = dispatch
        self.default_queue_capacity = default_queue_capacity
        self._lock = threading.RLock()
        self._subs: list[SubscriptionHandle] = []
        self._groups: dict[str, _Group] = {}
        self._history: dict[tuple[str, ...], _HistoryExchange] = {}
        self._pub_seq: dict[str, int] = {}
        self._gseq = 0
        self._closed = False
        # inline dispatch state
        self._dispatch_q: deque[tuple[SubscriptionHandle, Message]] = deque()
        self._in_dispatch = False

    @property
    def is_closed(self) -> bool:
        return self._closed

    # ── publish ──────────────────────────────────────────────────────

    def publish(
        self,
        topic: str | Topic,
        payload: bytes = b"",
        headers: Optional[dict[str, str]] = None,
        *,
        publisher: str = "anonymous",
    ) -> int:
        """Route a message; returns the number of queues it reached."""
        t = parse_topic(topic) if isinstance(topic, str) else topic
        with self._lock:
            if self._closed:
                raise RejectedPublishError("broker is shut down")
            seq = self._pub_seq.get(publisher, 0) + 1
            self._pub_seq[publisher] = seq
            self._gseq += 1
            msg = Message(
                topic=t,
                payload=bytes(payload),
                headers=dict(headers or {}),
                publish_time=self.clock.now_ns(),
                seq=seq,
                publisher=publisher,
                global_seq=self._gseq,
            )
            routed = self._route(msg)
        if self.dispatch == "inline":
            self._drain_inline()
        return routed

    def _route(self, msg: Message) -> int:
        # caller holds the lock
        routed = 0
        for exch in self._history.values():
            if matches(exch.pattern, msg.topic):
                exch.ring.append(msg)
        seen_groups: set[str] = set()
        for sub in self._subs:
            if sub.group is not None:
                if sub.group in seen_groups:
                    continue
                group = self._groups[sub.group]
                if matches(group.pattern, msg.topic):
                    seen_groups.add(sub.group)
                    member = group.pick()
                    if member is not None:
                        self._hand_off(member, msg)
                        routed += 1
                continue
            if matches(sub.pattern, msg.topic):
                self._hand_off(sub, msg)
                routed += 1
        return routed

    def _hand_off(self, sub: SubscriptionHandle, msg: Message) -> None:
        if sub.mode == "fetch":
            sub._enqueue(msg)
        elif self.dispatch == "inline":
            self._dispatch_q.append((sub, msg))
        else:
            assert sub._cond is not None
            with sub._cond:
                sub._enqueue(msg)
                sub._cond.notify()

    def _drain_inline(self) -> None:
        with self._lock:
            if self._in_dispatch:
                return
            self._in_dispatch = True
        try:
            while True:
                with self._lock:
                    if not self._dispatch_q:
                        break
                    sub, msg = self._dispatch_q.popleft()
                    if sub.cancelled:
                        continue
                    sub.delivered += 1
                self._invoke(sub, msg)
        finally:
            with self._lock:
                self._in_dispatch = False

    @staticmethod
    def _invoke(sub: SubscriptionHandle, msg: Message) -> None:
        try:
            assert sub.callback is not None
            sub.callback(msg)
        except Exception:
            logger.exception("subscriber callback failed for %s", msg.topic)

    # ── subscribe ────────────────────────────────────────────────────

    def subscribe(
        self,
        pattern: str | TopicPattern,
        *,
        mode: str = "push",
        callback: Optional[Callable[[Message], None]] = None,
        group: Optional[str] = None,
        history_replay: bool = False,
        queue_capacity: Optional[int] = None,
        on_enqueue: Optional[Callable[[], None]] = None,
    ) -> SubscriptionHandle:
        """Register a subscription and return its handle.

        Push mode needs a callback; fetch mode owns a private queue and
        forbids both callback and group, and may take ``on_enqueue``, a
        nudge invoked whenever a message lands in the queue. With
        ``history_replay`` every cached message matching the pattern is
        delivered before any live one, oldest first.
        """
        p = parse_pattern(pattern) if isinstance(pattern, str) else pattern
        if mode not in ("push", "fetch"):
            raise InvalidSubscriptionError(f"unknown mode {mode!r}")
        if mode == "push" and callback is None:
            raise InvalidSubscriptionError("push mode requires a callback")
        if mode == "fetch" and callback is not None:
            raise InvalidSubscriptionError("fetch mode takes no callback")
        if mode == "fetch" and group is not None:
            raise InvalidSubscriptionError("groups are only meaningful in push mode")
        if on_enqueue is not None and mode != "fetch":
            raise InvalidSubscriptionError("on_enqueue is a fetch-mode feature")
        if group is not None and history_replay:
            raise InvalidSubscriptionError("history replay cannot target a group")
        sub = SubscriptionHandle(
            self,
            p,
            mode,
            group,
            history_replay,
            queue_capacity or self.default_queue_capacity,
            callback,
        )
        sub.on_enqueue = on_enqueue
        with self._lock:
            if self._closed:
                raise InvalidSubscriptionError("broker is shut down")
            if group is not None:
                g = self._groups.get(group)
                if g is None:
                    g = _Group(group, p)
                    self._groups[group] = g
                elif g.pattern != p:
                    raise InvalidSubscriptionError(
                        f"group {group!r} is bound to pattern {g.pattern}, got {p}"
                    )
                g.members.append(sub)
            if self.dispatch == "threaded" and mode == "push":
                sub._cond = threading.Condition()
                sub._thread = threading.Thread(
                    target=self._dispatcher, args=(sub,), daemon=True
                )
            replay = self._replay_set(p) if history_replay else []
            for msg in replay:
                if mode == "fetch":
                    sub._enqueue(msg)
                elif self.dispatch == "inline":
                    self._dispatch_q.append((sub, msg))
                else:
                    sub._enqueue(msg)
            self._subs.append(sub)
        if sub._thread is not None:
            sub._thread.start()
        if self.dispatch == "inline":
            self._drain_inline()
        return sub

    def _replay_set(self, pattern: TopicPattern) -> list[Message]:
        seen: set[tuple[str, int]] = set()
        out: list[Message] = []
        for exch in self._history.values():
            for msg in exch.ring:
                key = (msg.publisher, msg.seq)
                if key in seen:
                    continue
                if matches(pattern, msg.topic):
                    seen.add(key)
                    out.append(msg)
        out.sort(key=lambda m: m.global_seq)
        return out

    def _dispatcher(self, sub: SubscriptionHandle) -> None:
        assert sub._cond is not None
        while True:
            with sub._cond:
                while not sub.queue and not sub.cancelled and not self._closed:
                    sub._cond.wait()
                if sub.cancelled or (self._closed and not sub.queue):
                    sub._delivering = False
                    sub._cond.notify_all()
                    return
                msg = sub.queue.popleft()
                sub._delivering = True
                sub.delivered += 1
            self._invoke(sub, msg)
            with sub._cond:
                sub._delivering = False
                sub._cond.notify_all()

    def _cancel(self, sub: SubscriptionHandle) -> None:
        with self._lock:
            if sub.cancelled:
                return
            sub.cancelled = True
            if sub in self._subs:
                self._subs.remove(sub)
            if sub.group is not None:
                g = self._groups.get(sub.group)
                if g and sub in g.members:
                    g.members.remove(sub)
                if g and not g.members:
                    del self._groups[sub.group]
            self._dispatch_q = deque(
                (s, m) for s, m in self._dispatch_q if s is not sub
            )
        if sub._cond is not None and sub._thread is not None:
            with sub._cond:
                sub._cond.notify_all()
                if threading.current_thread() is not sub._thread:
                    while sub._delivering:
                        sub._cond.wait()

    # ── history exchanges ────────────────────────────────────────────

    def declare_history(self, pattern: str | TopicPattern, capacity: int) -> None:
        """Cache the most recent ``capacity`` messages matching ``pattern``.

        Re-declaring an existing pattern truncates its ring to the new
        capacity, keeping the newest entries.
        """
        if capacity < 1:
            raise InvalidCapacityError(f"capacity must be >= 1, got {capacity}")
        p = parse_pattern(pattern) if isinstance(pattern, str) else pattern
        with self._lock:
            exch = self._history.get(p.tokens)
            if exch is None:
                self._history[p.tokens] = _HistoryExchange(p, capacity)
            else:
                exch.redeclare(capacity)

    def history_snapshot(self, pattern: str | TopicPattern) -> list[Message]:
        p = parse_pattern(pattern) if isinstance(pattern, str) else pattern
        with self._lock:
            exch = self._history.get(p.tokens)
            return list(exch.ring) if exch else []

    # ── lifecycle ────────────────────────────────────────────────────

    @property
    def closed(self) -> bool:
        return self._closed

    def subscriptions(self) -> Iterable[SubscriptionHandle]:
        with self._lock:
            return list(self._subs)

    def close(self) -> None:
        with self._lock:
            if self._closed:
                return
            self._closed = True
            subs = list(self._subs)
        for sub in subs:
            self._cancel(sub)
        with self._lock:
            self._dispatch_q.clear()
            self._history.clear()
