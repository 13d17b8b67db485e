"""Per-space service registry with leased entries and federated discovery.

Entries live under a lease: registration hands back a token, the owner
renews it, and anything past its TTL is invisible to queries (and swept
out the next time it is seen). Tokens are a plain counter so a seeded
run serializes identically every time.
"""

from __future__ import annotations

import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Optional, Protocol

from ..clock import Clock, SystemClock
from ..errors import (
    ConflictError,
    FederationUnavailableError,
    InvalidQueryError,
    NotFoundError,
    StaleLeaseError,
)

DEFAULT_TTL_S = 10.0


@dataclass
class ServiceEntry:
    """What a service advertises about itself."""

    name: str
    kind: str
    space: str = ""
    address: str = ""
    attributes: dict[str, str] = field(default_factory=dict)
    position: Optional[tuple[float, float, float]] = None  # mm, registry frame
    local_only: bool = False
    ttl_s: float = DEFAULT_TTL_S

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "kind": self.kind,
            "space": self.space,
            "address": self.address,
            "attributes": dict(self.attributes),
            "position": list(self.position) if self.position is not None else None,
            "local_only": self.local_only,
            "ttl_s": self.ttl_s,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ServiceEntry":
        pos = d.get("position")
        return cls(
            name=d["name"],
            kind=d["kind"],
            space=d.get("space", ""),
            address=d.get("address", ""),
            attributes=dict(d.get("attributes", {})),
            position=tuple(pos) if pos is not None else None,
            local_only=bool(d.get("local_only", False)),
            ttl_s=float(d.get("ttl_s", DEFAULT_TTL_S)),
        )


@dataclass
class _Record:
    entry: ServiceEntry
    token: str
    expires_ns: int
    suspect: bool = False


class Caller(Protocol):
    def __call__(self, address: str, service: str, op: str, args: dict[str, Any], timeout: float) -> dict[str, Any]: ...


class SpaceRegistry:
    """Registry for one space. Thread-safe; time comes from the clock."""

    def __init__(
        self,
        space: str,
        *,
        clock: Optional[Clock] = None,
        caller: Optional[Caller] = None,
    ):
        self.space = space
        self.clock = clock or SystemClock()
        self._records: dict[str, _Record] = {}
        self._tokens: dict[str, str] = {}  # token -> name
        self._lease_seq = 0
        self._lock = threading.RLock()
        self._caller = caller  # resolves addresses for call(); set via bind_caller

    def bind_caller(self, caller: Caller) -> None:
        self._caller = caller

    # -- lease lifecycle ---------------------------------------------------

    def register(self, entry: ServiceEntry) -> str:
        with self._lock:
            now = self.clock.now_ns()
            if not entry.space:
                entry.space = self.space
            old = self._records.get(entry.name)
            if old is not None and old.expires_ns > now and old.entry.address != entry.address:
                raise ConflictError(
                    f"{entry.name!r} already registered at {old.entry.address!r}"
                )
            if old is not None:
                self._tokens.pop(old.token, None)
            self._lease_seq += 1
            token = f"lease-{self._lease_seq}"
            self._records[entry.name] = _Record(
                entry=entry,
                token=token,
                expires_ns=now + int(entry.ttl_s * 1e9),
            )
            self._tokens[token] = entry.name
            return token

    def renew(self, token: str) -> None:
        with self._lock:
            name = self._tokens.get(token)
            rec = self._records.get(name) if name is not None else None
            if rec is None or rec.token != token:
                raise StaleLeaseError(f"unknown lease {token!r}")
            now = self.clock.now_ns()
            if rec.expires_ns <= now:
                self._drop(name)
                raise StaleLeaseError(f"lease {token!r} expired")
            rec.expires_ns = now + int(rec.entry.ttl_s * 1e9)

    def deregister(self, token: str) -> None:
        with self._lock:
            name = self._tokens.get(token)
            if name is None:
                raise StaleLeaseError(f"unknown lease {token!r}")
            self._drop(name)

    def _drop(self, name: str) -> None:
        rec = self._records.pop(name, None)
        if rec is not None:
            self._tokens.pop(rec.token, None)

    def sweep(self) -> int:
        """Remove every expired record; returns how many went."""
        with self._lock:
            now = self.clock.now_ns()
            dead = [n for n, r in self._records.items() if r.expires_ns <= now]
            for n in dead:
                self._drop(n)
            return len(dead)

    # -- discovery ---------------------------------------------------------

    def find(
        self,
        *,
        name: Optional[str] = None,
        kind: Optional[str] = None,
        space: Optional[str] = None,
        within: Optional[tuple[tuple[float, float, float], float]] = None,
        include_local_only: bool = True,
    ) -> list[ServiceEntry]:
        if name is None and kind is None and space is None and within is None:
            raise InvalidQueryError("at least one of name/kind/space/within required")
        if within is not None:
            center, radius = within
            if len(center) != 3 or radius < 0:
                raise InvalidQueryError("within wants ((x, y, z), radius_mm >= 0)")
        with self._lock:
            now = self.clock.now_ns()
            out = []
            for rec in list(self._records.values()):
                if rec.expires_ns <= now:
                    self._drop(rec.entry.name)
                    continue
                e = rec.entry
                if name is not None and e.name != name:
                    continue
                if kind is not None and e.kind != kind:
                    continue
                if space is not None and e.space != space:
                    continue
                if within is not None:
                    if e.position is None:
                        continue
                    center, radius = within
                    d = math.dist(e.position, center)
                    if d > radius:
                        continue
                if not include_local_only and e.local_only:
                    continue
                out.append(e)
            out.sort(key=lambda e: e.name)
            return out

    def lookup(self, name: str) -> ServiceEntry:
        hits = self.find(name=name)
        if not hits:
            raise NotFoundError(f"no service named {name!r}")
        return hits[0]

    def is_suspect(self, name: str) -> bool:
        with self._lock:
            rec = self._records.get(name)
            return bool(rec and rec.suspect)

    def _mark_suspect(self, name: str, flag: bool) -> None:
        with self._lock:
            rec = self._records.get(name)
            if rec is not None:
                rec.suspect = flag

    # -- request/response --------------------------------------------------

    def call(self, service: str, op: str, args: Optional[dict[str, Any]] = None, *, timeout: float = 5.0) -> dict[str, Any]:
        """Resolve a service by name and invoke one operation on it."""
        entry = self.lookup(service)
        if self._caller is None:
            raise NotFoundError("registry has no caller bound")
        try:
            result = self._caller(entry.address, service, op, dict(args or {}), timeout)
        except Exception:
            self._mark_suspect(service, True)
            raise
        self._mark_suspect(service, False)
        return result


class Federation:
    """Fans discovery out across member registries.

    Results come back in member order regardless of which member answered
    first; a dead member contributes an error, not a failure of the whole
    query. Entries flagged local_only never cross the federation boundary.
    """

    def __init__(self, members: Optional[dict[str, Any]] = None):
        self._members: dict[str, Any] = dict(members or {})
        self._lock = threading.Lock()

    def join(self, name: str, registry: Any) -> None:
        with self._lock:
            self._members[name] = registry

    def leave(self, name: str) -> None:
        with self._lock:
            self._members.pop(name, None)

    def members(self) -> list[str]:
        with self._lock:
            return list(self._members)

    def find(self, **query: Any) -> tuple[list[ServiceEntry], dict[str, str]]:
        with self._lock:
            members = list(self._members.items())
        if not members:
            raise FederationUnavailableError("federation has no members")
        query["include_local_only"] = False

        def ask(reg: Any) -> list[ServiceEntry]:
            return reg.find(**query)

        entries: list[ServiceEntry] = []
        errors: dict[str, str] = {}
        with ThreadPoolExecutor(max_workers=max(1, len(members))) as pool:
            futures = [(name, pool.submit(ask, reg)) for name, reg in members]
            for name, fut in futures:
                try:
                    entries.extend(fut.result())
                except InvalidQueryError:
                    raise
                except Exception as e:
                    errors[name] = str(e)
        if len(errors) == len(members):
            raise FederationUnavailableError(f"all members failed: {errors}")
        return entries, errors
