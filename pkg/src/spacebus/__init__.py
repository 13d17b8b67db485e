"""Desk-scale middleware for interactive physical spaces.

A topic broker with four delivery paradigms, a leased service registry
with federation, millimeter-unit spatial geometry, a pointer and hotspot
event model, a cast of simulated space workers, and a deterministic
scenario harness that replays whole rooms on a virtual clock.
"""

from __future__ import annotations

from .broker.core import Broker, Message, SubscriptionHandle
from .clock import MS, Scheduler, SystemClock, VirtualClock
from .errors import SpacebusError
from .facade import SpaceConfig, SpaceHandle, connect
from .registry.core import Federation, ServiceEntry, SpaceRegistry
from .topics import Topic, TopicPattern, matches, parse_pattern, parse_topic

__version__ = "1.0.0"

__all__ = [
    "Broker",
    "Federation",
    "MS",
    "Message",
    "Scheduler",
    "ServiceEntry",
    "SpaceConfig",
    "SpaceHandle",
    "SpaceRegistry",
    "SpacebusError",
    "SubscriptionHandle",
    "SystemClock",
    "Topic",
    "TopicPattern",
    "VirtualClock",
    "connect",
    "matches",
    "parse_pattern",
    "parse_topic",
    "__version__",
]
