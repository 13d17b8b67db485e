"""Hotspots: volumes in space that turn pointer rays into UI events."""

from .engine import DRAG_THRESHOLD_MM, Hotspot, HotspotEngine
from .events import HotspotEvent
from .validator import TraceValidator, Violation

__all__ = [
    "DRAG_THRESHOLD_MM",
    "Hotspot",
    "HotspotEngine",
    "HotspotEvent",
    "TraceValidator",
    "Violation",
]
