"""Proximity-driven level of detail.

The pure rule: at or under the threshold distance the map should show
county-level data, past it state-level. The worker wraps that rule with
a hysteresis band so a person standing right at the threshold does not
strobe the map: once in a level, you have to cross clearly (half the
band past the line) to flip it.
"""

from __future__ import annotations

import json
import logging
import math

from ..broker.core import Broker, Message
from ..errors import InvalidInputError

logger = logging.getLogger(__name__)

THRESHOLD_MM = 2500.0
HYSTERESIS_MM = 100.0

STATE = "state_level"
COUNTY = "county_level"

LOCATION_PATTERN = "body.*.location"
LOD_TOPIC = "mapapp.lod"


def proximity_level(distance_mm: float, threshold_mm: float = THRESHOLD_MM) -> str:
    """Stateless classification; the boundary itself counts as close."""
    if distance_mm < 0 or not math.isfinite(distance_mm):
        raise InvalidInputError(f"distance must be a finite non-negative mm value, got {distance_mm}")
    return COUNTY if distance_mm <= threshold_mm else STATE


class ProximityWorker:
    def __init__(
        self,
        broker: Broker,
        *,
        reference: tuple[float, float, float],
        threshold_mm: float = THRESHOLD_MM,
        hysteresis_mm: float = HYSTERESIS_MM,
    ):
        self.broker = broker
        self.reference = reference
        self.threshold_mm = threshold_mm
        self.hysteresis_mm = hysteresis_mm
        self.level: str | None = None  # unknown until the first location
        self._positions: dict[str, tuple[float, float, float]] = {}
        self._sub = None

    def start(self) -> None:
        if self._sub is None:
            self._sub = self.broker.subscribe(
                LOCATION_PATTERN, mode="push", callback=self._on_location
            )

    def stop(self) -> None:
        if self._sub is not None:
            self._sub.cancel()
            self._sub = None

    def _on_location(self, msg: Message) -> None:
        try:
            obj = json.loads(msg.payload.decode())
            body = obj["body_id"]
            pos = obj["position"]
            x, y, z = (float(v) for v in pos)
        except Exception as e:
            logger.warning("bad location message: %s", e)
            return
        self._positions[body] = (x, y, z)
        nearest = min(
            math.dist(p, self.reference) for p in self._positions.values()
        )
        self._update(nearest)

    def _update(self, distance_mm: float) -> None:
        if self.level is None:
            new = proximity_level(distance_mm, self.threshold_mm)
        elif self.level == STATE:
            # must come clearly inside to zoom in
            new = COUNTY if distance_mm <= self.threshold_mm - self.hysteresis_mm else STATE
        else:
            # must go clearly outside to zoom back out
            new = STATE if distance_mm > self.threshold_mm + self.hysteresis_mm else COUNTY
        if new != self.level:
            self.level = new
            self.broker.publish(
                LOD_TOPIC,
                json.dumps(
                    {"level": new, "distance_mm": distance_mm},
                    sort_keys=True,
                    separators=(",", ":"),
                ).encode(),
                publisher="proximity",
            )
