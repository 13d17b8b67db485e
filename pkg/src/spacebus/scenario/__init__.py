"""Declarative scenarios: space config + timed trace + expectations."""

from .bench import BenchReport, bench_latency
from .log import EventLog, load_recording, save_recording
from .runner import RunResult, SpaceSession, run_scenario
from .schema import Scenario, load_scenario, validate_scenario

__all__ = [
    "BenchReport",
    "EventLog",
    "RunResult",
    "Scenario",
    "SpaceSession",
    "bench_latency",
    "load_recording",
    "load_scenario",
    "run_scenario",
    "save_recording",
    "validate_scenario",
]
