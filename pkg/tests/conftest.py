from __future__ import annotations

import pytest

from spacebus.broker.core import Broker
from spacebus.clock import Scheduler, VirtualClock


@pytest.fixture
def vclock() -> VirtualClock:
    return VirtualClock()


@pytest.fixture
def scheduler(vclock: VirtualClock) -> Scheduler:
    return Scheduler(vclock)


@pytest.fixture
def broker(vclock: VirtualClock):
    b = Broker(clock=vclock, dispatch="inline")
    yield b
    b.close()


@pytest.fixture
def live_broker():
    b = Broker(dispatch="threaded")
    yield b
    b.close()
