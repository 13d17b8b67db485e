"""Command line entry points.

Local commands (run, replay, bench, validate) work in-process. The
broker and registry commands host listeners. Everything under the
``serve`` HTTP API is also reachable as a thin client via --server.
"""

from __future__ import annotations

import json
import logging
import signal
import sys
import threading

import click

from .broker.core import Broker
from .broker.listener import BrokerListener
from .errors import SpacebusError
from .registry.core import SpaceRegistry
from .registry.rpc import LocalRpcRouter, RegistryListener, default_caller
from .scenario.bench import bench_latency
from .scenario.log import load_recording
from .scenario.runner import run_scenario
from .scenario.schema import load_scenario, scenario_from_doc


@click.group()
@click.option("--verbose", is_flag=True, help="Debug logging.")
def main(verbose: bool) -> None:
    """Desk-scale interactive-space middleware."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )


@main.command()
@click.argument("scenario_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--seed", default=0, show_default=True, help="Worker start-order seed.")
@click.option("--record", "record_path", type=click.Path(dir_okay=False), default=None,
              help="Write the event log to this file for later replay.")
def run(scenario_path: str, seed: int, record_path: str | None) -> None:
    """Run a scenario file and check its expectations."""
    try:
        scenario = load_scenario(scenario_path)
        result = run_scenario(scenario, seed=seed, record_path=record_path)
    except SpacebusError as e:
        raise click.ClickException(str(e))
    for line in result.report_lines():
        click.echo(line)
    sys.exit(0 if result.passed else 1)


@main.command()
@click.argument("recording_path", type=click.Path(exists=True, dir_okay=False))
def replay(recording_path: str) -> None:
    """Re-run a recording and verify the event log digest matches."""
    try:
        rec = load_recording(recording_path)
        scenario = scenario_from_doc(rec.scenario_doc)
        result = run_scenario(scenario, seed=rec.seed)
    except SpacebusError as e:
        raise click.ClickException(str(e))
    ok = result.log.digest == rec.digest
    click.echo(f"recorded digest {rec.digest}")
    click.echo(f"replayed digest {result.log.digest}")
    click.echo("MATCH" if ok else "MISMATCH")
    sys.exit(0 if ok else 1)


@main.command()
@click.argument("scenario_path", type=click.Path(exists=True, dir_okay=False))
def validate(scenario_path: str) -> None:
    """Check a scenario file without running it."""
    import yaml

    with open(scenario_path, "r", encoding="utf-8") as f:
        doc = yaml.safe_load(f)
    from .scenario.schema import validate_scenario

    problems = validate_scenario(doc)
    if problems:
        for p in problems:
            click.echo(p)
        sys.exit(1)
    click.echo("ok")


@main.command()
@click.option("--n", default=10_000, show_default=True, help="Messages to send.")
@click.option("--size", default=256, show_default=True, help="Payload size in bytes.")
@click.option("--rate", default=1000.0, show_default=True, help="Publish rate in Hz.")
@click.option("--transport", type=click.Choice(["inproc", "loopback"]), default="inproc",
              show_default=True)
@click.option("--json", "as_json", is_flag=True, help="Emit the report as JSON.")
def bench(n: int, size: int, rate: float, transport: str, as_json: bool) -> None:
    """Measure publish-to-delivery latency."""
    try:
        report = bench_latency(n=n, size=size, rate_hz=rate, transport=transport)
    except SpacebusError as e:
        raise click.ClickException(str(e))
    if as_json:
        click.echo(json.dumps(report.to_dict(), indent=2))
    else:
        click.echo(report.summary())
    sys.exit(0 if report.received == report.n else 1)


def _split_hostport(listen: str) -> tuple[str, int]:
    host, _, port = listen.rpartition(":")
    return host or "127.0.0.1", int(port)


def _wait_forever() -> None:
    stop = threading.Event()
    signal.signal(signal.SIGINT, lambda *_: stop.set())
    signal.signal(signal.SIGTERM, lambda *_: stop.set())
    stop.wait()


@main.command()
@click.option("--listen", default="127.0.0.1:0", show_default=True, help="host:port to bind.")
@click.option("--history", "histories", multiple=True, metavar="PATTERN:CAPACITY",
              help="Declare a history cache, e.g. 'sensor.#:100'. Repeatable.")
def broker(listen: str, histories: tuple[str, ...]) -> None:
    """Host a message broker on a TCP listener."""
    host, port = _split_hostport(listen)
    b = Broker(dispatch="threaded")
    for decl in histories:
        pattern, _, cap = decl.rpartition(":")
        b.declare_history(pattern, int(cap))
    lst = BrokerListener(b, host, port)
    click.echo(f"broker listening on {lst.address}")
    try:
        _wait_forever()
    finally:
        lst.close()
        b.close()


@main.command()
@click.option("--listen", default="127.0.0.1:0", show_default=True, help="host:port to bind.")
@click.option("--space", default="default", show_default=True, help="Space name served.")
def registry(listen: str, space: str) -> None:
    """Host a service registry on a TCP listener."""
    host, port = _split_hostport(listen)
    reg = SpaceRegistry(space, caller=default_caller(LocalRpcRouter()))
    lst = RegistryListener(reg, host, port)
    click.echo(f"registry for space {space!r} listening on loopback://{lst.host}:{lst.port}")
    try:
        _wait_forever()
    finally:
        lst.close()


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
def serve(host: str, port: int) -> None:
    """Serve the HTTP API (broker, registry, scenarios, bench)."""
    import uvicorn

    from .service.app import create_app

    uvicorn.run(create_app(), host=host, port=port)


@main.command()
@click.argument("topic")
@click.option("--server", required=True, help="Base URL of a serve instance.")
@click.option("--text", default="", help="Payload as UTF-8 text.")
def publish(topic: str, server: str, text: str) -> None:
    """Publish one message through a running HTTP service."""
    import httpx

    r = httpx.post(
        f"{server.rstrip('/')}/broker/publish",
        json={"topic": topic, "payload_text": text},
        timeout=10.0,
    )
    if r.status_code != 200:
        raise click.ClickException(f"{r.status_code}: {r.text}")
    click.echo(f"delivered to {r.json()['delivered']} subscriber(s)")


@main.command()
@click.argument("name")
@click.option("--server", required=True, help="Base URL of a serve instance.")
def lookup(name: str, server: str) -> None:
    """Look up a service by name through a running HTTP service."""
    import httpx

    r = httpx.get(f"{server.rstrip('/')}/registry/lookup/{name}", timeout=10.0)
    if r.status_code != 200:
        raise click.ClickException(f"{r.status_code}: {r.text}")
    click.echo(json.dumps(r.json(), indent=2))


if __name__ == "__main__":
    main()
