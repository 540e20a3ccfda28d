"""Command-line interface.

Subcommands: run a simulation from a configuration plus event files,
validate or compile network descriptions, extract monitor traces from a
report, serve the live socket protocol, and run the shipped demos.
Failures exit nonzero without leaving partial output directories.
"""

from __future__ import annotations

import json
import shutil
import sys
import tempfile
from pathlib import Path

import click

from .configdoc import nominal_document, parse, serialize
from .demos import DEMOS
from .engine import Engine
from .errors import SpikesocError
from .netbuild import compile_network, load_spec, validate_document
from .report import load_event_file, load_sensor_file


def _parse_duration_ns(text: str) -> int:
    """Accept '2s', '150ms', '2000us' or a bare microsecond count."""
    text = text.strip()
    for suffix, scale in (("ms", 1_000_000), ("us", 1_000), ("s", 1_000_000_000)):
        if text.endswith(suffix):
            return round(float(text[: -len(suffix)]) * scale)
    return round(float(text) * 1_000)


def _load_config(path: str):
    try:
        return parse(Path(path).read_text())
    except FileNotFoundError:
        raise click.ClickException(f"configuration file not found: {path}")
    except SpikesocError as exc:
        raise click.ClickException(str(exc))


def _write_report_atomically(report, out_dir: str) -> None:
    out = Path(out_dir)
    staging = Path(tempfile.mkdtemp(prefix=".spikesoc-", dir=out.parent if out.parent.exists() else None))
    try:
        report.export(staging)
        if out.exists():
            shutil.rmtree(out)
        staging.rename(out)
    except Exception:
        shutil.rmtree(staging, ignore_errors=True)
        raise


@click.group()
def main() -> None:
    """Behavioral emulator of a multi-core spiking neural network processor."""


@main.command("run")
@click.option("--config", "config_path", required=True, help="Configuration JSON file.")
@click.option("--events", "events_path", default=None, help="Event stream file (timestamp_us raw_hex24).")
@click.option("--sensor-events", "sensor_path", default=None, help="Sensor stream file (timestamp_us x y pol).")
@click.option("--until", required=True, help="Simulation horizon, e.g. 2s, 150ms, 2000us.")
@click.option("--out", "out_dir", required=True, help="Report output directory.")
def run_cmd(config_path, events_path, sensor_path, until, out_dir):
    """Simulate a configuration against input events and write a report."""
    doc = _load_config(config_path)
    try:
        engine = Engine(doc)
        if events_path:
            engine.inject_events(load_event_file(events_path))
        if sensor_path:
            engine.inject_sensor_events(load_sensor_file(sensor_path))
        report = engine.run_until(_parse_duration_ns(until))
        _write_report_atomically(report, out_dir)
    except (SpikesocError, ValueError) as exc:
        raise click.ClickException(str(exc))
    click.echo(f"report written to {out_dir} (hash {report.hash()[:16]})")


@main.command("validate")
@click.argument("config_path")
def validate_cmd(config_path):
    """Range and consistency diagnostics for a configuration file."""
    doc = _load_config(config_path)
    diags = validate_document(doc)
    for diag in diags:
        click.echo(diag)
    if any(d.startswith(("error", "aliasing")) for d in diags):
        sys.exit(1)
    click.echo("ok" if not diags else f"{len(diags)} diagnostics")


@main.command("compile")
@click.argument("spec_path")
@click.option("--out", "out_path", required=True, help="Output configuration file.")
def compile_cmd(spec_path, out_path):
    """Compile a network description into a chip configuration."""
    try:
        spec = load_spec(spec_path)
        doc = compile_network(spec)
    except SpikesocError as exc:
        raise click.ClickException(str(exc))
    Path(out_path).write_text(serialize(doc))
    click.echo(f"configuration written to {out_path}")


@main.command("trace")
@click.option("--report", "report_dir", required=True, help="Report directory from a run.")
@click.option("--channel", "channels", multiple=True, help="Trace name (e.g. sadc_00, vmem_0_0_c0_n7).")
def trace_cmd(report_dir, channels):
    """Print selected trace channels from a report."""
    base = Path(report_dir) / "traces"
    if not base.exists():
        raise click.ClickException(f"no traces in {report_dir}")
    names = [c if c.endswith(".txt") else f"{c}.txt" for c in channels]
    if not names:
        names = sorted(p.name for p in base.glob("*.txt"))
        click.echo("available channels:")
        for name in names:
            click.echo(f"  {name[:-4]}")
        return
    for name in names:
        path = base / name
        if not path.exists():
            raise click.ClickException(f"no such channel: {name[:-4]}")
        click.echo(f"# {name[:-4]}")
        click.echo(path.read_text(), nl=False)


@main.command("demo")
@click.argument("name", type=click.Choice(sorted(DEMOS)))
@click.option("--out", "out_dir", required=True, help="Report output directory.")
@click.option("--reversed", "reverse", is_flag=True, help="Reversed stimulus order (order-* demos).")
def demo_cmd(name, out_dir, reverse):
    """Run one of the shipped reproduction scenarios."""
    maker = DEMOS[name]
    bundle = maker(forward=not reverse) if name.startswith("order-") else maker()
    _engine, report = bundle.run()
    _write_report_atomically(report, out_dir)
    click.echo(f"{name}: {len(report.spikes)} spikes, report in {out_dir}")


@main.command("init-config")
@click.option("--out", "out_path", required=True, help="Output configuration file.")
@click.option("--grid", default="1x1", help="Chip grid, e.g. 2x1.")
def init_config_cmd(out_path, grid):
    """Write a calibrated single-purpose starter configuration."""
    try:
        w, h = (int(x) for x in grid.lower().split("x"))
    except ValueError:
        raise click.ClickException(f"bad grid {grid!r}, expected WxH")
    Path(out_path).write_text(serialize(nominal_document((w, h))))
    click.echo(f"configuration written to {out_path}")


@main.command("serve")
@click.option("--config", "config_path", default=None, help="Initial configuration file.")
@click.option("--host", default="127.0.0.1", envvar="SPIKESOC_LISTEN", show_default=True)
@click.option("--tcp-port", default=8481, show_default=True)
@click.option("--ws-port", default=8482, show_default=True)
@click.option("--http-port", default=8480, show_default=True, help="Cockpit static file port.")
@click.option("--ui-dir", default=None, help="Directory with cockpit static files.")
@click.option("--speed", default=1.0, show_default=True, help="Simulation speed factor vs wall clock.")
def serve_cmd(config_path, host, tcp_port, ws_port, http_port, ui_dir, speed):
    """Serve the live monitoring and control protocol."""
    from .server import EngineHost, serve_forever

    doc = _load_config(config_path) if config_path else nominal_document()
    host_obj = EngineHost(doc, speed=speed)
    click.echo(f"tcp://{host}:{tcp_port}  ws://{host}:{ws_port}/")
    if ui_dir:
        click.echo(f"cockpit: http://{host}:{http_port}/")
    serve_forever(host_obj, host, tcp_port, ws_port, http_port, ui_dir)


@main.command("replay")
@click.option("--config", "config_path", required=True, help="Initial configuration file.")
@click.option("--log", "log_path", required=True, help="Message log JSON file from a session.")
@click.option("--until", required=True, help="Replay horizon, e.g. 2s.")
def replay_cmd(config_path, log_path, until):
    """Replay a recorded control log headlessly; prints the state hash."""
    from .server import replay_log

    doc = _load_config(config_path)
    log = json.loads(Path(log_path).read_text())
    state_hash = replay_log(doc, log, _parse_duration_ns(until))
    click.echo(state_hash)


if __name__ == "__main__":
    main()
