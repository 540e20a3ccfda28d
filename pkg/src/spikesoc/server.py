"""Live monitoring and control: one engine thread, many protocol sessions.

The protocol is newline-delimited JSON over a plain TCP socket and the
same JSON messages as text frames over WebSocket (for the browser
cockpit).  All state mutation funnels through the engine host's command
queue and is applied between simulation chunks, so every session observes
the same serialized history; the applied-command log replays headlessly
to the same engine state hash.

Client requests:
    {"type": "ping"}
    {"type": "get_config"}
    {"type": "apply_config", "version": N, "config": {...}}
    {"type": "param_update", "path": "chips.0.cores.0.biases.SOIF_DC",
     "coarse": 2, "fine": 128, "k": 1.0}
    {"type": "latch_update", "path": "...latches.SO_DC", "value": true}
    {"type": "inject_events", "events": [[t_us, "raw_hex24"], ...]}
    {"type": "subscribe", "sadc": [0, 1], "vmem": ["0_0_c0_n7"],
     "raster": true, "counters": true}
    {"type": "run_control", "action": "pause" | "resume" | "speed", "value": 2.0}
    {"type": "get_log"}
    {"type": "get_state_hash"}

Server frames: pong, config, apply_ok, conflict, param_applied,
latch_applied, injected, subscribed, run_state, log, state_hash,
trace_frame, raster_frame, counters, error.
"""

from __future__ import annotations

import http.server
import json
import queue
import socketserver
import threading
import time
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path

from .configdoc import ConfigDocument, document_from_dict, document_to_dict
from .engine import Engine
from .errors import SpikesocError
from .params import BiasCode

CHUNK_NS = 20_000_000  # 20 ms of simulated time per host iteration


@dataclass
class Subscription:
    sadc: list[int] = field(default_factory=list)
    vmem: list[str] = field(default_factory=list)
    raster: bool = False
    counters: bool = False
    sadc_cursor: dict[int, int] = field(default_factory=dict)
    vmem_cursor: dict[str, int] = field(default_factory=dict)
    raster_cursor: int = 0


STREAM_BACKLOG_LIMIT = 256


class Session:
    """One connected client: an outbox plus its subscription cursors.

    Control replies are never dropped; stream frames are skipped while the
    client's backlog is deep (its own render buffer drops oldest anyway).
    """

    _next_id = 0
    _id_lock = threading.Lock()

    def __init__(self):
        with Session._id_lock:
            Session._next_id += 1
            self.session_id = Session._next_id
        self.outbox: queue.Queue[str | None] = queue.Queue()
        self.subscription = Subscription()
        self.closed = False
        self.dropped_frames = 0

    def send(self, message: dict) -> None:
        self.outbox.put(json.dumps(message, separators=(",", ":")))

    def send_stream(self, message: dict) -> bool:
        if self.outbox.qsize() >= STREAM_BACKLOG_LIMIT:
            self.dropped_frames += 1
            return False
        self.outbox.put(json.dumps(message, separators=(",", ":")))
        return True

    def close(self) -> None:
        self.closed = True
        self.outbox.put(None)


class EngineHost:
    """Owns the engine thread; applies commands between simulation chunks."""

    def __init__(self, doc: ConfigDocument, speed: float = 1.0):
        self.engine = Engine(doc)
        self.speed = speed
        self.paused = False
        self.commands: queue.Queue = queue.Queue()
        self.sessions: list[Session] = []
        self.log: list[dict] = []
        self.config_version = 0
        self._lock = threading.Lock()
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None
        self._last_publish = 0.0
        self.publish_interval = 0.05  # wall seconds between stream publishes

    # -- session management -------------------------------------------------

    def attach(self, session: Session) -> None:
        with self._lock:
            self.sessions.append(session)

    def detach(self, session: Session) -> None:
        with self._lock:
            if session in self.sessions:
                self.sessions.remove(session)
        session.close()

    # -- engine thread ------------------------------------------------------

    def start(self) -> None:
        self._thread = threading.Thread(target=self._loop, name="engine-host", daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=5.0)

    def _loop(self) -> None:
        while not self._stop.is_set():
            start_wall = time.monotonic()
            self._drain_commands()
            if not self.paused:
                target = self.engine.now_ns + CHUNK_NS
                self.engine.run_until(target)
                self._publish()
            budget = CHUNK_NS * 1e-9 / max(self.speed, 1e-6)
            elapsed = time.monotonic() - start_wall
            if budget > elapsed:
                self._stop.wait(min(budget - elapsed, 0.25))

    def _drain_commands(self) -> None:
        while True:
            try:
                handler, args, reply = self.commands.get_nowait()
            except queue.Empty:
                return
            try:
                result = handler(*args)
                reply.put(("ok", result))
            except (SpikesocError, ValueError, KeyError) as exc:
                reply.put(("error", str(exc)))

    def call(self, handler, *args, timeout: float = 10.0):
        """Run ``handler`` on the engine thread and wait for its result."""
        reply: queue.Queue = queue.Queue(maxsize=1)
        self.commands.put((handler, args, reply))
        status, value = reply.get(timeout=timeout)
        if status == "error":
            raise SpikesocError(value)
        return value

    # -- commands (run on the engine thread) ---------------------------------

    def _cmd_get_config(self):
        return {
            "type": "config",
            "version": self.config_version,
            "t_us": self.engine.now_ns // 1000,
            "config": document_to_dict(self.engine.doc),
        }

    def _cmd_param_update(self, path: str, coarse: int, fine: int, k: float):
        code = BiasCode(int(coarse), int(fine), float(k))
        current = self.engine.apply_bias_update(path, code)
        self.config_version += 1
        entry = {
            "t_ns": self.engine.now_ns,
            "kind": "param_update",
            "path": path,
            "coarse": code.coarse,
            "fine": code.fine,
            "k": code.k_parameter,
        }
        self.log.append(entry)
        return {
            "type": "param_applied",
            "path": path,
            "coarse": code.coarse,
            "fine": code.fine,
            "current": current,
            "version": self.config_version,
            "t_us": self.engine.now_ns // 1000,
        }

    def _cmd_latch_update(self, path: str, value: bool):
        self.engine.apply_latch_update(path, bool(value))
        self.config_version += 1
        self.log.append(
            {"t_ns": self.engine.now_ns, "kind": "latch_update", "path": path, "value": bool(value)}
        )
        return {
            "type": "latch_applied",
            "path": path,
            "value": bool(value),
            "version": self.config_version,
            "t_us": self.engine.now_ns // 1000,
        }

    def _cmd_apply_config(self, version: int, config: dict):
        if int(version) != self.config_version:
            return {"type": "conflict", "version": self.config_version}
        incoming = document_from_dict(config)
        changes = _diff_documents(self.engine.doc, incoming)
        for path, kind, payload in changes:
            if kind == "bias":
                self.engine.apply_bias_update(path, payload)
            else:
                self.engine.apply_latch_update(path, payload)
            self.log.append(
                {
                    "t_ns": self.engine.now_ns,
                    "kind": "param_update" if kind == "bias" else "latch_update",
                    "path": path,
                    **(
                        {"coarse": payload.coarse, "fine": payload.fine, "k": payload.k_parameter}
                        if kind == "bias"
                        else {"value": payload}
                    ),
                }
            )
        self.config_version += 1
        return {
            "type": "apply_ok",
            "version": self.config_version,
            "changes": len(changes),
            "t_us": self.engine.now_ns // 1000,
        }

    def _cmd_inject_events(self, events):
        decoded = [(round(float(t_us) * 1000), int(raw, 16) if isinstance(raw, str) else int(raw)) for t_us, raw in events]
        for t_ns, raw in decoded:
            self.engine.inject_word(max(t_ns, self.engine.now_ns), raw)
        self.log.append(
            {
                "t_ns": self.engine.now_ns,
                "kind": "inject_events",
                "events": [[t, r] for t, r in decoded],
            }
        )
        return {"type": "injected", "count": len(decoded), "t_us": self.engine.now_ns // 1000}

    def _cmd_get_log(self):
        return {"type": "log", "entries": list(self.log), "t_us": self.engine.now_ns // 1000}

    def _cmd_state_hash(self):
        return {
            "type": "state_hash",
            "hash": self.engine.state_hash(),
            "t_ns": self.engine.now_ns,
        }

    def _cmd_run_control(self, action: str, value):
        if action == "pause":
            self.paused = True
        elif action == "resume":
            self.paused = False
        elif action == "speed":
            self.speed = max(float(value), 1e-3)
        else:
            raise SpikesocError(f"unknown run_control action {action!r}")
        return {"type": "run_state", "paused": self.paused, "speed": self.speed}

    # -- publishing -----------------------------------------------------------

    def _publish(self) -> None:
        now = time.monotonic()
        if now - self._last_publish < self.publish_interval:
            return
        self._last_publish = now
        report = self.engine.report
        with self._lock:
            sessions = list(self.sessions)
        max_points = 2000
        for session in sessions:
            sub = session.subscription
            for channel in sub.sadc:
                trace = report.sadc_traces.get(channel, [])
                cursor = sub.sadc_cursor.get(channel, 0)
                if len(trace) > cursor:
                    chunk = trace[cursor : cursor + max_points]
                    frame = {
                        "type": "trace_frame",
                        "channel": channel,
                        "t_us": [t // 1000 for t, _ in chunk],
                        "v": [v for _, v in chunk],
                    }
                    if session.send_stream(frame):
                        sub.sadc_cursor[channel] = cursor + len(chunk)
            for name in sub.vmem:
                trace = report.vmem_traces.get(name, [])
                cursor = sub.vmem_cursor.get(name, 0)
                if len(trace) > cursor:
                    chunk = trace[cursor : cursor + max_points]
                    frame = {
                        "type": "trace_frame",
                        "channel": f"vmem_{name}",
                        "t_us": [t // 1000 for t, _ in chunk],
                        "v": [v for _, v in chunk],
                    }
                    if session.send_stream(frame):
                        sub.vmem_cursor[name] = cursor + len(chunk)
            if sub.raster and len(report.spikes) > sub.raster_cursor:
                chunk = report.spikes[sub.raster_cursor : sub.raster_cursor + max_points]
                frame = {
                    "type": "raster_frame",
                    "events": [
                        [t // 1000, cx, cy, core, neuron] for t, cx, cy, core, neuron in chunk
                    ],
                }
                if session.send_stream(frame):
                    sub.raster_cursor += len(chunk)
            if sub.counters:
                session.send_stream(
                    {
                        "type": "counters",
                        "t_us": self.engine.now_ns // 1000,
                        "counters": dict(report.counters),
                        "energy_pj": report.energy_pj,
                        "spikes": len(report.spikes),
                    }
                )

    # -- request dispatch -------------------------------------------------------

    def handle_message(self, session: Session, text: str) -> None:
        try:
            msg = json.loads(text)
        except json.JSONDecodeError as exc:
            session.send({"type": "error", "message": f"bad JSON: {exc}"})
            return
        kind = msg.get("type")
        try:
            if kind == "ping":
                session.send({"type": "pong", "t_us": self.engine.now_ns // 1000})
            elif kind == "get_config":
                session.send(self.call(self._cmd_get_config))
            elif kind == "param_update":
                session.send(
                    self.call(
                        self._cmd_param_update,
                        msg["path"],
                        msg["coarse"],
                        msg["fine"],
                        msg.get("k", 1.0),
                    )
                )
            elif kind == "latch_update":
                session.send(self.call(self._cmd_latch_update, msg["path"], msg["value"]))
            elif kind == "apply_config":
                session.send(self.call(self._cmd_apply_config, msg["version"], msg["config"]))
            elif kind == "inject_events":
                session.send(self.call(self._cmd_inject_events, msg["events"]))
            elif kind == "subscribe":
                sub = session.subscription
                sub.sadc = [int(c) for c in msg.get("sadc", [])]
                sub.vmem = [str(v) for v in msg.get("vmem", [])]
                sub.raster = bool(msg.get("raster", False))
                sub.counters = bool(msg.get("counters", False))
                session.send({"type": "subscribed"})
            elif kind == "run_control":
                session.send(self.call(self._cmd_run_control, msg["action"], msg.get("value")))
            elif kind == "get_log":
                session.send(self.call(self._cmd_get_log))
            elif kind == "get_state_hash":
                session.send(self.call(self._cmd_state_hash))
            else:
                session.send({"type": "error", "message": f"unknown message type {kind!r}"})
        except (SpikesocError, KeyError, ValueError, TypeError) as exc:
            session.send({"type": "error", "message": str(exc)})


def _diff_documents(current: ConfigDocument, incoming: ConfigDocument):
    """Bias and latch changes needed to turn ``current`` into ``incoming``."""
    changes = []
    for ci, (chip_a, chip_b) in enumerate(zip(current.chips, incoming.chips)):
        for k, (core_a, core_b) in enumerate(zip(chip_a.cores, chip_b.cores)):
            prefix = f"chips.{ci}.cores.{k}"
            for name in sorted(set(core_a.biases) | set(core_b.biases)):
                a, b = core_a.bias(name), core_b.bias(name)
                if a != b:
                    changes.append((f"{prefix}.biases.{name}", "bias", b))
            for name in sorted(set(core_a.latches) | set(core_b.latches)):
                a, b = core_a.latch(name), core_b.latch(name)
                if a != b:
                    changes.append((f"{prefix}.latches.{name}", "latch", b))
            neurons = set(core_a.neurons) | set(core_b.neurons)
            for idx in sorted(neurons):
                la = core_a.neurons.get(idx)
                lb = core_b.neurons.get(idx)
                latches_a = la.latches if la else {}
                latches_b = lb.latches if lb else {}
                for name in sorted(set(latches_a) | set(latches_b)):
                    a, b = latches_a.get(name, False), latches_b.get(name, False)
                    if a != b:
                        changes.append((f"{prefix}.neurons.{idx}.latches.{name}", "latch", b))
    return changes


def replay_log(doc: ConfigDocument, log: list[dict], until_ns: int) -> str:
    """Apply a recorded command log headlessly; returns the final state hash."""
    engine = Engine(doc)
    for entry in sorted(log, key=lambda e: e["t_ns"]):
        engine.run_until(int(entry["t_ns"]))
        kind = entry["kind"]
        if kind == "param_update":
            engine.apply_bias_update(
                entry["path"], BiasCode(entry["coarse"], entry["fine"], entry.get("k", 1.0))
            )
        elif kind == "latch_update":
            engine.apply_latch_update(entry["path"], entry["value"])
        elif kind == "inject_events":
            for t_ns, raw in entry["events"]:
                engine.inject_word(max(int(t_ns), engine.now_ns), int(raw))
        else:
            raise SpikesocError(f"unknown log entry kind {kind!r}")
    engine.run_until(until_ns)
    return engine.state_hash()


# ---------------------------------------------------------------------------
# Transports
# ---------------------------------------------------------------------------


class _TcpHandler(socketserver.StreamRequestHandler):
    def handle(self):
        host: EngineHost = self.server.engine_host  # type: ignore[attr-defined]
        session = Session()
        host.attach(session)
        writer = threading.Thread(target=self._pump, args=(session,), daemon=True)
        writer.start()
        try:
            for line in self.rfile:
                text = line.decode("utf-8", errors="replace").strip()
                if text:
                    host.handle_message(session, text)
        except (ConnectionError, OSError):
            pass
        finally:
            host.detach(session)

    def _pump(self, session: Session):
        while True:
            text = session.outbox.get()
            if text is None:
                return
            try:
                self.wfile.write(text.encode() + b"\n")
                self.wfile.flush()
            except (ConnectionError, OSError, ValueError):
                return


class TcpServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True


def start_tcp_server(host_obj: EngineHost, host: str, port: int) -> TcpServer:
    server = TcpServer((host, port), _TcpHandler)
    server.engine_host = host_obj  # type: ignore[attr-defined]
    threading.Thread(target=server.serve_forever, daemon=True).start()
    return server


def start_ws_server(host_obj: EngineHost, host: str, port: int):
    from websockets.sync.server import serve as ws_serve

    def handler(websocket):
        session = Session()
        host_obj.attach(session)

        def pump():
            while True:
                text = session.outbox.get()
                if text is None:
                    return
                try:
                    websocket.send(text)
                except Exception:
                    return

        threading.Thread(target=pump, daemon=True).start()
        try:
            for text in websocket:
                if isinstance(text, bytes):
                    text = text.decode("utf-8", errors="replace")
                host_obj.handle_message(session, text)
        except Exception:
            pass
        finally:
            host_obj.detach(session)

    server = ws_serve(handler, host, port)
    threading.Thread(target=server.serve_forever, daemon=True).start()
    return server


def start_http_server(host: str, port: int, ui_dir: str):
    handler = partial(http.server.SimpleHTTPRequestHandler, directory=str(Path(ui_dir)))
    server = http.server.ThreadingHTTPServer((host, port), handler)
    threading.Thread(target=server.serve_forever, daemon=True).start()
    return server


def serve_forever(host_obj, host, tcp_port, ws_port, http_port=None, ui_dir=None):
    host_obj.start()
    start_tcp_server(host_obj, host, tcp_port)
    start_ws_server(host_obj, host, ws_port)
    if ui_dir:
        start_http_server(host, http_port, ui_dir)
    try:
        while True:
            time.sleep(1.0)
    except KeyboardInterrupt:
        host_obj.stop()
