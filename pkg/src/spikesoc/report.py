"""Simulation report: collected outputs, text export, and hashing.

All exported files are plain text with deterministic formatting, so a
report written twice from the same run is byte-identical and the report
hash doubles as a determinism check.  Times are microseconds with three
decimals (nanosecond resolution); currents and voltages use repr floats.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

ENERGY_PJ_PER_SPIKE = {"thresholded": 150, "exponential": 300}


def format_us(t_ns: int) -> str:
    """Nanosecond timestamp as microseconds with fixed three decimals."""
    return f"{t_ns // 1000}.{t_ns % 1000:03d}"


@dataclass
class SimulationReport:
    until_ns: int = 0
    spikes: list[tuple[int, int, int, int, int]] = field(default_factory=list)
    bus_exits: list[tuple[int, int]] = field(default_factory=list)
    sadc_traces: dict[int, list[tuple[int, float]]] = field(default_factory=dict)
    vmem_traces: dict[str, list[tuple[int, float]]] = field(default_factory=dict)
    counters: dict[str, int] = field(default_factory=dict)
    energy_counts: dict[str, int] = field(default_factory=dict)
    errors: list[str] = field(default_factory=list)

    @property
    def energy_pj(self) -> int:
        total = 0
        for key, count in self.energy_counts.items():
            model = key.rsplit("/", 1)[-1]
            total += count * ENERGY_PJ_PER_SPIKE[model]
        return total

    def spike_times_ns(self, chip=(0, 0), core=0, neuron=None) -> list[int]:
        out = []
        for t, cx, cy, c, n in self.spikes:
            if (cx, cy) == chip and c == core and (neuron is None or n == neuron):
                out.append(t)
        return out

    # -- text rendering ----------------------------------------------------

    def spikes_text(self) -> str:
        lines = [f"{format_us(t)} {cx} {cy} {c} {n}" for t, cx, cy, c, n in self.spikes]
        return "\n".join(lines) + ("\n" if lines else "")

    def bus_exits_text(self) -> str:
        lines = [f"{format_us(t)} {raw:06x}" for t, raw in self.bus_exits]
        return "\n".join(lines) + ("\n" if lines else "")

    def trace_text(self, samples: list[tuple[int, float]]) -> str:
        lines = [f"{format_us(t)} {value!r}" for t, value in samples]
        return "\n".join(lines) + ("\n" if lines else "")

    def counters_text(self) -> str:
        lines = [f"{name} {value}" for name, value in sorted(self.counters.items())]
        for key in sorted(self.energy_counts):
            lines.append(f"spikes/{key} {self.energy_counts[key]}")
        lines.append(f"energy_pj {self.energy_pj}")
        lines.append(f"until_us {format_us(self.until_ns)}")
        for err in self.errors:
            lines.append(f"error {err}")
        return "\n".join(lines) + "\n"

    def manifest(self) -> dict[str, str]:
        files = {
            "spikes.txt": self.spikes_text(),
            "bus_exits.txt": self.bus_exits_text(),
            "counters.txt": self.counters_text(),
        }
        for channel in sorted(self.sadc_traces):
            files[f"traces/sadc_{channel:02d}.txt"] = self.trace_text(self.sadc_traces[channel])
        for name in sorted(self.vmem_traces):
            files[f"traces/vmem_{name}.txt"] = self.trace_text(self.vmem_traces[name])
        return files

    def export(self, out_dir: str | Path) -> Path:
        """Write all report files; returns the output directory."""
        out = Path(out_dir)
        for rel, content in self.manifest().items():
            path = out / rel
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(content)
        (out / "report_hash.txt").write_text(self.hash() + "\n")
        return out

    def hash(self) -> str:
        """Digest over every exported byte; equal runs hash equal."""
        digest = hashlib.sha256()
        for rel, content in sorted(self.manifest().items()):
            digest.update(rel.encode())
            digest.update(b"\0")
            digest.update(content.encode())
            digest.update(b"\0")
        return digest.hexdigest()


def sadc_counts(gain_hz_per_amp: float, samples: list[tuple[int, float]], window_s: float) -> int:
    """Pulse count a current-to-frequency channel reports for a window."""
    if gain_hz_per_amp <= 0:
        raise ValueError("gain must be positive")
    if not samples:
        return 0
    mean = sum(v for _, v in samples) / len(samples)
    return round(gain_hz_per_amp * mean * window_s)


def load_event_file(path: str | Path) -> list[tuple[int, int]]:
    """Read a "timestamp_us raw_hex24" event stream file; times to ns."""
    events = []
    for line_no, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"{path}:{line_no}: expected 'timestamp_us raw_hex24'")
        t_ns = round(float(parts[0]) * 1000)
        raw = int(parts[1], 16)
        events.append((t_ns, raw))
    return events


def save_event_file(path: str | Path, events: list[tuple[int, int]]) -> None:
    lines = [f"{format_us(t)} {raw:06x}" for t, raw in events]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def load_sensor_file(path: str | Path) -> list[tuple[int, int, int, int]]:
    """Read a "timestamp_us x y pol" sensor stream; times to ns."""
    events = []
    for line_no, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 4:
            raise ValueError(f"{path}:{line_no}: expected 'timestamp_us x y pol'")
        events.append((round(float(parts[0]) * 1000), int(parts[1]), int(parts[2]), int(parts[3])))
    return events
