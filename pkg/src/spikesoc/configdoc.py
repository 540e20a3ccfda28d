"""Hierarchical configuration tree and its JSON wire/file format.

The document mirrors the hardware hierarchy: chips hold four cores, cores
hold shared bias codes plus per-neuron latch/SRAM/synapse state.  Every
analog parameter is a (coarse, fine, k) DAC code named by its parameter
mnemonic; the engine resolves codes to currents at build time and on live
updates.  Serialization is canonical (sorted keys, fixed separators) so
identical documents produce identical bytes.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Any

from .errors import ConfigError
from .params import NOMINAL, BiasCode, bias_for_current, gate_voltage_to_current, resolve_bias

SCHEMA_VERSION = 1

CORES_PER_CHIP = 4
NEURONS_PER_CORE = 256
SYNAPSES_PER_NEURON = 64
SRAMS_PER_NEURON = 4

# Core-shared analog parameters, grouped by circuit prefix.  DEGA_REV drives
# the GABA_B conductance reversal; GABA_A has no reversal (it shunts).
BIAS_NAMES = (
    "SOIF_GAIN", "SOIF_LEAK", "SOIF_REFR", "SOIF_DC", "SOIF_SPKTHR",
    "SOAD_PWTAU", "SOAD_W", "SOAD_GAIN", "SOAD_TAU",
    "SOCA_W", "SOCA_GAIN", "SOCA_TAU",
    "SOHO_VREF", "SOHO_VREF_H", "SOHO_VREF_M", "SOHO_VREF_L",
    "SYPD_EXT", "SYPD_DLY0", "SYPD_DLY1", "SYPD_DLY2",
    "SYAM_W0", "SYAM_W1", "SYAM_W2", "SYAM_W3",
    "SYAN_STDW", "SYAN_STDSTR",
    "DEAM_ETAU", "DEAM_EGAIN", "DEAM_ITAU", "DEAM_IGAIN", "DEAM_REV",
    "DEAM_NRES", "DEAM_HRES", "DEAM_VRES",
    "DENM_ETAU", "DENM_EGAIN", "DENM_ITAU", "DENM_IGAIN", "DENM_REV", "DENM_NMREV",
    "DEGB_TAU", "DEGB_GAIN", "DEGA_REV",
    "DEGA_TAU", "DEGA_GAIN",
)

NEURON_LATCHES = (
    "SOIF_TYPE", "SO_DC", "SOIF_KILL", "SO_ADAPTATION",
    "HO_ENABLE", "HO_ACTIVE", "HO_SO_DE", "COHO_CA_MEM",
    "DEAM_ALPHA", "DENM_ALPHA", "DEAM_AMPA", "DENM_NMDA",
    "DEAM_CONDUCTANCE", "DENM_CONDUCTANCE", "DEGB_CONDUCTANCE",
)

CORE_LATCHES = ("DE_MUX",)

# Model constants overridable per core; capacitances in farads, times in
# seconds.  I_CEILING = 0 selects the default ceiling of 1000x SOIF_SPKTHR.
CORE_EXTRAS = {
    "C_MEM": 7.72e-12,
    "C_REFR": 2e-12,
    "C_SYN_PX": 2e-12,
    "C_FEEDBACK_PX": 2e-12,
    "C_DENDRITE": 1e-12,
    "C_ADAPTATION": 2e-12,
    "C_CALCIUM": 4e-12,
    "C_STP": 1e-12,
    "STP_TAU_RECOVERY": 0.05,
    "EXP_FEEDBACK_GAIN": 0.2,
    "I_CEILING": 0.0,
    "HOMEO_TIME_BASE": 60.0,
    "HOMEO_DEADBAND": 0.01,
    "HOMEO_V_GAIN_INIT": -1.0,  # negative selects the V_ref_M reset value
}

DENDRITE_NAMES = ("AMPA", "NMDA", "GABA_B", "GABA_A")

SADC_SOURCES = (
    "membrane", "adaptation_ca", "dendritic", "synapse_weight",
    "homeo_gain", "external", "calibration",
)


@dataclass
class SynapseDoc:
    cam: int = 0
    weight: tuple[bool, bool, bool, bool] = (False, False, False, False)
    precise_delay: bool = False
    mismatched_delay: bool = False
    stp: bool = False
    dendrite: str | None = None

    def validate(self, where: str) -> None:
        if not 0 <= self.cam <= 0x7FF:
            raise ConfigError(f"{where}: cam tag {self.cam} out of range")
        if len(self.weight) != 4:
            raise ConfigError(f"{where}: weight needs 4 bits")
        if self.dendrite is not None and self.dendrite not in DENDRITE_NAMES:
            raise ConfigError(f"{where}: unknown dendrite {self.dendrite!r}")


@dataclass
class SramDoc:
    tag: int = 0
    dx: int = 0
    dy: int = 0
    cores: int = 0

    def validate(self, where: str) -> None:
        if not 0 <= self.tag <= 0x7FF:
            raise ConfigError(f"{where}: tag {self.tag} out of range")
        if abs(self.dx) > 7 or abs(self.dy) > 7:
            raise ConfigError(f"{where}: displacement ({self.dx}, {self.dy}) out of range")
        if not 0 <= self.cores <= 0xF:
            raise ConfigError(f"{where}: cores mask {self.cores} out of range")


@dataclass
class NeuronDoc:
    latches: dict[str, bool] = field(default_factory=dict)
    srams: list[SramDoc] = field(default_factory=list)
    synapses: dict[int, SynapseDoc] = field(default_factory=dict)

    def validate(self, where: str) -> None:
        for name in self.latches:
            if name not in NEURON_LATCHES:
                raise ConfigError(f"{where}: unknown neuron latch {name!r}")
        if len(self.srams) > SRAMS_PER_NEURON:
            raise ConfigError(f"{where}: more than {SRAMS_PER_NEURON} source slots")
        for i, sram in enumerate(self.srams):
            sram.validate(f"{where}.srams[{i}]")
        for idx, syn in self.synapses.items():
            if not 0 <= idx < SYNAPSES_PER_NEURON:
                raise ConfigError(f"{where}: synapse index {idx} out of range")
            syn.validate(f"{where}.synapses[{idx}]")

    def latch(self, name: str) -> bool:
        return self.latches.get(name, False)


@dataclass
class CoreDoc:
    biases: dict[str, BiasCode] = field(default_factory=dict)
    latches: dict[str, bool] = field(default_factory=dict)
    extras: dict[str, float] = field(default_factory=dict)
    neurons: dict[int, NeuronDoc] = field(default_factory=dict)

    def validate(self, where: str) -> None:
        for name in self.biases:
            if name not in BIAS_NAMES:
                raise ConfigError(f"{where}: unknown bias {name!r}")
        for name in self.latches:
            if name not in CORE_LATCHES:
                raise ConfigError(f"{where}: unknown core latch {name!r}")
        for name in self.extras:
            if name not in CORE_EXTRAS:
                raise ConfigError(f"{where}: unknown model constant {name!r}")
        for idx, neuron in self.neurons.items():
            if not 0 <= idx < NEURONS_PER_CORE:
                raise ConfigError(f"{where}: neuron index {idx} out of range")
            neuron.validate(f"{where}.neurons[{idx}]")

    def bias(self, name: str) -> BiasCode:
        if name not in BIAS_NAMES:
            raise ConfigError(f"unknown bias {name!r}")
        return self.biases.get(name, BiasCode(0, 0))

    def bias_current(self, name: str) -> float:
        return resolve_bias(self.bias(name))

    def extra(self, name: str) -> float:
        if name not in CORE_EXTRAS:
            raise ConfigError(f"unknown model constant {name!r}")
        return self.extras.get(name, CORE_EXTRAS[name])

    def latch(self, name: str) -> bool:
        return self.latches.get(name, False)

    def neuron(self, idx: int) -> NeuronDoc:
        if idx not in self.neurons:
            self.neurons[idx] = NeuronDoc()
        return self.neurons[idx]


@dataclass
class SensorMapDoc:
    x: int
    y: int
    tag: int
    dx: int = 0
    dy: int = 0
    cores: int = 0
    pol: str = "both"  # "both" | "on" | "off"


@dataclass
class SensorDoc:
    geometry: tuple[int, int] = (346, 260)
    pixel_filter: list[tuple[int, int]] = field(default_factory=list)
    duplicate_to: tuple[int, int] | None = None
    pool_x: int = 1
    pool_y: int = 1
    cut_origin: tuple[int, int] = (0, 0)
    cut_size: tuple[int, int] = (64, 64)
    polarity_mode: str = "both"
    mapping: list[SensorMapDoc] = field(default_factory=list)


@dataclass
class ChipDoc:
    x: int = 0
    y: int = 0
    cores: list[CoreDoc] = field(default_factory=lambda: [CoreDoc() for _ in range(CORES_PER_CHIP)])
    sensor: SensorDoc | None = None

    def validate(self, where: str) -> None:
        if len(self.cores) != CORES_PER_CHIP:
            raise ConfigError(f"{where}: a chip has exactly {CORES_PER_CHIP} cores")
        for i, core in enumerate(self.cores):
            core.validate(f"{where}.cores[{i}]")


@dataclass
class SadcTapDoc:
    channel: int
    source: str
    chip: tuple[int, int] = (0, 0)
    core: int = 0
    neuron: int = 0
    branch: str = "AMPA"
    synapse: int = 0
    group: int = 0
    gain_hz_per_amp: float = 1e13
    interval_us: int = 1000

    def validate(self, where: str) -> None:
        if not 0 <= self.channel < 64:
            raise ConfigError(f"{where}: sADC channel {self.channel} out of range")
        if self.group not in (0, 1, 2):
            raise ConfigError(f"{where}: sADC group {self.group} out of range")
        if self.source not in SADC_SOURCES:
            raise ConfigError(f"{where}: unknown sADC source {self.source!r}")
        if self.gain_hz_per_amp <= 0:
            raise ConfigError(f"{where}: gain must be positive")
        if self.interval_us <= 0:
            raise ConfigError(f"{where}: interval must be positive")


@dataclass
class VmemTapDoc:
    chip: tuple[int, int] = (0, 0)
    core: int = 0
    neuron: int = 0
    interval_us: int = 100


@dataclass
class MonitorsDoc:
    sadc: list[SadcTapDoc] = field(default_factory=list)
    vmem: list[VmemTapDoc] = field(default_factory=list)

    def validate(self) -> None:
        seen = set()
        for tap in self.sadc:
            tap.validate("monitors.sadc")
            if tap.channel in seen:
                raise ConfigError(f"monitors.sadc: duplicate channel {tap.channel}")
            seen.add(tap.channel)


@dataclass
class EngineDoc:
    seed: int = 0
    mode: str = "closed_form"  # "closed_form" | "full"
    resample_interval_us: int = 200
    hop_latency_ns: int = 0
    grid: tuple[int, int] = (1, 1)
    input_chip: tuple[int, int] = (0, 0)
    record_bus: bool = False

    def validate(self) -> None:
        if self.mode not in ("closed_form", "full"):
            raise ConfigError(f"unknown engine mode {self.mode!r}")
        if self.resample_interval_us <= 0:
            raise ConfigError("resample_interval_us must be positive")
        if self.hop_latency_ns < 0:
            raise ConfigError("hop_latency_ns must be >= 0")
        if self.grid[0] < 1 or self.grid[1] < 1:
            raise ConfigError("grid must be at least 1x1")


@dataclass
class MismatchDoc:
    enabled: bool = False
    seed: int = 0
    cv: dict[str, float] = field(default_factory=dict)


@dataclass
class ConfigDocument:
    engine: EngineDoc = field(default_factory=EngineDoc)
    mismatch: MismatchDoc = field(default_factory=MismatchDoc)
    monitors: MonitorsDoc = field(default_factory=MonitorsDoc)
    chips: list[ChipDoc] = field(default_factory=lambda: [ChipDoc()])
    # Compiler bookkeeping (tag ownership per core) used by diagnostics;
    # absent for hand-written configurations.
    meta: dict[str, Any] = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    def validate(self) -> None:
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema version {self.schema_version}")
        self.engine.validate()
        self.monitors.validate()
        coords = set()
        for i, chip in enumerate(self.chips):
            chip.validate(f"chips[{i}]")
            if (chip.x, chip.y) in coords:
                raise ConfigError(f"chips[{i}]: duplicate coordinates ({chip.x}, {chip.y})")
            coords.add((chip.x, chip.y))

    def chip_at(self, x: int, y: int) -> ChipDoc | None:
        for chip in self.chips:
            if chip.x == x and chip.y == y:
                return chip
        return None


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def _bias_to_json(code: BiasCode) -> list:
    if code.k_parameter == 1.0:
        return [code.coarse, code.fine]
    return [code.coarse, code.fine, code.k_parameter]


def _bias_from_json(value: Any, where: str) -> BiasCode:
    if not isinstance(value, (list, tuple)) or not 2 <= len(value) <= 3:
        raise ConfigError(f"{where}: bias must be [coarse, fine] or [coarse, fine, k]")
    k = float(value[2]) if len(value) == 3 else 1.0
    return BiasCode(int(value[0]), int(value[1]), k)


def document_to_dict(doc: ConfigDocument) -> dict:
    return {
        "schema_version": doc.schema_version,
        "meta": doc.meta,
        "engine": asdict(doc.engine) | {"grid": list(doc.engine.grid), "input_chip": list(doc.engine.input_chip)},
        "mismatch": asdict(doc.mismatch),
        "monitors": {
            "sadc": [asdict(t) | {"chip": list(t.chip)} for t in doc.monitors.sadc],
            "vmem": [asdict(t) | {"chip": list(t.chip)} for t in doc.monitors.vmem],
        },
        "chips": [
            {
                "x": chip.x,
                "y": chip.y,
                "sensor": _sensor_to_dict(chip.sensor),
                "cores": [
                    {
                        "biases": {k: _bias_to_json(v) for k, v in sorted(core.biases.items())},
                        "latches": dict(sorted(core.latches.items())),
                        "extras": dict(sorted(core.extras.items())),
                        "neurons": {
                            str(idx): {
                                "latches": dict(sorted(n.latches.items())),
                                "srams": [asdict(s) for s in n.srams],
                                "synapses": {
                                    str(j): asdict(s) | {"weight": list(s.weight)}
                                    for j, s in sorted(n.synapses.items())
                                },
                            }
                            for idx, n in sorted(core.neurons.items())
                        },
                    }
                    for core in chip.cores
                ],
            }
            for chip in doc.chips
        ],
    }


def _sensor_to_dict(sensor: SensorDoc | None) -> dict | None:
    if sensor is None:
        return None
    d = asdict(sensor)
    d["geometry"] = list(sensor.geometry)
    d["cut_origin"] = list(sensor.cut_origin)
    d["cut_size"] = list(sensor.cut_size)
    d["pixel_filter"] = [list(p) for p in sensor.pixel_filter]
    d["duplicate_to"] = list(sensor.duplicate_to) if sensor.duplicate_to else None
    d["mapping"] = [asdict(m) for m in sensor.mapping]
    return d


def document_from_dict(data: dict) -> ConfigDocument:
    if not isinstance(data, dict):
        raise ConfigError("configuration root must be an object")
    doc = ConfigDocument(
        schema_version=int(data.get("schema_version", SCHEMA_VERSION)),
        meta=dict(data.get("meta", {})),
        engine=_engine_from_dict(data.get("engine", {})),
        mismatch=_mismatch_from_dict(data.get("mismatch", {})),
        monitors=_monitors_from_dict(data.get("monitors", {})),
        chips=[_chip_from_dict(c, f"chips[{i}]") for i, c in enumerate(data.get("chips", []))] or [ChipDoc()],
    )
    doc.validate()
    return doc


def _engine_from_dict(d: dict) -> EngineDoc:
    return EngineDoc(
        seed=int(d.get("seed", 0)),
        mode=d.get("mode", "closed_form"),
        resample_interval_us=int(d.get("resample_interval_us", 200)),
        hop_latency_ns=int(d.get("hop_latency_ns", 0)),
        grid=tuple(d.get("grid", (1, 1))),
        input_chip=tuple(d.get("input_chip", (0, 0))),
        record_bus=bool(d.get("record_bus", False)),
    )


def _mismatch_from_dict(d: dict) -> MismatchDoc:
    return MismatchDoc(
        enabled=bool(d.get("enabled", False)),
        seed=int(d.get("seed", 0)),
        cv={str(k): float(v) for k, v in d.get("cv", {}).items()},
    )


def _monitors_from_dict(d: dict) -> MonitorsDoc:
    sadc = [
        SadcTapDoc(
            channel=int(t["channel"]),
            source=t["source"],
            chip=tuple(t.get("chip", (0, 0))),
            core=int(t.get("core", 0)),
            neuron=int(t.get("neuron", 0)),
            branch=t.get("branch", "AMPA"),
            synapse=int(t.get("synapse", 0)),
            group=int(t.get("group", 0)),
            gain_hz_per_amp=float(t.get("gain_hz_per_amp", 1e13)),
            interval_us=int(t.get("interval_us", 1000)),
        )
        for t in d.get("sadc", [])
    ]
    vmem = [
        VmemTapDoc(
            chip=tuple(t.get("chip", (0, 0))),
            core=int(t.get("core", 0)),
            neuron=int(t.get("neuron", 0)),
            interval_us=int(t.get("interval_us", 100)),
        )
        for t in d.get("vmem", [])
    ]
    return MonitorsDoc(sadc=sadc, vmem=vmem)


def _chip_from_dict(d: dict, where: str) -> ChipDoc:
    cores_data = d.get("cores", [])
    cores = [_core_from_dict(c, f"{where}.cores[{i}]") for i, c in enumerate(cores_data)]
    while len(cores) < CORES_PER_CHIP:
        cores.append(CoreDoc())
    return ChipDoc(
        x=int(d.get("x", 0)),
        y=int(d.get("y", 0)),
        cores=cores,
        sensor=_sensor_from_dict(d.get("sensor")),
    )


def _core_from_dict(d: dict, where: str) -> CoreDoc:
    biases = {
        str(name): _bias_from_json(v, f"{where}.biases.{name}")
        for name, v in d.get("biases", {}).items()
    }
    neurons = {}
    for key, nd in d.get("neurons", {}).items():
        idx = int(key)
        neurons[idx] = NeuronDoc(
            latches={str(k): bool(v) for k, v in nd.get("latches", {}).items()},
            srams=[
                SramDoc(tag=int(s["tag"]), dx=int(s.get("dx", 0)), dy=int(s.get("dy", 0)), cores=int(s.get("cores", 0)))
                for s in nd.get("srams", [])
            ],
            synapses={
                int(j): SynapseDoc(
                    cam=int(s.get("cam", 0)),
                    weight=tuple(bool(b) for b in s.get("weight", (False,) * 4)),
                    precise_delay=bool(s.get("precise_delay", False)),
                    mismatched_delay=bool(s.get("mismatched_delay", False)),
                    stp=bool(s.get("stp", False)),
                    dendrite=s.get("dendrite"),
                )
                for j, s in nd.get("synapses", {}).items()
            },
        )
    return CoreDoc(
        biases=biases,
        latches={str(k): bool(v) for k, v in d.get("latches", {}).items()},
        extras={str(k): float(v) for k, v in d.get("extras", {}).items()},
        neurons=neurons,
    )


def _sensor_from_dict(d: dict | None) -> SensorDoc | None:
    if d is None:
        return None
    return SensorDoc(
        geometry=tuple(d.get("geometry", (346, 260))),
        pixel_filter=[tuple(p) for p in d.get("pixel_filter", [])],
        duplicate_to=tuple(d["duplicate_to"]) if d.get("duplicate_to") else None,
        pool_x=int(d.get("pool_x", 1)),
        pool_y=int(d.get("pool_y", 1)),
        cut_origin=tuple(d.get("cut_origin", (0, 0))),
        cut_size=tuple(d.get("cut_size", (64, 64))),
        polarity_mode=d.get("polarity_mode", "both"),
        mapping=[
            SensorMapDoc(
                x=int(m["x"]), y=int(m["y"]), tag=int(m["tag"]),
                dx=int(m.get("dx", 0)), dy=int(m.get("dy", 0)),
                cores=int(m.get("cores", 0)), pol=m.get("pol", "both"),
            )
            for m in d.get("mapping", [])
        ],
    )


def serialize(doc: ConfigDocument) -> str:
    """Canonical JSON text: stable byte-for-byte for equal documents."""
    return json.dumps(document_to_dict(doc), sort_keys=True, separators=(",", ":")) + "\n"


def parse(text: str) -> ConfigDocument:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid configuration JSON: {exc}") from exc
    return document_from_dict(data)


# ---------------------------------------------------------------------------
# Dotted-path access for live parameter updates
# ---------------------------------------------------------------------------


def _walk(doc: ConfigDocument, path: str):
    """Resolve 'chips.I.cores.J.biases.NAME' style paths to their container."""
    parts = path.split(".")
    if len(parts) < 4 or parts[0] != "chips" or parts[2] != "cores":
        raise ConfigError(f"unsupported parameter path {path!r}")
    try:
        chip = doc.chips[int(parts[1])]
        core = chip.cores[int(parts[3])]
    except (IndexError, ValueError) as exc:
        raise ConfigError(f"bad indices in path {path!r}") from exc
    return core, parts[4:]


def get_bias(doc: ConfigDocument, path: str) -> BiasCode:
    core, rest = _walk(doc, path)
    if len(rest) != 2 or rest[0] != "biases":
        raise ConfigError(f"not a bias path: {path!r}")
    return core.bias(rest[1])


def set_bias(doc: ConfigDocument, path: str, code: BiasCode) -> None:
    core, rest = _walk(doc, path)
    if len(rest) != 2 or rest[0] != "biases":
        raise ConfigError(f"not a bias path: {path!r}")
    if rest[1] not in BIAS_NAMES:
        raise ConfigError(f"unknown bias {rest[1]!r}")
    core.biases[rest[1]] = code


def set_latch(doc: ConfigDocument, path: str, value: bool) -> None:
    core, rest = _walk(doc, path)
    if len(rest) == 2 and rest[0] == "latches":
        if rest[1] not in CORE_LATCHES:
            raise ConfigError(f"unknown core latch {rest[1]!r}")
        core.latches[rest[1]] = bool(value)
        return
    if len(rest) == 4 and rest[0] == "neurons" and rest[2] == "latches":
        if rest[3] not in NEURON_LATCHES:
            raise ConfigError(f"unknown neuron latch {rest[3]!r}")
        core.neuron(int(rest[1])).latches[rest[3]] = bool(value)
        return
    raise ConfigError(f"not a latch path: {path!r}")


# ---------------------------------------------------------------------------
# Calibration profile
# ---------------------------------------------------------------------------


def nominal_core_biases() -> dict[str, BiasCode]:
    """Bias set reproducing the reference slew and refractory measurements.

    Leak at the transistor-leakage floor (0.834 pA on 7.72 pF gives the
    108 mV/s ramp) and the weakest refractory bias (1.71 pA on 2 pF gives
    the 1.58 s ceiling); the rest are moderate mid-range values.
    """
    return {
        "SOIF_LEAK": bias_for_current(0.834e-12),
        "SOIF_GAIN": bias_for_current(400e-12),
        "SOIF_REFR": bias_for_current(1.71e-12),
        "SOIF_DC": BiasCode(0, 0),
        "SOIF_SPKTHR": bias_for_current(10e-9),
        "SOAD_PWTAU": bias_for_current(1.35e-9),
        "SOAD_W": bias_for_current(100e-12),
        "SOAD_GAIN": bias_for_current(4e-12),
        "SOAD_TAU": bias_for_current(2e-12),
        "SOCA_W": bias_for_current(30e-12),
        "SOCA_GAIN": bias_for_current(4e-12),
        "SOCA_TAU": bias_for_current(1e-12),
        "SOHO_VREF": bias_for_current(30e-12),
        "SOHO_VREF_H": bias_for_current(gate_current_for_voltage(0.36)),
        "SOHO_VREF_M": bias_for_current(gate_current_for_voltage(0.30)),
        "SOHO_VREF_L": bias_for_current(gate_current_for_voltage(0.24)),
        "SYPD_EXT": bias_for_current(2.7e-9),
        "SYPD_DLY0": bias_for_current(2.7e-9),
        "SYPD_DLY1": bias_for_current(10.8e-9),
        "SYPD_DLY2": bias_for_current(5.4e-9),
        "SYAM_W0": bias_for_current(80e-12),
        "SYAM_W1": bias_for_current(40e-12),
        "SYAM_W2": bias_for_current(20e-12),
        "SYAM_W3": bias_for_current(10e-12),
        "SYAN_STDW": bias_for_current(gate_current_for_voltage(0.3)),
        "SYAN_STDSTR": bias_for_current(2e-12),
        "DEAM_ETAU": bias_for_current(7e-12),
        "DEAM_EGAIN": bias_for_current(28e-12),
        "DEAM_ITAU": bias_for_current(35e-12),
        "DEAM_IGAIN": bias_for_current(28e-12),
        "DEAM_REV": bias_for_current(gate_current_for_voltage(0.5)),
        "DEAM_NRES": bias_for_current(100e-12),
        "DEAM_HRES": bias_for_current(5e-12),
        "DEAM_VRES": bias_for_current(5e-12),
        "DENM_ETAU": bias_for_current(7e-12),
        "DENM_EGAIN": bias_for_current(28e-12),
        "DENM_ITAU": bias_for_current(35e-12),
        "DENM_IGAIN": bias_for_current(28e-12),
        "DENM_REV": bias_for_current(gate_current_for_voltage(0.7)),
        "DENM_NMREV": bias_for_current(gate_current_for_voltage(0.1)),
        "DEGB_TAU": bias_for_current(7e-12),
        "DEGB_GAIN": bias_for_current(28e-12),
        "DEGA_REV": bias_for_current(gate_current_for_voltage(0.3)),
        "DEGA_TAU": bias_for_current(7e-12),
        "DEGA_GAIN": bias_for_current(28e-12),
    }


def gate_current_for_voltage(voltage: float) -> float:
    """Current whose N-type gate voltage equals ``voltage`` at nominal constants."""
    return gate_voltage_to_current(voltage, "N", NOMINAL)


def nominal_document(grid: tuple[int, int] = (1, 1)) -> ConfigDocument:
    """A fresh document with calibrated biases on every core."""
    chips = []
    for x in range(grid[0]):
        for y in range(grid[1]):
            chips.append(
                ChipDoc(x=x, y=y, cores=[CoreDoc(biases=dict(nominal_core_biases())) for _ in range(CORES_PER_CHIP)])
            )
    doc = ConfigDocument(chips=chips, engine=EngineDoc(grid=grid))
    doc.validate()
    return doc
