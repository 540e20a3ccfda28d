"""Deterministic event-driven simulation of the full chip grid.

Time is a 64-bit count of nanoseconds; the queue pops in strict
(time, kind priority, sequence) order, so identical inputs replay to
identical reports.  Between events every filter evolves in closed form
with inputs frozen at the last boundary; neurons whose soma input is fed
by continuously varying sources (decaying branch filters, adaptation,
conductance and gating transforms, the diffusion grid, homeostasis) are
kept on a periodic resample tick that re-freezes their drive.

Spikes are never found by stepping: after every change to a neuron's
drive the analytic next-spike time is computed and scheduled as its own
event (stale predictions are invalidated by a per-neuron generation
counter), which keeps the common spike paths exact to float precision.

Resampling runs as one tick chain per coupled neuron, re-anchored at each
of its own events.  Anchoring matters: it phase-locks the sampling grid to
the neuron's firing cycle, so periodic regimes resample identically every
period instead of dithering against a global grid.
"""

from __future__ import annotations

import hashlib
import heapq
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import soma as soma_ops
from .configdoc import (
    ConfigDocument,
    CoreDoc,
    NeuronDoc,
    SensorDoc,
    set_bias,
    set_latch,
)
from .dendrite import (
    Branch,
    DiffusionGridConfig,
    DiffusionSolver,
    conductance_from_bias,
    conductance_transform,
    nmda_gate,
)
from .errors import ConfigError
from .kernels import (
    DpiParams,
    DpiState,
    dpi_advance,
    dpi_integrate_full,
    px_delay_time,
    px_pulse_width,
)
from .mismatch import DEFAULT_CV, MismatchModel
from .params import NOMINAL, BiasCode, PhysicsConstants, current_to_gate_voltage, resolve_bias
from .report import SimulationReport
from .routing import (
    Direction,
    SensorEvent,
    SramEntry,
    decode_word,
    direction_step,
    encode_word,
    fan_out,
    forward_displacements,
    mux_soma_of,
    route_decision,
)
from .sensor import (
    MappingEntry,
    PipelineCounters,
    SensorPipelineConfig,
    process_sensor_event,
)
from .synapse import (
    StpState,
    SynapseConfig,
    stp_on_pulse,
    stp_recover,
    stp_weight_current,
    synapse_delay_current,
)

NS = 1e-9

# Pop priorities at equal timestamps; any fixed order works, this one is
# the contract.
PRIO_EXT = 0
PRIO_DELIVER = 1
PRIO_PULSE = 2
PRIO_SPIKE = 3
PRIO_RESAMPLE = 4
PRIO_MONITOR = 5
PRIO_CONTROL = 9

# Branch output below this plays no role; lets neurons leave the resample set.
CURRENT_EPS = 1e-16


def _ns(t_s: float) -> int:
    return math.ceil(t_s / NS - 1e-9)


@dataclass
class SynapseUnit:
    cfg: SynapseConfig
    delay_ns: int
    pulse_ns: int
    weight_current: float
    busy_until_ns: int = -1
    inflight_w: float = 0.0
    stp: StpState | None = None
    stp_last_s: float = 0.0


@dataclass
class BranchUnit:
    branch: Branch
    params: DpiParams
    state: DpiState = field(default_factory=DpiState)
    accum: float = 0.0
    alpha_enabled: bool = False
    alpha_params: DpiParams | None = None
    alpha_state: DpiState = field(default_factory=DpiState)
    conductance_enabled: bool = False
    V_reversal: float = 0.0
    gate_source: str = "membrane"
    nmda_gated: bool = False
    V_nmda: float = 0.0
    diffusion_enabled: bool = False
    gain_override: float | None = None

    def active(self) -> bool:
        return (
            self.accum > 0.0
            or self.state.I_out > CURRENT_EPS
            or (self.alpha_enabled and self.alpha_state.I_out > CURRENT_EPS)
        )


@dataclass
class NeuronUnit:
    key: tuple[int, int, int]  # (chip index, core, neuron)
    soma_cfg: soma_ops.SomaConfig
    soma_state: soma_ops.SomaState
    branches: dict[Branch, BranchUnit] = field(default_factory=dict)
    synapses: dict[int, SynapseUnit] = field(default_factory=dict)
    srams: list[SramEntry] = field(default_factory=list)
    held: soma_ops.SomaInputs = field(default_factory=soma_ops.SomaInputs)
    spike_gen: int = 0
    tick_gen: int = 0
    is_root: bool = True
    root_key: tuple[int, int, int] | None = None
    members: list[tuple[int, int, int]] = field(default_factory=list)


class CoreUnit:
    def __init__(self, chip_idx: int, core_idx: int, doc: CoreDoc, engine: "Engine"):
        self.doc = doc
        self.chip_idx = chip_idx
        self.core_idx = core_idx
        self.de_mux = doc.latch("DE_MUX")
        self.tag_index: dict[int, list[tuple[int, int]]] = {}
        self.neuron_keys: list[tuple[int, int, int]] = []
        self.diffusion: DiffusionSolver | None = None
        self.diffusion_out: dict[int, float] = {}
        self.diffusion_solved_ns: int = -1
        self.diffusion_live: bool = False
        self.grid_root_keys: list[tuple[int, int, int]] = []
        mask = [False] * 256
        any_diffusion = False
        for idx in sorted(doc.neurons):
            ndoc = doc.neurons[idx]
            if ndoc.latch("DEAM_AMPA"):
                mask[idx] = True
                any_diffusion = True
        if any_diffusion:
            g_n = conductance_from_bias(doc.bias_current("DEAM_NRES"), engine.consts)
            g_h = conductance_from_bias(doc.bias_current("DEAM_HRES"), engine.consts)
            g_v = conductance_from_bias(doc.bias_current("DEAM_VRES"), engine.consts)
            self.diffusion = DiffusionSolver(
                DiffusionGridConfig(g_n=g_n, g_h=g_h, g_v=g_v, enabled_mask=tuple(mask))
            )
        self.diffusion_mask = mask


class ChipUnit:
    def __init__(self, coord: tuple[int, int], index: int, sensor: SensorDoc | None):
        self.coord = coord
        self.index = index
        self.sensor_cfg: SensorPipelineConfig | None = None
        self.sensor_counters = PipelineCounters()
        if sensor is not None:
            self.sensor_cfg = _build_sensor_cfg(sensor)


def _build_sensor_cfg(doc: SensorDoc) -> SensorPipelineConfig:
    mapping: dict = {}
    mapping_on: dict = {}
    mapping_off: dict = {}
    for m in doc.mapping:
        entry = MappingEntry(tag=m.tag, dx=m.dx, dy=m.dy, cores=m.cores)
        if m.pol == "both":
            mapping[(m.x, m.y)] = entry
        elif m.pol == "on":
            mapping_on[(m.x, m.y)] = entry
        elif m.pol == "off":
            mapping_off[(m.x, m.y)] = entry
        else:
            raise ConfigError(f"unknown mapping polarity {m.pol!r}")
    return SensorPipelineConfig(
        geometry=doc.geometry,
        pixel_filter=tuple(doc.pixel_filter),
        duplicate_to=doc.duplicate_to,
        pool_x=doc.pool_x,
        pool_y=doc.pool_y,
        cut_origin=doc.cut_origin,
        cut_size=doc.cut_size,
        polarity_mode=doc.polarity_mode,
        mapping=mapping,
        mapping_on=mapping_on or None,
        mapping_off=mapping_off or None,
    )


class Engine:
    """Single-threaded deterministic simulator over one configuration."""

    def __init__(self, doc: ConfigDocument, consts: PhysicsConstants = NOMINAL):
        doc.validate()
        self.doc = doc
        self.consts = consts
        self.mismatch = MismatchModel(
            seed=doc.mismatch.seed,
            cv_by_class={**DEFAULT_CV, **doc.mismatch.cv},
            enabled=doc.mismatch.enabled,
        )
        self.mode = doc.engine.mode
        self.now_ns = 0
        self._seq = 0
        self._queue: list = []
        self.report = SimulationReport()
        self.config_version = 0
        self.chips: dict[tuple[int, int], ChipUnit] = {}
        self.cores: dict[tuple[int, int], CoreUnit] = {}
        self.neurons: dict[tuple[int, int, int], NeuronUnit] = {}
        self._resample_ns = doc.engine.resample_interval_us * 1000
        self._hop_latency = doc.engine.hop_latency_ns
        self._build()

    # -- construction --------------------------------------------------

    def _build(self) -> None:
        for i, chip_doc in enumerate(self.doc.chips):
            coord = (chip_doc.x, chip_doc.y)
            self.chips[coord] = ChipUnit(coord, i, chip_doc.sensor)
            for k, core_doc in enumerate(chip_doc.cores):
                core = CoreUnit(i, k, core_doc, self)
                self.cores[(i, k)] = core
                for idx in sorted(core_doc.neurons):
                    self._build_neuron(i, k, idx, core_doc)
                for idx in sorted(core_doc.neurons):
                    ndoc = core_doc.neurons[idx]
                    for s_idx in sorted(ndoc.synapses):
                        self.tag_register(core, idx, s_idx, ndoc.synapses[s_idx].cam)
        for tap in self.doc.monitors.sadc:
            self._ensure_monitor_target(tap.chip, tap.core, tap.neuron)
            self.report.sadc_traces[tap.channel] = []
            self._push(0, PRIO_MONITOR, ("sadc", tap.channel))
        for tap in self.doc.monitors.vmem:
            self._ensure_monitor_target(tap.chip, tap.core, tap.neuron)
            name = f"{tap.chip[0]}_{tap.chip[1]}_c{tap.core}_n{tap.neuron}"
            self.report.vmem_traces[name] = []
            self._push(0, PRIO_MONITOR, ("vmem", name))
        # Mux grouping: non-root neurons hand their branch outputs to the root.
        for key in sorted(self.neurons):
            nrn = self.neurons[key]
            chip_idx, core_idx, idx = key
            core = self.cores[(chip_idx, core_idx)]
            root_idx = mux_soma_of(idx, core.de_mux)
            root_key = (chip_idx, core_idx, root_idx)
            if root_key not in self.neurons and root_idx != idx:
                self._build_neuron(chip_idx, core_idx, root_idx, core.doc)
                new_root = self.neurons[root_key]
                new_root.root_key = root_key
                new_root.is_root = True
            nrn.root_key = root_key
            nrn.is_root = root_key == key
        for key in sorted(self.neurons):
            nrn = self.neurons[key]
            root = self.neurons[nrn.root_key]
            if key not in root.members:
                root.members.append(key)
        # Roots whose members sit on a live diffusion grid get resampled
        # together: the grid couples them physically.
        for key in sorted(self.neurons):
            nrn = self.neurons[key]
            core = self.cores[key[:2]]
            if core.diffusion is not None and core.diffusion_mask[key[2]]:
                if nrn.root_key not in core.grid_root_keys:
                    core.grid_root_keys.append(nrn.root_key)
        for key in sorted(self.neurons):
            if self.neurons[key].is_root:
                self._refresh(self.neurons[key])

    def tag_register(self, core: CoreUnit, n_idx: int, s_idx: int, tag: int) -> None:
        core.tag_index.setdefault(tag, []).append((n_idx, s_idx))

    def _ensure_monitor_target(self, chip: tuple[int, int], core: int, neuron: int) -> None:
        chip_doc = self.doc.chip_at(*chip)
        if chip_doc is None:
            raise ConfigError(f"monitor targets missing chip {chip}")
        chip_idx = self.chips[chip].index
        key = (chip_idx, core, neuron)
        if key not in self.neurons:
            core_doc = chip_doc.cores[core]
            core_doc.neuron(neuron)
            self._build_neuron(chip_idx, core, neuron, core_doc)
            nrn = self.neurons[key]
            nrn.root_key = key
            nrn.is_root = True
            if key not in nrn.members:
                nrn.members.append(key)

    def _factor(self, path: str) -> float:
        return self.mismatch.factor(path)

    def _mk_dpi(self, i_tau: float, i_gain: float, cap: float) -> DpiParams:
        floor = self.consts.I_0
        return DpiParams(I_tau=max(i_tau, floor), I_gain=max(i_gain, floor), C=cap)

    def _build_neuron(self, chip_idx: int, core_idx: int, idx: int, core: CoreDoc) -> None:
        key = (chip_idx, core_idx, idx)
        if key in self.neurons:
            return
        ndoc = core.neurons.get(idx, NeuronDoc())
        prefix = f"chip{chip_idx}/core{core_idx}/n{idx}"
        bc = core.bias_current
        f = self._factor

        homeo = None
        if ndoc.latch("HO_ENABLE"):
            v_h = current_to_gate_voltage(max(bc("SOHO_VREF_H"), self.consts.I_0), "N", self.consts)
            v_m = current_to_gate_voltage(max(bc("SOHO_VREF_M"), self.consts.I_0), "N", self.consts)
            v_l = current_to_gate_voltage(max(bc("SOHO_VREF_L"), self.consts.I_0), "N", self.consts)
            up, down = soma_ops.homeostasis_rates(v_h, v_m, v_l, core.extra("HOMEO_TIME_BASE"))
            homeo = soma_ops.HomeostasisConfig(
                I_ca_ref=max(bc("SOHO_VREF"), self.consts.I_0),
                V_ref_H=v_h,
                V_ref_M=v_m,
                V_ref_L=v_l,
                rate_up=up,
                rate_down=down,
                deadband=core.extra("HOMEO_DEADBAND"),
            )

        adaptation_on = ndoc.latch("SO_ADAPTATION")
        calcium_needed = ndoc.latch("HO_ENABLE") or ndoc.latch("COHO_CA_MEM") or adaptation_on
        cfg = soma_ops.SomaConfig(
            model="exponential" if ndoc.latch("SOIF_TYPE") else "thresholded",
            I_leak=bc("SOIF_LEAK") * f(f"{prefix}/leak"),
            I_gain=bc("SOIF_GAIN") * f(f"{prefix}/gain"),
            I_refr=bc("SOIF_REFR") * f(f"{prefix}/refr"),
            I_dc=bc("SOIF_DC") * f(f"{prefix}/dc"),
            I_spkthr=bc("SOIF_SPKTHR") * f(f"{prefix}/spkthr"),
            dc_enabled=ndoc.latch("SO_DC"),
            killed=ndoc.latch("SOIF_KILL"),
            adaptation_enabled=adaptation_on,
            homeostasis_enabled=ndoc.latch("HO_ENABLE"),
            homeostasis_active=ndoc.latch("HO_ACTIVE"),
            homeostasis_target="nmda" if ndoc.latch("HO_SO_DE") else "soma",
            homeostasis=homeo,
            C_mem=core.extra("C_MEM") * f(f"{prefix}/cmem"),
            C_refr=core.extra("C_REFR"),
            exp_feedback_gain=core.extra("EXP_FEEDBACK_GAIN"),
            I_ceiling=core.extra("I_CEILING") or None,
            adaptation_dpi=self._mk_dpi(bc("SOAD_TAU"), bc("SOAD_GAIN"), core.extra("C_ADAPTATION"))
            if adaptation_on
            else None,
            adaptation_weight=bc("SOAD_W"),
            calcium_dpi=self._mk_dpi(bc("SOCA_TAU"), bc("SOCA_GAIN"), core.extra("C_CALCIUM"))
            if calcium_needed
            else None,
            calcium_weight=bc("SOCA_W"),
            feedback_pw_current=max(bc("SOAD_PWTAU"), self.consts.I_0),
            feedback_C=core.extra("C_FEEDBACK_PX"),
        )
        v_gain0 = 0.0
        if homeo is not None:
            v_init = core.extra("HOMEO_V_GAIN_INIT")
            v_gain0 = homeo.V_ref_M if v_init < 0 else v_init
        if self.mode == "full" and cfg.model == "exponential":
            raise ConfigError("full engine mode supports the thresholded soma model only")
        nrn = NeuronUnit(
            key=key,
            soma_cfg=cfg,
            soma_state=soma_ops.SomaState(V_gain=v_gain0),
        )

        # Branches are instantiated where latches or synapse targets use them.
        used = {Branch(s.dendrite) for s in ndoc.synapses.values() if s.dendrite}
        if ndoc.latch("DEAM_AMPA") or ndoc.latch("DEAM_ALPHA") or ndoc.latch("DEAM_CONDUCTANCE"):
            used.add(Branch.AMPA)
        if ndoc.latch("DENM_NMDA") or ndoc.latch("DENM_ALPHA") or ndoc.latch("DENM_CONDUCTANCE"):
            used.add(Branch.NMDA)
        if ndoc.latch("DEGB_CONDUCTANCE"):
            used.add(Branch.GABA_B)
        for branch in sorted(used, key=lambda b: b.value):
            nrn.branches[branch] = self._build_branch(branch, ndoc, core, prefix)

        for s_idx in sorted(ndoc.synapses):
            nrn.synapses[s_idx] = self._build_synapse(ndoc.synapses[s_idx], core, f"{prefix}/syn{s_idx}")

        nrn.srams = [
            SramEntry(tag=s.tag, dx=s.dx, dy=s.dy, cores=s.cores) for s in ndoc.srams
        ]
        self.neurons[key] = nrn
        self.cores[(chip_idx, core_idx)].neuron_keys.append(key)

    def _build_branch(self, branch: Branch, ndoc: NeuronDoc, core: CoreDoc, prefix: str) -> BranchUnit:
        bc = core.bias_current
        cap = core.extra("C_DENDRITE")
        f = self._factor
        names = {
            Branch.AMPA: ("DEAM_ETAU", "DEAM_EGAIN", "DEAM_ITAU", "DEAM_IGAIN", "DEAM_REV"),
            Branch.NMDA: ("DENM_ETAU", "DENM_EGAIN", "DENM_ITAU", "DENM_IGAIN", "DENM_REV"),
            Branch.GABA_B: ("DEGB_TAU", "DEGB_GAIN", None, None, "DEGA_REV"),
            Branch.GABA_A: ("DEGA_TAU", "DEGA_GAIN", None, None, None),
        }[branch]
        tag = branch.value.lower()
        params = self._mk_dpi(bc(names[0]) * f(f"{prefix}/{tag}/tau"), bc(names[1]), cap)
        unit = BranchUnit(branch=branch, params=params)
        alpha_latch = {"AMPA": "DEAM_ALPHA", "NMDA": "DENM_ALPHA"}.get(branch.value)
        if alpha_latch and ndoc.latch(alpha_latch) and names[2]:
            unit.alpha_enabled = True
            unit.alpha_params = self._mk_dpi(bc(names[2]), bc(names[3]), cap)
        cond_latch = {
            "AMPA": "DEAM_CONDUCTANCE",
            "NMDA": "DENM_CONDUCTANCE",
            "GABA_B": "DEGB_CONDUCTANCE",
        }.get(branch.value)
        if cond_latch and ndoc.latch(cond_latch) and names[4]:
            unit.conductance_enabled = True
            unit.V_reversal = current_to_gate_voltage(
                max(bc(names[4]), self.consts.I_0), "N", self.consts
            )
            unit.gate_source = "calcium" if ndoc.latch("COHO_CA_MEM") else "membrane"
        if branch is Branch.NMDA and ndoc.latch("DENM_NMDA"):
            unit.nmda_gated = True
            unit.V_nmda = current_to_gate_voltage(
                max(bc("DENM_NMREV"), self.consts.I_0), "N", self.consts
            )
        if branch is Branch.AMPA and ndoc.latch("DEAM_AMPA"):
            unit.diffusion_enabled = True
        return unit

    def _build_synapse(self, sdoc, core: CoreDoc, prefix: str) -> SynapseUnit:
        f = self._factor
        cfg = SynapseConfig(
            cam_tag=sdoc.cam,
            weight_bits=tuple(sdoc.weight),
            precise_delay=sdoc.precise_delay,
            mismatched_delay=sdoc.mismatched_delay,
            stp_enabled=sdoc.stp,
            target_dendrite=Branch(sdoc.dendrite) if sdoc.dendrite else None,
        )
        bc = core.bias_current
        dly_factors = (f(f"{prefix}/dly0"), f(f"{prefix}/dly1"), f(f"{prefix}/dly2"))
        i_delay = synapse_delay_current(
            cfg, (max(bc("SYPD_DLY0"), self.consts.I_0), bc("SYPD_DLY1"), bc("SYPD_DLY2")), dly_factors
        )
        c_px = core.extra("C_SYN_PX")
        delay_ns = max(1, round(px_delay_time(i_delay, c_px, self.consts) / NS))
        i_pw = max(bc("SYPD_EXT"), self.consts.I_0)
        pulse_ns = max(1, round(px_pulse_width(i_pw, c_px, self.consts) / NS))
        bases = (bc("SYAM_W0"), bc("SYAM_W1"), bc("SYAM_W2"), bc("SYAM_W3"))
        w_factors = tuple(f(f"{prefix}/w{b}") for b in range(4))
        weight = sum(b * wf for b, wf, bit in zip(bases, w_factors, cfg.weight_bits) if bit)
        unit = SynapseUnit(cfg=cfg, delay_ns=delay_ns, pulse_ns=pulse_ns, weight_current=weight)
        if cfg.stp_enabled:
            v_stpw = current_to_gate_voltage(max(bc("SYAN_STDW"), self.consts.I_0), "N", self.consts)
            unit.stp = StpState(
                V_stp=v_stpw,
                V_stpw=v_stpw,
                I_stpstr=bc("SYAN_STDSTR"),
                tau_recovery=core.extra("STP_TAU_RECOVERY"),
                C_stp=core.extra("C_STP"),
            )
        return unit

    # -- event queue -----------------------------------------------------

    def _push(self, t_ns: int, prio: int, payload: tuple) -> None:
        self._seq += 1
        heapq.heappush(self._queue, (t_ns, prio, self._seq, payload))

    def inject_word(self, t_ns: int, raw: int) -> None:
        """Queue one external 24-bit event word entering at the input chip."""
        self._push(t_ns, PRIO_EXT, ("ext", raw))

    def inject_events(self, events) -> None:
        for t_ns, raw in events:
            self.inject_word(t_ns, raw)

    def inject_sensor_events(self, events) -> None:
        """Queue (t_ns, x, y, pol) tuples as local sensor words."""
        for t_ns, x, y, pol in events:
            raw = encode_word(SensorEvent(pol=pol, pixel_y=y, pixel_x=x))
            self.inject_word(t_ns, raw)

    def run_until(self, until_ns: int, drain=None) -> SimulationReport:
        """Process every event at or before ``until_ns``.

        ``drain``, when given, is called between distinct timestamps so a
        host can apply control commands at deterministic points.
        """
        while self._queue and self._queue[0][0] <= until_ns:
            t_ns = self._queue[0][0]
            if drain is not None and t_ns > self.now_ns:
                drain(self.now_ns)
            t_ns, prio, _seq, payload = heapq.heappop(self._queue)
            self.now_ns = max(self.now_ns, t_ns)
            self._handle(payload)
        if drain is not None:
            drain(self.now_ns)
        self.now_ns = max(self.now_ns, until_ns)
        for key in sorted(self.neurons):
            nrn = self.neurons[key]
            if nrn.is_root:
                self._advance(nrn, self.now_ns)
        self.report.until_ns = self.now_ns
        return self.report

    def _count(self, name: str, n: int = 1) -> None:
        self.report.counters[name] = self.report.counters.get(name, 0) + n

    # -- event handlers ----------------------------------------------------

    def _handle(self, payload: tuple) -> None:
        kind = payload[0]
        if kind == "ext":
            self._count("ext_words")
            try:
                event = decode_word(payload[1])
            except Exception as exc:  # malformed words are recorded, not fatal
                self.report.errors.append(f"bad word at {self.now_ns}ns: {exc}")
                self._count("bad_words")
                return
            chip = self.doc.engine.input_chip
            self._deliver(tuple(chip), event)
        elif kind == "deliver":
            self._deliver(payload[1], payload[2])
        elif kind == "pulse_start":
            self._pulse_start(payload[1], payload[2])
        elif kind == "pulse_end":
            self._pulse_end(payload[1], payload[2], payload[3])
        elif kind == "spike":
            self._spike_event(payload[1], payload[2])
        elif kind == "ntick":
            self._neuron_tick(payload[1], payload[2])
        elif kind == "sadc":
            self._sample_sadc(payload[1])
        elif kind == "vmem":
            self._sample_vmem(payload[1])
        else:
            raise AssertionError(f"unknown event kind {kind!r}")

    def _deliver(self, coord: tuple[int, int], event) -> None:
        chip = self.chips.get(coord)
        if chip is None:
            self._count("dropped_off_grid")
            self.report.bus_exits.append((self.now_ns, encode_word(event)))
            return
        if isinstance(event, SensorEvent):
            direction = route_decision(event.dx.value, event.dy.value)
            if direction is Direction.LOCAL:
                self._sensor_local(chip, event)
            else:
                ndx, ndy = forward_displacements(event.dx, event.dy, direction)
                step = direction_step(direction)
                target = (coord[0] + step[0], coord[1] + step[1])
                self._push(
                    self.now_ns + self._hop_latency,
                    PRIO_DELIVER,
                    ("deliver", target, replace(event, dx=ndx, dy=ndy)),
                )
            return
        direction = route_decision(event.dx.value, event.dy.value)
        if direction is Direction.LOCAL:
            if event.cores == 0:
                self._count("dropped_cores0")
                return
            for core_idx in range(4):
                if event.cores & (1 << core_idx):
                    self._broadcast(chip.index, core_idx, event.tag)
        else:
            ndx, ndy = forward_displacements(event.dx, event.dy, direction)
            step = direction_step(direction)
            target = (coord[0] + step[0], coord[1] + step[1])
            self._push(
                self.now_ns + self._hop_latency,
                PRIO_DELIVER,
                ("deliver", target, replace(event, dx=ndx, dy=ndy)),
            )
            self._count("hops")

    def _sensor_local(self, chip: ChipUnit, event: SensorEvent) -> None:
        if chip.sensor_cfg is None:
            self._count("sensor_no_pipeline")
            return
        mapped, duplicate = process_sensor_event(event, chip.sensor_cfg, chip.sensor_counters)
        if duplicate is not None:
            self._push(self.now_ns, PRIO_DELIVER, ("deliver", chip.coord, duplicate))
        if mapped is not None:
            self._push(self.now_ns, PRIO_DELIVER, ("deliver", chip.coord, mapped))

    def _broadcast(self, chip_idx: int, core_idx: int, tag: int) -> None:
        core = self.cores.get((chip_idx, core_idx))
        self._count("broadcasts")
        if core is None:
            return
        for n_idx, s_idx in core.tag_index.get(tag, []):
            self._count("cam_matches")
            self._trigger_synapse((chip_idx, core_idx, n_idx), s_idx)

    def _trigger_synapse(self, key: tuple[int, int, int], s_idx: int) -> None:
        nrn = self.neurons[key]
        syn = nrn.synapses[s_idx]
        if syn.cfg.target_dendrite is None:
            self._count("syn_unconnected")
            return
        if self.now_ns < syn.busy_until_ns:
            self._count("syn_dropped_busy")
            return
        syn.busy_until_ns = self.now_ns + syn.delay_ns + syn.pulse_ns
        self._push(self.now_ns + syn.delay_ns, PRIO_PULSE, ("pulse_start", key, s_idx))
        self._count("syn_accepted")

    def _pulse_start(self, key: tuple[int, int, int], s_idx: int) -> None:
        nrn = self.neurons[key]
        syn = nrn.synapses[s_idx]
        t_s = self.now_ns * NS
        root = self.neurons[nrn.root_key]
        self._advance(root, self.now_ns)
        if not nrn.is_root:
            self._advance_branches(nrn, t_s)
        if syn.cfg.stp_enabled and syn.stp is not None:
            syn.stp = stp_recover(syn.stp, max(t_s - syn.stp_last_s, 0.0))
            w = stp_weight_current(syn.stp, self.consts)
            syn.stp = stp_on_pulse(syn.stp, syn.pulse_ns * NS)
            syn.stp_last_s = t_s
        else:
            w = syn.weight_current
        syn.inflight_w = w
        branch = nrn.branches[syn.cfg.target_dendrite]
        branch.accum += w
        self._push(self.now_ns + syn.pulse_ns, PRIO_PULSE, ("pulse_end", key, s_idx, w))
        self._count("syn_pulses")
        self._refresh(root)

    def _pulse_end(self, key: tuple[int, int, int], s_idx: int, w: float) -> None:
        nrn = self.neurons[key]
        syn = nrn.synapses[s_idx]
        root = self.neurons[nrn.root_key]
        self._advance(root, self.now_ns)
        if not nrn.is_root:
            self._advance_branches(nrn, self.now_ns * NS)
        branch = nrn.branches[syn.cfg.target_dendrite]
        branch.accum -= w
        if branch.accum < 0.0 and branch.accum > -1e-30:
            branch.accum = 0.0
        syn.inflight_w = 0.0
        self._refresh(root)

    def _spike_event(self, key: tuple[int, int, int], gen: int) -> None:
        nrn = self.neurons[key]
        if gen != nrn.spike_gen:
            return  # stale prediction
        self._advance(nrn, self.now_ns)
        self._refresh(nrn)

    def _neuron_tick(self, key: tuple[int, int, int], gen: int) -> None:
        nrn = self.neurons.get(key)
        if nrn is None or gen != nrn.tick_gen:
            return  # superseded by a later event on this neuron
        self._advance(nrn, self.now_ns)
        self._refresh(nrn)

    # -- dynamics ----------------------------------------------------------

    def _advance_branches(self, nrn: NeuronUnit, t_s: float) -> None:
        for branch in nrn.branches.values():
            state = branch.state
            dt = t_s - state.last_update
            if dt <= 0:
                continue
            params = branch.params
            if branch.gain_override is not None:
                params = replace(params, I_gain=max(branch.gain_override, self.consts.I_0))
            if self.mode == "full":
                # The nonlinear equation has a fixed point at zero output;
                # real branches idle at the dark current, so seed there.
                seeded = replace(state, I_out=max(state.I_out, self.consts.I_0))
                branch.state = dpi_integrate_full(seeded, params, branch.accum, dt, self.consts)
            else:
                branch.state = dpi_advance(state, params, branch.accum, dt, self.consts)
            if branch.alpha_enabled and branch.alpha_params is not None:
                branch.alpha_state = dpi_advance(
                    branch.alpha_state, branch.alpha_params, branch.accum, dt, self.consts
                )

    def _advance(self, root: NeuronUnit, t_ns: int) -> None:
        """Advance a root soma (and its members' branches) to ``t_ns``."""
        t_s = t_ns * NS
        for m_key in root.members:
            self._advance_branches(self.neurons[m_key], t_s)
        dt = t_s - root.soma_state.membrane.last_update
        if dt <= 0:
            return
        if self.mode == "full":
            spikes = self._advance_soma_full(root, t_s)
        else:
            root.soma_state, spikes = soma_ops.soma_step(
                root.soma_state, root.soma_cfg, root.held, dt, self.consts
            )
        for t_spike in spikes:
            self._emit_spike(root, t_spike)

    def _advance_soma_full(self, root: NeuronUnit, t_end: float) -> list[float]:
        """Nonlinear-mode membrane integration with bisected crossings."""
        cfg = root.soma_cfg
        state = root.soma_state
        t_start = state.membrane.last_update
        spikes: list[float] = []
        t = t_start
        i_mem = state.membrane.I_out
        refractory_until = state.refractory_until
        i_in, i_tau_eff = soma_ops.soma_input_currents(
            root.held.I_dendritic, root.held.I_somatic, state.adaptation.I_out, cfg, self.consts
        )
        gain = soma_ops.effective_gain_current(state, cfg, self.consts)
        params = DpiParams(I_tau=i_tau_eff, I_gain=max(gain, self.consts.I_0), C=cfg.C_mem)

        def integrate(i0: float, dt: float) -> float:
            seeded = max(i0, self.consts.I_0)
            return dpi_integrate_full(DpiState(I_out=seeded), params, i_in, dt, self.consts).I_out

        while t < t_end:
            if refractory_until >= t_end:
                i_mem = 0.0
                t = t_end
                break
            if refractory_until > t:
                i_mem = 0.0
                t = refractory_until
            seg = min(t_end - t, max((t_end - t) / 8.0, 1e-7))
            nxt = integrate(i_mem, seg)
            if cfg.model == "thresholded" and not cfg.killed and nxt >= cfg.I_spkthr:
                lo, hi = 0.0, seg
                for _ in range(60):
                    mid = 0.5 * (lo + hi)
                    if integrate(i_mem, mid) >= cfg.I_spkthr:
                        hi = mid
                    else:
                        lo = mid
                t_spike = t + hi
                spikes.append(t_spike)
                refractory_until = t_spike + cfg.refractory_time(self.consts)
                state = soma_ops.on_spike_feedback(state, cfg, t_spike, self.consts)
                i_mem = 0.0
                t = t_spike
            else:
                i_mem = nxt
                t += seg
        if cfg.killed:
            i_mem = 0.0
        state = soma_ops.advance_feedback_filters(state, cfg, t_start, t_end, self.consts)
        if cfg.homeostasis_enabled and cfg.homeostasis is not None:
            v = soma_ops.homeostasis_step(
                state.V_gain,
                cfg.homeostasis,
                state.calcium.I_out,
                t_end - t_start,
                cfg.homeostasis_active,
                self.consts,
            )
            state = replace(state, V_gain=v)
        root.soma_state = replace(
            state,
            membrane=DpiState(I_out=i_mem, last_update=t_end),
            refractory_until=refractory_until,
        )
        return spikes

    def _emit_spike(self, root: NeuronUnit, t_spike: float) -> None:
        chip_idx, core_idx, n_idx = root.key
        chip = self.doc.chips[chip_idx]
        t_true_ns = _ns(t_spike)
        self.report.spikes.append((t_true_ns, chip.x, chip.y, core_idx, n_idx))
        model = root.soma_cfg.model
        ekey = f"chip{chip.x}_{chip.y}/core{core_idx}/{model}"
        self.report.energy_counts[ekey] = self.report.energy_counts.get(ekey, 0) + 1
        # Fan-out can never be scheduled before the event being processed;
        # in full mode a crossing found inside a tick ships at the tick.
        t_sched = max(t_true_ns, self.now_ns)
        for word in fan_out(root.srams):
            self._push(t_sched, PRIO_DELIVER, ("deliver", (chip.x, chip.y), word))
        if not root.srams:
            self._count("spikes_unrouted")

    # -- input refresh and prediction ---------------------------------------

    def _branch_contribution(self, owner: NeuronUnit, branch: BranchUnit, root: NeuronUnit):
        core = self.cores[owner.key[:2]]
        out = branch.state.I_out
        if branch.alpha_enabled:
            out = max(out - branch.alpha_state.I_out, 0.0)
        if branch.diffusion_enabled and core.diffusion is not None:
            out = core.diffusion_out.get(owner.key[2], out)
        if branch.nmda_gated:
            v_mem = soma_ops.membrane_voltage(root.soma_state.membrane.I_out, self.consts)
            out = nmda_gate(out, v_mem, branch.V_nmda)
        if branch.conductance_enabled:
            if branch.gate_source == "calcium":
                v_neuron = soma_ops.membrane_voltage(root.soma_state.calcium.I_out, self.consts)
            else:
                v_neuron = soma_ops.membrane_voltage(root.soma_state.membrane.I_out, self.consts)
            out = conductance_transform(max(out, 0.0), branch.V_reversal, v_neuron, self.consts)
        return out

    def _solve_core_diffusion(self, core: CoreUnit) -> None:
        if core.diffusion is None or core.diffusion_solved_ns == self.now_ns:
            return
        t_s = self.now_ns * NS
        injections = np.zeros(256)
        for key in core.neuron_keys:
            nrn = self.neurons[key]
            branch = nrn.branches.get(Branch.AMPA)
            if branch is None or not branch.diffusion_enabled:
                continue
            self._advance_branches(nrn, t_s)
            out = branch.state.I_out
            if branch.alpha_enabled:
                out = max(out - branch.alpha_state.I_out, 0.0)
            injections[key[2]] = out
        solved = core.diffusion.solve(injections)
        core.diffusion_out = {
            idx: float(solved[idx]) for idx in range(256) if core.diffusion_mask[idx]
        }
        core.diffusion_solved_ns = self.now_ns
        core.diffusion_live = bool((injections > CURRENT_EPS).any())
        if core.diffusion_live:
            # Keep every root on the grid resampling while current spreads.
            # Pushed with the current generation: a root's own later refresh
            # supersedes it, anything else leaves it valid.
            for key in core.grid_root_keys:
                other = self.neurons[key]
                self._push(self.now_ns + self._resample_ns, PRIO_RESAMPLE, ("ntick", key, other.tick_gen))

    def _refresh(self, root: NeuronUnit) -> None:
        """Re-freeze a root's soma drive from its branch outputs and re-predict."""
        core = self.cores[root.key[:2]]
        if core.diffusion is not None:
            self._solve_core_diffusion(core)
        i_dend = 0.0
        i_som = 0.0
        coupled = False
        for m_key in root.members:
            member = self.neurons[m_key]
            for branch in member.branches.values():
                if branch.active() or (branch.diffusion_enabled and core.diffusion is not None):
                    contribution = self._branch_contribution(member, branch, root)
                    if branch.branch is Branch.GABA_A:
                        i_som += contribution
                    elif branch.branch is Branch.GABA_B and not branch.conductance_enabled:
                        i_dend -= contribution
                    else:
                        i_dend += contribution
                if branch.active():
                    coupled = True
                if branch.diffusion_enabled and core.diffusion_live:
                    coupled = True
            if root.soma_cfg.homeostasis_enabled and root.soma_cfg.homeostasis_target == "nmda":
                nmda = member.branches.get(Branch.NMDA)
                if nmda is not None:
                    gain = self.consts.I_0 * math.exp(
                        self.consts.kappa * root.soma_state.V_gain / self.consts.U_T
                    )
                    nmda.gain_override = gain
        cfg = root.soma_cfg
        if cfg.adaptation_enabled and root.soma_state.adaptation.I_out > CURRENT_EPS:
            coupled = True
        px = root.soma_state.feedback_px
        if px is not None and px.pulse_end > root.soma_state.membrane.last_update:
            coupled = True
        if cfg.homeostasis_enabled and cfg.homeostasis_active:
            coupled = True
        if self.mode == "full":
            i_in, _ = soma_ops.soma_input_currents(i_dend, i_som, 0.0, cfg, self.consts)
            if i_in > CURRENT_EPS or root.soma_state.membrane.I_out > CURRENT_EPS:
                coupled = True
        root.held = soma_ops.SomaInputs(I_dendritic=i_dend, I_somatic=i_som)
        root.tick_gen += 1
        if coupled:
            self._push(self.now_ns + self._resample_ns, PRIO_RESAMPLE, ("ntick", root.key, root.tick_gen))
        self._predict(root)

    def _predict(self, root: NeuronUnit) -> None:
        root.spike_gen += 1
        if self.mode == "full":
            return  # full mode finds crossings inside interval integration
        cfg = root.soma_cfg
        state = root.soma_state
        d = soma_ops._membrane_drive(state, cfg, root.held, self.consts)
        t0 = state.membrane.last_update
        start = max(t0, state.refractory_until)
        i_start = state.membrane.I_out if start == t0 else 0.0
        t_rel = soma_ops.next_spike_time(i_start, cfg, d, self.consts)
        if not math.isfinite(t_rel):
            return
        t_abs = start + t_rel
        t_ns = max(_ns(t_abs), self.now_ns + 1)
        self._push(t_ns, PRIO_SPIKE, ("spike", root.key, root.spike_gen))

    # -- monitors ------------------------------------------------------------

    def _tap_value(self, tap) -> float:
        chip = self.chips[tuple(tap.chip)]
        key = (chip.index, tap.core, tap.neuron)
        nrn = self.neurons.get(key)
        if nrn is None:
            return 0.0
        root = self.neurons[nrn.root_key]
        self._advance(root, self.now_ns)
        if not nrn.is_root:
            self._advance_branches(nrn, self.now_ns * NS)
        source = tap.source
        if source == "membrane":
            return root.soma_state.membrane.I_out
        if source == "adaptation_ca":
            if tap.branch == "calcium":
                return root.soma_state.calcium.I_out
            return root.soma_state.adaptation.I_out
        if source == "dendritic":
            branch = nrn.branches.get(Branch(tap.branch))
            return branch.state.I_out if branch else 0.0
        if source == "synapse_weight":
            syn = nrn.synapses.get(tap.synapse)
            if syn is None:
                return 0.0
            if syn.cfg.stp_enabled and syn.stp is not None:
                state = stp_recover(syn.stp, max(self.now_ns * NS - syn.stp_last_s, 0.0))
                return stp_weight_current(state, self.consts)
            return syn.weight_current
        if source == "homeo_gain":
            return soma_ops.effective_gain_current(root.soma_state, root.soma_cfg, self.consts)
        return 0.0  # external / calibration channels have no model

    def _sample_sadc(self, channel: int) -> None:
        tap = next(t for t in self.doc.monitors.sadc if t.channel == channel)
        value = self._tap_value(tap)
        self.report.sadc_traces[channel].append((self.now_ns, value))
        self._push(self.now_ns + tap.interval_us * 1000, PRIO_MONITOR, ("sadc", channel))

    def _sample_vmem(self, name: str) -> None:
        tap = next(
            t
            for t in self.doc.monitors.vmem
            if f"{t.chip[0]}_{t.chip[1]}_c{t.core}_n{t.neuron}" == name
        )
        chip = self.chips[tuple(tap.chip)]
        key = (chip.index, tap.core, tap.neuron)
        nrn = self.neurons.get(key)
        value = 0.0
        if nrn is not None:
            root = self.neurons[nrn.root_key]
            self._advance(root, self.now_ns)
            value = soma_ops.membrane_voltage(root.soma_state.membrane.I_out, self.consts)
        self.report.vmem_traces[name].append((self.now_ns, value))
        self._push(self.now_ns + tap.interval_us * 1000, PRIO_MONITOR, ("vmem", name))

    # -- live reconfiguration -------------------------------------------------

    def apply_bias_update(self, path: str, code: BiasCode) -> float:
        """Apply one DAC code change between events; returns the new current."""
        set_bias(self.doc, path, code)
        parts = path.split(".")
        chip_idx, core_idx = int(parts[1]), int(parts[3])
        self._rebuild_core(chip_idx, core_idx)
        self.config_version += 1
        return resolve_bias(code)

    def apply_latch_update(self, path: str, value: bool) -> None:
        set_latch(self.doc, path, value)
        parts = path.split(".")
        chip_idx, core_idx = int(parts[1]), int(parts[3])
        self._rebuild_core(chip_idx, core_idx)
        self.config_version += 1

    def _rebuild_core(self, chip_idx: int, core_idx: int) -> None:
        """Rebuild static per-neuron parameters after a config change.

        Dynamic state (filter outputs, refractory windows, plasticity
        voltages, pulse windows) is preserved; resolved currents,
        latch-dependent structure and mux grouping refresh.  Neurons newly
        introduced by the change are instantiated at the current time.
        """
        core = self.cores[(chip_idx, core_idx)]
        core_doc = self.doc.chips[chip_idx].cores[core_idx]
        for key in list(core.neuron_keys):
            nrn = self.neurons[key]
            self._advance(self.neurons[nrn.root_key], self.now_ns)
        old_units = {key: self.neurons[key] for key in core.neuron_keys}
        for key in old_units:
            del self.neurons[key]
        core_new = CoreUnit(chip_idx, core_idx, core_doc, self)
        self.cores[(chip_idx, core_idx)] = core_new

        now_s = self.now_ns * NS
        indices = sorted({key[2] for key in old_units} | set(core_doc.neurons))
        for idx in indices:
            self._build_neuron(chip_idx, core_idx, idx, core_doc)
        for idx in list(indices):
            key = (chip_idx, core_idx, idx)
            root_idx = mux_soma_of(idx, core_new.de_mux)
            root_key = (chip_idx, core_idx, root_idx)
            if root_key not in self.neurons:
                self._build_neuron(chip_idx, core_idx, root_idx, core_doc)
                indices.append(root_idx)
            nrn = self.neurons[key]
            nrn.root_key = root_key
            nrn.is_root = root_key == key
            root = self.neurons[root_key]
            root.root_key = root_key
            root.is_root = True
        for idx in indices:
            key = (chip_idx, core_idx, idx)
            nrn = self.neurons[key]
            root = self.neurons[nrn.root_key]
            if key not in root.members:
                root.members.append(key)
            if core_new.diffusion is not None and core_new.diffusion_mask[idx]:
                if nrn.root_key not in core_new.grid_root_keys:
                    core_new.grid_root_keys.append(nrn.root_key)

        for idx in indices:
            key = (chip_idx, core_idx, idx)
            rebuilt = self.neurons[key]
            old = old_units.get(key)
            if old is None:
                # Fresh unit joining mid-run: clock it in at the present.
                rebuilt.soma_state = replace(
                    rebuilt.soma_state,
                    membrane=replace(rebuilt.soma_state.membrane, last_update=now_s),
                    adaptation=replace(rebuilt.soma_state.adaptation, last_update=now_s),
                    calcium=replace(rebuilt.soma_state.calcium, last_update=now_s),
                )
                for branch in rebuilt.branches.values():
                    branch.state = replace(branch.state, last_update=now_s)
                    branch.alpha_state = replace(branch.alpha_state, last_update=now_s)
            else:
                rebuilt.soma_state = old.soma_state
                for b_key, branch in rebuilt.branches.items():
                    if b_key in old.branches:
                        branch.state = old.branches[b_key].state
                        branch.alpha_state = old.branches[b_key].alpha_state
                        branch.accum = old.branches[b_key].accum
                for s_idx, syn in rebuilt.synapses.items():
                    if s_idx in old.synapses:
                        syn.busy_until_ns = old.synapses[s_idx].busy_until_ns
                        syn.inflight_w = old.synapses[s_idx].inflight_w
                        if syn.stp is not None and old.synapses[s_idx].stp is not None:
                            syn.stp = replace(syn.stp, V_stp=old.synapses[s_idx].stp.V_stp)
                            syn.stp_last_s = old.synapses[s_idx].stp_last_s
            for s_idx in sorted(rebuilt.synapses):
                self.tag_register(core_new, idx, s_idx, rebuilt.synapses[s_idx].cfg.cam_tag)
        for idx in indices:
            nrn = self.neurons[(chip_idx, core_idx, idx)]
            if nrn.is_root:
                self._refresh(nrn)

    # -- state digest -----------------------------------------------------

    def state_hash(self) -> str:
        """Digest of the dynamic state plus configuration at the current time."""
        from .configdoc import serialize

        digest = hashlib.sha256()
        digest.update(serialize(self.doc).encode())
        digest.update(str(self.now_ns).encode())
        for key in sorted(self.neurons):
            nrn = self.neurons[key]
            s = nrn.soma_state
            digest.update(
                f"{key}|{s.membrane.I_out!r}|{s.membrane.last_update!r}|{s.refractory_until!r}|"
                f"{s.adaptation.I_out!r}|{s.calcium.I_out!r}|{s.V_gain!r}".encode()
            )
            for b_key in sorted(nrn.branches, key=lambda b: b.value):
                b = nrn.branches[b_key]
                digest.update(f"{b_key.value}|{b.state.I_out!r}|{b.accum!r}|{b.alpha_state.I_out!r}".encode())
            for s_idx in sorted(nrn.synapses):
                syn = nrn.synapses[s_idx]
                v_stp = syn.stp.V_stp if syn.stp else 0.0
                digest.update(f"{s_idx}|{syn.busy_until_ns}|{v_stp!r}".encode())
        return digest.hexdigest()


def run_simulation(
    doc: ConfigDocument,
    events: list[tuple[int, int]] | None = None,
    sensor_events: list[tuple[int, int, int, int]] | None = None,
    until_ns: int = 0,
) -> SimulationReport:
    """Build an engine, inject inputs, run to ``until_ns`` and report."""
    engine = Engine(doc)
    if events:
        engine.inject_events(events)
    if sensor_events:
        engine.inject_sensor_events(sensor_events)
    return engine.run_until(until_ns)
