"""Shipped reproduction scenarios exercising the major dynamic mechanisms.

Each builder returns a ready-to-run bundle (configuration, input events,
horizon).  They are used by the ``demo`` CLI subcommand and by the
acceptance suite, so their parameters are part of the tested surface.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .configdoc import (
    ConfigDocument,
    SadcTapDoc,
    SynapseDoc,
    VmemTapDoc,
    nominal_document,
)
from .engine import Engine
from .params import bias_for_current
from .report import SimulationReport
from .routing import InterNeuronEvent, encode_word

MS = 1_000_000
SECOND = 1_000_000_000


@dataclass
class DemoBundle:
    name: str
    doc: ConfigDocument
    events: list[tuple[int, int]] = field(default_factory=list)
    until_ns: int = SECOND
    # Bias updates applied mid-run: (time_ns, path, current_amperes)
    updates: list[tuple[int, str, float]] = field(default_factory=list)

    def run(self) -> tuple[Engine, SimulationReport]:
        engine = Engine(self.doc)
        engine.inject_events(self.events)
        for at_ns, path, current in sorted(self.updates):
            engine.run_until(at_ns)
            engine.apply_bias_update(path, bias_for_current(current))
        report = engine.run_until(self.until_ns)
        return engine, report


def tag_word(tag: int, core: int = 0) -> int:
    return encode_word(InterNeuronEvent(tag=tag, cores=1 << core))


# ---------------------------------------------------------------------------
# Spike-frequency adaptation under constant drive
# ---------------------------------------------------------------------------


def adaptation_demo() -> DemoBundle:
    """Constant DC drive with adaptation: the rate sags to a lower steady
    value; removing the drive lets the adaptation current decay away.
    """
    doc = nominal_document()
    core = doc.chips[0].cores[0]
    core.biases["SOIF_LEAK"] = bias_for_current(100e-12)
    core.biases["SOIF_GAIN"] = bias_for_current(400e-12)
    core.biases["SOIF_REFR"] = bias_for_current(1.35e-9)  # 2 ms floor
    core.biases["SOIF_DC"] = bias_for_current(1.2e-9)
    core.biases["SOIF_SPKTHR"] = bias_for_current(300e-12)
    core.biases["SOAD_PWTAU"] = bias_for_current(1.35e-9)  # 2 ms feedback pulse
    core.biases["SOAD_W"] = bias_for_current(1.6e-9)
    core.biases["SOAD_GAIN"] = bias_for_current(4e-12)
    # Long adaptation time constant (~143 ms): the sag is deep and the
    # per-interval decay small relative to the resample grid.
    core.biases["SOAD_TAU"] = bias_for_current(0.5e-12)
    n = core.neuron(0)
    n.latches["SO_DC"] = True
    n.latches["SO_ADAPTATION"] = True
    doc.monitors.sadc.append(
        SadcTapDoc(channel=0, source="adaptation_ca", neuron=0, interval_us=2000)
    )
    doc.engine.resample_interval_us = 200
    drive_until = 1_500 * MS
    return DemoBundle(
        name="adaptation",
        doc=doc,
        until_ns=2_400 * MS,
        updates=[(drive_until, "chips.0.cores.0.biases.SOIF_DC", 0.0)],
    )


ADAPTATION_TAU_S = 2e-12 * 0.025 / (0.7 * 0.5e-12)  # adaptation filter tau
ADAPTATION_DRIVE_END_NS = 1_500 * MS


# ---------------------------------------------------------------------------
# Homeostatic gain regulation under Poisson input
# ---------------------------------------------------------------------------


def homeostasis_demo(seed: int = 11, duration_s: float = 55.0) -> DemoBundle:
    """Poisson 100 Hz input with the gain starting ten times too high.

    The controller ramps the gain down until the calcium estimate straddles
    its reference, then dithers around it.
    """
    doc = nominal_document()
    core = doc.chips[0].cores[0]
    core.biases["SOIF_LEAK"] = bias_for_current(20e-12)  # tau_mem ~ 13.8 ms
    core.biases["SOIF_REFR"] = bias_for_current(5.4e-9)  # 0.5 ms
    core.biases["SOIF_SPKTHR"] = bias_for_current(60e-12)
    core.biases["SOIF_GAIN"] = bias_for_current(60e-12)  # unused: regulated
    # Slow calcium estimator: tau ~ 1.43 s smooths Poisson shot noise.
    core.biases["SOAD_PWTAU"] = bias_for_current(1.35e-9)  # 2 ms pulse
    core.biases["SOCA_W"] = bias_for_current(30e-12)
    core.biases["SOCA_GAIN"] = bias_for_current(4e-12)
    core.biases["SOCA_TAU"] = bias_for_current(0.1e-12)
    # Input synapse: slow AMPA dendrite smooths the input train.
    core.biases["SYAM_W0"] = bias_for_current(120e-12)
    core.biases["SYPD_EXT"] = bias_for_current(2.7e-9)  # 1 ms pulse
    core.biases["SYPD_DLY0"] = bias_for_current(27e-9)  # 0.1 ms delay
    core.biases["DEAM_ETAU"] = bias_for_current(0.36e-12)  # tau_de ~ 100 ms
    core.biases["DEAM_EGAIN"] = bias_for_current(1.4e-12)

    target_rate = 110.0  # Hz; calcium charge per spike fixes the reference
    q_ca = (4e-12 / 0.1e-12) * 30e-12 * 2e-3
    core.biases["SOHO_VREF"] = bias_for_current(q_ca * target_rate)
    v_m = 0.42
    core.biases["SOHO_VREF_M"] = bias_for_current(_gate_current(v_m))
    core.biases["SOHO_VREF_H"] = bias_for_current(_gate_current(v_m + 0.08))
    core.biases["SOHO_VREF_L"] = bias_for_current(_gate_current(v_m - 0.08))
    core.extras["HOMEO_TIME_BASE"] = 25.0  # 3.2 mV/s ramps
    # Start with the gain ten times the nominal mid reference.
    core.extras["HOMEO_V_GAIN_INIT"] = v_m + (0.025 / 0.7) * np.log(10.0)

    n = core.neuron(0)
    n.latches["HO_ENABLE"] = True
    n.latches["HO_ACTIVE"] = True
    n.synapses[0] = SynapseDoc(cam=1, weight=(True, False, False, False), dendrite="AMPA")
    doc.monitors.sadc.append(
        SadcTapDoc(channel=0, source="adaptation_ca", branch="calcium", neuron=0, interval_us=50_000)
    )
    doc.monitors.sadc.append(
        SadcTapDoc(channel=1, source="homeo_gain", neuron=0, interval_us=50_000)
    )
    doc.engine.resample_interval_us = 1000
    doc.engine.seed = seed

    rng = np.random.default_rng(seed)
    t = 0.0
    events = []
    while t < duration_s:
        t += rng.exponential(1.0 / 100.0)
        if t < duration_s:
            events.append((round(t * 1e9), tag_word(1)))
    return DemoBundle(
        name="homeostasis",
        doc=doc,
        events=events,
        until_ns=round(duration_s * SECOND),
    )


def _gate_current(voltage: float) -> float:
    from .configdoc import gate_current_for_voltage

    return gate_current_for_voltage(voltage)


HOMEOSTASIS_CA_REF = (4e-12 / 0.1e-12) * 30e-12 * 2e-3 * 110.0


# ---------------------------------------------------------------------------
# Order detection: three mechanisms
# ---------------------------------------------------------------------------


def _two_input_doc() -> ConfigDocument:
    doc = nominal_document()
    core = doc.chips[0].cores[0]
    core.biases["SYPD_EXT"] = bias_for_current(1.35e-9)  # 2 ms synapse pulse
    core.biases["SYPD_DLY0"] = bias_for_current(27e-9)  # 0.1 ms delay
    core.biases["SOIF_REFR"] = bias_for_current(13.5e-12)  # 200 ms refractory
    return doc


def order_conductance_demo(forward: bool = True) -> DemoBundle:
    """Clamped-then-boosted mechanism on two conductance dendrites.

    The strong dendrite saturates the membrane at its low reversal; the
    weak one can only finish the job from there.  Runs on the nonlinear
    engine mode: the asymmetry lives in the voltage-integration regime.
    """
    doc = _two_input_doc()
    doc.engine.mode = "full"
    doc.engine.resample_interval_us = 200
    core = doc.chips[0].cores[0]
    core.biases["SYPD_EXT"] = bias_for_current(5.4e-9)  # 0.5 ms pulses
    core.biases["SOIF_LEAK"] = bias_for_current(10e-12)
    core.biases["SOIF_GAIN"] = bias_for_current(500e-9)  # voltage-integration regime
    core.biases["SOIF_SPKTHR"] = bias_for_current(_gate_current(0.60))
    core.biases["SYAM_W0"] = bias_for_current(6.4e-9)  # strong input
    core.biases["SYAM_W1"] = bias_for_current(3.0e-9)  # weak input
    # Strong clamp dendrite on AMPA just below 0.5 V with a fast filter, so
    # its residual pull is gone when the weak input lands.
    core.biases["DEAM_ETAU"] = bias_for_current(51e-12)  # ~0.7 ms
    core.biases["DEAM_EGAIN"] = bias_for_current(204e-12)
    core.biases["DEAM_REV"] = bias_for_current(_gate_current(0.48))
    # Weak dendrite on NMDA (no gating) at 0.7 V; short tail bounds the
    # reversed-order boost above the clamp.
    core.biases["DENM_ETAU"] = bias_for_current(23.8e-12)  # ~1.5 ms
    core.biases["DENM_EGAIN"] = bias_for_current(95e-12)
    core.biases["DENM_REV"] = bias_for_current(_gate_current(0.70))
    n = core.neuron(0)
    n.latches["DEAM_CONDUCTANCE"] = True
    n.latches["DENM_CONDUCTANCE"] = True
    n.synapses[0] = SynapseDoc(cam=1, weight=(True, False, False, False), dendrite="AMPA")
    n.synapses[1] = SynapseDoc(cam=2, weight=(False, True, False, False), dendrite="NMDA")
    doc.monitors.vmem.append(VmemTapDoc(neuron=0, interval_us=500))
    events = _order_events(first_tag=1, second_tag=2, gap_ms=5, forward=forward)
    return DemoBundle(name="order-conductance", doc=doc, events=events, until_ns=250 * MS)


def order_alpha_demo(forward: bool = True) -> DemoBundle:
    """Slow alpha-function EPSC plus a fast plain EPSC; only the rising
    alpha flank boosted by the fast input crosses the threshold."""
    doc = _two_input_doc()
    core = doc.chips[0].cores[0]
    core.biases["SOIF_LEAK"] = bias_for_current(50e-12)  # tau_mem ~ 5.5 ms
    core.biases["SOIF_GAIN"] = bias_for_current(200e-12)
    core.biases["SOIF_SPKTHR"] = bias_for_current(900e-12)
    core.biases["SYAM_W0"] = bias_for_current(1.75e-9)  # alpha input
    core.biases["SYAM_W1"] = bias_for_current(300e-12)  # plain input
    # Alpha pair on AMPA: excitatory tau ~ 25 ms, inhibitory tau ~ 5 ms.
    core.biases["DEAM_ETAU"] = bias_for_current(1.43e-12)
    core.biases["DEAM_EGAIN"] = bias_for_current(5.7e-12)
    core.biases["DEAM_ITAU"] = bias_for_current(7.1e-12)
    core.biases["DEAM_IGAIN"] = bias_for_current(28.6e-12)
    # Plain fast dendrite on NMDA (no extras): tau ~ 2 ms.
    core.biases["DENM_ETAU"] = bias_for_current(18e-12)
    core.biases["DENM_EGAIN"] = bias_for_current(36e-12)
    n = core.neuron(0)
    n.latches["DEAM_ALPHA"] = True
    n.synapses[0] = SynapseDoc(cam=1, weight=(True, False, False, False), dendrite="AMPA")
    n.synapses[1] = SynapseDoc(cam=2, weight=(False, True, False, False), dendrite="NMDA")
    doc.monitors.vmem.append(VmemTapDoc(neuron=0, interval_us=500))
    events = _order_events(first_tag=1, second_tag=2, gap_ms=20, forward=forward)
    return DemoBundle(name="order-alpha", doc=doc, events=events, until_ns=400 * MS)


def order_nmda_demo(forward: bool = True) -> DemoBundle:
    """Membrane-gated mechanism: the gated dendrite only counts while the
    other input holds the membrane above the gate threshold."""
    doc = _two_input_doc()
    core = doc.chips[0].cores[0]
    core.biases["SOIF_LEAK"] = bias_for_current(20e-12)  # tau_mem ~ 13.8 ms
    core.biases["SOIF_GAIN"] = bias_for_current(40e-12)
    core.biases["SOIF_SPKTHR"] = bias_for_current(_gate_current(0.45))
    core.biases["SYAM_W0"] = bias_for_current(80e-12)  # driver holds the gate open
    core.biases["SYAM_W1"] = bias_for_current(300e-12)  # gated input
    core.biases["DEAM_ETAU"] = bias_for_current(7.1e-12)  # ~5 ms
    core.biases["DEAM_EGAIN"] = bias_for_current(28.6e-12)
    core.biases["DENM_ETAU"] = bias_for_current(18e-12)  # ~2 ms: gate closes fast
    core.biases["DENM_EGAIN"] = bias_for_current(72e-12)
    core.biases["DENM_NMREV"] = bias_for_current(_gate_current(0.35))
    n = core.neuron(0)
    n.latches["DENM_NMDA"] = True
    n.synapses[0] = SynapseDoc(cam=1, weight=(True, False, False, False), dendrite="AMPA")
    n.synapses[1] = SynapseDoc(cam=2, weight=(False, True, False, False), dendrite="NMDA")
    doc.monitors.vmem.append(VmemTapDoc(neuron=0, interval_us=500))
    doc.engine.resample_interval_us = 100
    events = _order_events(first_tag=1, second_tag=2, gap_ms=5, forward=forward)
    return DemoBundle(name="order-nmda", doc=doc, events=events, until_ns=250 * MS)


def _order_events(first_tag: int, second_tag: int, gap_ms: int, forward: bool):
    t0 = 10 * MS
    if forward:
        return [(t0, tag_word(first_tag)), (t0 + gap_ms * MS, tag_word(second_tag))]
    return [(t0, tag_word(second_tag)), (t0 + gap_ms * MS, tag_word(first_tag))]


# ---------------------------------------------------------------------------
# Diffusion bump over one row
# ---------------------------------------------------------------------------


def diffusion_demo() -> DemoBundle:
    """Single synaptic drive in the middle of a 16-neuron diffusion row."""
    doc = nominal_document()
    core = doc.chips[0].cores[0]
    core.biases["SYAM_W0"] = bias_for_current(1e-9)
    core.biases["SYPD_EXT"] = bias_for_current(1.35e-9)  # 2 ms pulse
    core.biases["SYPD_DLY0"] = bias_for_current(27e-9)
    core.biases["DEAM_ETAU"] = bias_for_current(3.6e-12)  # ~10 ms
    core.biases["DEAM_EGAIN"] = bias_for_current(14.3e-12)
    # Drain 20x the coupling keeps the bump steep and boundary-clean.
    core.biases["DEAM_NRES"] = bias_for_current(100e-12)
    core.biases["DEAM_HRES"] = bias_for_current(5e-12)
    core.biases["DEAM_VRES"] = bias_for_current(0.0)
    core.biases["SOIF_LEAK"] = bias_for_current(50e-12)
    core.biases["SOIF_GAIN"] = bias_for_current(200e-12)
    core.biases["SOIF_SPKTHR"] = bias_for_current(1e-6)  # stay subthreshold
    row = 4
    for col in range(16):
        idx = row * 16 + col
        n = core.neuron(idx)
        n.latches["DEAM_AMPA"] = True
        doc.monitors.vmem.append(VmemTapDoc(neuron=idx, interval_us=2000))
    center = row * 16 + 7
    core.neurons[center].synapses[0] = SynapseDoc(
        cam=1, weight=(True, False, False, False), dendrite="AMPA"
    )
    doc.engine.resample_interval_us = 200
    events = [(10 * MS + k * 5 * MS, tag_word(1)) for k in range(8)]
    return DemoBundle(name="diffusion", doc=doc, events=events, until_ns=100 * MS)


# ---------------------------------------------------------------------------
# Short-term depression burst
# ---------------------------------------------------------------------------


def stp_demo() -> DemoBundle:
    """A 167 Hz burst for 60 ms depresses the weight; it then recovers."""
    doc = nominal_document()
    core = doc.chips[0].cores[0]
    core.biases["SYPD_EXT"] = bias_for_current(2.7e-9)  # 1 ms pulse
    core.biases["SYPD_DLY0"] = bias_for_current(27e-9)  # 0.1 ms delay
    core.biases["SYAN_STDW"] = bias_for_current(_gate_current(0.30))
    core.biases["SYAN_STDSTR"] = bias_for_current(4e-12)  # 4 mV drop per 1 ms pulse
    core.biases["DEAM_ETAU"] = bias_for_current(7.1e-12)  # ~5 ms
    core.biases["DEAM_EGAIN"] = bias_for_current(28.6e-12)
    core.biases["SOIF_SPKTHR"] = bias_for_current(1e-6)
    core.extras["STP_TAU_RECOVERY"] = 0.05
    n = core.neuron(0)
    n.synapses[0] = SynapseDoc(cam=1, weight=(True,) * 4, stp=True, dendrite="AMPA")
    doc.monitors.sadc.append(
        SadcTapDoc(channel=0, source="dendritic", branch="AMPA", neuron=0, interval_us=500)
    )
    doc.monitors.sadc.append(
        SadcTapDoc(channel=1, source="synapse_weight", synapse=0, neuron=0, interval_us=500)
    )
    doc.engine.resample_interval_us = 200
    events = [(round(k / 167.0 * SECOND), tag_word(1)) for k in range(10)]
    return DemoBundle(name="stp", doc=doc, events=events, until_ns=400 * MS)


STP_BURST_END_NS = 60 * MS
STP_RECOVERY_TAU_S = 0.05


# ---------------------------------------------------------------------------
# Registry
# ---------------------------------------------------------------------------

DEMOS = {
    "adaptation": adaptation_demo,
    "homeostasis": homeostasis_demo,
    "order-conductance": order_conductance_demo,
    "order-alpha": order_alpha_demo,
    "order-nmda": order_nmda_demo,
    "diffusion": diffusion_demo,
    "stp": stp_demo,
}
