"""Per-neuron synapse units: tag matching, weight/delay DACs, short-term depression.

A synapse fires when its 11-bit stored tag equals the broadcast tag.  The
match triggers a delayed pulse extender whose delay current comes from a
2-bit flexible DAC (base always on, two selectable contributions) and whose
pulse drives the selected dendritic branch with the weight current from a
4-bit flexible DAC or, with depression enabled, from the plasticity
capacitor voltage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

from .dendrite import Branch
from .errors import ConfigError
from .kernels import px_delay_time
from .params import NOMINAL, FlexibleDacConfig, PhysicsConstants, flexible_dac_output

CAM_TAG_MAX = 0x7FF
SYNAPSES_PER_NEURON = 64


@dataclass(frozen=True)
class SynapseConfig:
    """Static per-synapse latches and stored tag."""

    cam_tag: int = 0
    weight_bits: tuple[bool, bool, bool, bool] = (False, False, False, False)
    precise_delay: bool = False
    mismatched_delay: bool = False
    stp_enabled: bool = False
    target_dendrite: Branch | None = None

    def __post_init__(self) -> None:
        if not 0 <= self.cam_tag <= CAM_TAG_MAX:
            raise ConfigError(f"cam_tag out of range [0, {CAM_TAG_MAX}]: {self.cam_tag}")
        if len(self.weight_bits) != 4:
            raise ConfigError("weight_bits must have exactly 4 entries")


def cam_match(broadcast_tag: int, cam_tag: int) -> bool:
    """All-bits tag comparison."""
    if not 0 <= broadcast_tag <= CAM_TAG_MAX or not 0 <= cam_tag <= CAM_TAG_MAX:
        raise ConfigError("tags must be in [0, 2047]")
    return broadcast_tag == cam_tag


@dataclass(frozen=True)
class StpState:
    """Depression capacitor state and its recovery parameters.

    ``V_stpw`` is the no-input steady state the voltage relaxes back to;
    each pulse ramps the capacitor down by I_stpstr/C_stp times the pulse
    width (floored at ground).
    """

    V_stp: float
    V_stpw: float
    I_stpstr: float
    tau_recovery: float
    C_stp: float

    def __post_init__(self) -> None:
        if self.tau_recovery <= 0:
            raise ConfigError(f"tau_recovery must be positive, got {self.tau_recovery}")
        if self.C_stp <= 0:
            raise ConfigError(f"C_stp must be positive, got {self.C_stp}")
        if self.I_stpstr < 0:
            raise ConfigError(f"I_stpstr must be >= 0, got {self.I_stpstr}")


def stp_on_pulse(state: StpState, pulse_width: float) -> StpState:
    """Depress the weight voltage for one presynaptic pulse."""
    if pulse_width < 0:
        raise ConfigError(f"pulse_width must be >= 0, got {pulse_width}")
    drop = state.I_stpstr * pulse_width / state.C_stp
    return replace(state, V_stp=max(state.V_stp - drop, 0.0))


def stp_recover(state: StpState, dt: float) -> StpState:
    """Exponential relaxation toward the steady-state voltage."""
    if dt < 0:
        raise ConfigError(f"dt must be >= 0, got {dt}")
    gap = state.V_stp - state.V_stpw
    return replace(state, V_stp=state.V_stpw + gap * math.exp(-dt / state.tau_recovery))


def stp_weight_current(state: StpState, consts: PhysicsConstants = NOMINAL) -> float:
    """Weight current produced by the plasticity capacitor voltage."""
    return consts.I_0 * math.exp(consts.kappa * state.V_stp / consts.U_T)


def synapse_weight_current(
    cfg: SynapseConfig,
    base_weights: Sequence[float],
    stp_state: StpState | None = None,
    instance_factors: Sequence[float] = (1.0, 1.0, 1.0, 1.0),
    consts: PhysicsConstants = NOMINAL,
) -> float:
    """Weight current of one synapse.

    With depression enabled the plasticity voltage replaces the 4-bit DAC
    entirely (the two sources are multiplexed, not combined).
    """
    if cfg.stp_enabled:
        if stp_state is None:
            raise ConfigError("stp_enabled synapse needs an StpState")
        return stp_weight_current(stp_state, consts)
    if len(base_weights) != 4:
        raise ConfigError("base_weights must have exactly 4 entries")
    scaled = tuple(b * f for b, f in zip(base_weights, instance_factors))
    return flexible_dac_output(FlexibleDacConfig(scaled, tuple(cfg.weight_bits)))


def synapse_delay_current(
    cfg: SynapseConfig,
    dly_bases: Sequence[float],
    instance_factors: Sequence[float] = (1.0, 1.0, 1.0),
) -> float:
    """Delay DAC output: base current always on, latches add the other two."""
    if len(dly_bases) != 3:
        raise ConfigError("dly_bases must be (I_dly0, I_dly1, I_dly2)")
    if dly_bases[0] <= 0:
        raise ConfigError(f"I_dly0 must be positive, got {dly_bases[0]}")
    scaled = tuple(b * f for b, f in zip(dly_bases, instance_factors))
    cfg_dac = FlexibleDacConfig(
        base_currents=scaled,
        select_bits=(True, cfg.precise_delay, cfg.mismatched_delay),
        always_on_bit0=True,
    )
    return flexible_dac_output(cfg_dac)


def synapse_delay_time(
    cfg: SynapseConfig,
    dly_bases: Sequence[float],
    instance_factors: Sequence[float] = (1.0, 1.0, 1.0),
    C_px: float = 2e-12,
    consts: PhysicsConstants = NOMINAL,
) -> float:
    """Onset delay of the synapse pulse for the configured delay group."""
    current = synapse_delay_current(cfg, dly_bases, instance_factors)
    return px_delay_time(current, C_px, consts)
