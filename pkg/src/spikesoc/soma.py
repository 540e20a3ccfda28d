"""Integrate-and-fire soma: shared filter, two firing models, slow feedback loops.

The membrane is one current-mode filter whose effective leak is the leak
bias plus the shunting (GABA_A) input and whose input is the dendritic sum
plus DC minus the adaptation current, floored at zero.  Both firing models
admit closed-form trajectories for piecewise-constant inputs, so spike
times are predicted analytically rather than found by stepping:

* thresholded: spike when the membrane current reaches the spike threshold,
  then reset to zero and hold for a refractory period set by the refractory
  pulse extender;
* exponential: once the feedback current (gain knob times the membrane
  current) exceeds the effective leak, it is added to the input, making the
  trajectory affine-exponential; a spike is declared at a ceiling current.

Spikes drive a pulse extender shared by the adaptation and calcium filters;
adaptation subtracts from the soma input, calcium estimates the firing rate
for the homeostatic gain controller.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .errors import ConfigError
from .kernels import (
    DpiParams,
    DpiState,
    PulseExtenderState,
    dpi_advance,
    px_pulse_width,
    px_trigger,
)
from .params import NOMINAL, PhysicsConstants, current_to_gate_voltage

INFINITY = float("inf")


@dataclass(frozen=True)
class HomeostasisConfig:
    """Bang-bang gain controller references and ramp rates.

    The gain voltage ramps up at ``rate_up`` while the calcium current is
    below the reference and down at ``rate_down`` above it, with a relative
    deadband to avoid chatter at equality.
    """

    I_ca_ref: float
    V_ref_H: float
    V_ref_M: float
    V_ref_L: float
    rate_up: float
    rate_down: float
    deadband: float = 0.01

    def __post_init__(self) -> None:
        if not self.V_ref_L <= self.V_ref_M <= self.V_ref_H:
            raise ConfigError("homeostasis references must satisfy V_L <= V_M <= V_H")
        if self.I_ca_ref <= 0:
            raise ConfigError(f"I_ca_ref must be positive, got {self.I_ca_ref}")
        if self.rate_up < 0 or self.rate_down < 0:
            raise ConfigError("homeostasis ramp rates must be >= 0")


def homeostasis_rates(
    V_ref_H: float, V_ref_M: float, V_ref_L: float, time_base: float
) -> tuple[float, float]:
    """Ramp rates that traverse the reference ladder in one time base."""
    if time_base <= 0:
        raise ConfigError(f"time_base must be positive, got {time_base}")
    return (V_ref_H - V_ref_M) / time_base, (V_ref_M - V_ref_L) / time_base


@dataclass(frozen=True)
class SomaConfig:
    """Resolved static soma parameters (currents in amperes)."""

    model: str = "thresholded"  # "thresholded" | "exponential"
    I_leak: float = 1e-12
    I_gain: float = 100e-12
    I_refr: float = 1.71e-12
    I_dc: float = 0.0
    I_spkthr: float = 1e-9
    dc_enabled: bool = False
    killed: bool = False
    adaptation_enabled: bool = False
    homeostasis_enabled: bool = False
    homeostasis_active: bool = True
    homeostasis_target: str = "soma"  # "soma" | "nmda"
    homeostasis: HomeostasisConfig | None = None
    C_mem: float = 7.72e-12
    C_refr: float = 2e-12
    exp_feedback_gain: float = 0.2
    I_ceiling: float | None = None
    adaptation_dpi: DpiParams | None = None
    adaptation_weight: float = 0.0
    calcium_dpi: DpiParams | None = None
    calcium_weight: float = 0.0
    feedback_pw_current: float = 1e-9
    feedback_C: float = 2e-12

    def __post_init__(self) -> None:
        if self.model not in ("thresholded", "exponential"):
            raise ConfigError(f"unknown soma model {self.model!r}")
        if self.homeostasis_target not in ("soma", "nmda"):
            raise ConfigError(f"unknown homeostasis target {self.homeostasis_target!r}")
        for name in ("I_leak", "I_gain", "I_refr", "I_dc", "I_spkthr"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        for name in ("C_mem", "C_refr", "feedback_C"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.homeostasis_enabled and self.homeostasis is None:
            raise ConfigError("homeostasis_enabled requires a HomeostasisConfig")
        if self.adaptation_enabled and self.adaptation_dpi is None:
            raise ConfigError("adaptation_enabled requires adaptation filter parameters")

    def ceiling(self) -> float:
        return self.I_ceiling if self.I_ceiling is not None else 1000.0 * self.I_spkthr

    def refractory_time(self, consts: PhysicsConstants = NOMINAL) -> float:
        if self.I_refr <= 0:
            return INFINITY
        return px_pulse_width(self.I_refr, self.C_refr, consts)


@dataclass(frozen=True)
class SomaState:
    """Dynamic soma state; all times are absolute seconds."""

    membrane: DpiState = field(default_factory=DpiState)
    refractory_until: float = float("-inf")
    adaptation: DpiState = field(default_factory=DpiState)
    calcium: DpiState = field(default_factory=DpiState)
    V_gain: float = 0.0
    feedback_px: PulseExtenderState | None = None


@dataclass(frozen=True)
class SomaInputs:
    """Branch currents held constant over one integration step."""

    I_dendritic: float = 0.0
    I_somatic: float = 0.0


def soma_input_currents(
    I_dendritic: float,
    I_somatic: float,
    I_adapt: float,
    cfg: SomaConfig,
    consts: PhysicsConstants = NOMINAL,
) -> tuple[float, float]:
    """Resolve the filter input and effective leak from the branch currents.

    The effective leak is floored at the dark current so the time constant
    stays finite.
    """
    dc = cfg.I_dc if cfg.dc_enabled else 0.0
    i_in = max(I_dendritic + dc - I_adapt, 0.0)
    i_tau_eff = max(cfg.I_leak + I_somatic, consts.I_0)
    return i_in, i_tau_eff


def membrane_voltage(I_mem: float, consts: PhysicsConstants = NOMINAL) -> float:
    """Gate voltage corresponding to a membrane current, floored at rest."""
    return current_to_gate_voltage(max(I_mem, consts.I_0), "N", consts)


def effective_gain_current(state: SomaState, cfg: SomaConfig, consts: PhysicsConstants = NOMINAL) -> float:
    """Gain current, regulated by homeostasis when it targets the soma."""
    if cfg.homeostasis_enabled and cfg.homeostasis_target == "soma":
        return consts.I_0 * math.exp(consts.kappa * state.V_gain / consts.U_T)
    return max(cfg.I_gain, consts.I_0)


def homeostasis_step(
    v_gain: float,
    hcfg: HomeostasisConfig,
    I_ca: float,
    dt: float,
    active: bool,
    consts: PhysicsConstants = NOMINAL,
) -> float:
    """Advance the gain voltage: ramp against the calcium error, or reset."""
    if dt < 0:
        raise ConfigError(f"dt must be >= 0, got {dt}")
    if not active:
        return hcfg.V_ref_M
    error = hcfg.I_ca_ref - I_ca
    if abs(error) <= hcfg.deadband * hcfg.I_ca_ref:
        return v_gain
    slope = hcfg.rate_up if error > 0 else -hcfg.rate_down
    return min(max(v_gain + slope * dt, 0.0), consts.V_dd)


# ---------------------------------------------------------------------------
# Closed-form membrane trajectories
# ---------------------------------------------------------------------------


def _lin_advance(i0: float, i_ss: float, tau: float, dt: float) -> float:
    return i_ss + (i0 - i_ss) * math.exp(-dt / tau)


def _lin_time_to(i0: float, i_ss: float, tau: float, target: float) -> float:
    """Time for the exponential approach to reach ``target``; inf if unreachable."""
    if i0 == target:
        return 0.0
    num = i_ss - i0
    den = i_ss - target
    if den == 0.0 or (num > 0) != (den > 0) or abs(num) < abs(den):
        return INFINITY
    return tau * math.log(num / den)


def _affine_advance(i0: float, a: float, b: float, dt: float) -> float:
    # dI/dt = a + b*I
    if b == 0.0:
        return i0 + a * dt
    p = -a / b
    return p + (i0 - p) * math.exp(b * dt)


def _affine_time_to(i0: float, a: float, b: float, target: float) -> float:
    if i0 == target:
        return 0.0
    if b == 0.0:
        if a == 0.0:
            return INFINITY
        t = (target - i0) / a
        return t if t > 0 else INFINITY
    p = -a / b
    num = target - p
    den = i0 - p
    if den == 0.0 or (num > 0) != (den > 0):
        return INFINITY
    ratio = num / den
    if b > 0 and ratio < 1.0:
        return INFINITY
    if b < 0 and ratio > 1.0:
        return INFINITY
    return math.log(ratio) / b


@dataclass(frozen=True)
class _Drive:
    """Frozen per-leg drive terms of the membrane equation."""

    I_in: float
    I_tau_eff: float
    I_gain_eff: float
    tau: float

    @property
    def I_ss(self) -> float:
        return (self.I_gain_eff / self.I_tau_eff) * self.I_in


def _membrane_drive(
    state: SomaState, cfg: SomaConfig, inputs: SomaInputs, consts: PhysicsConstants
) -> _Drive:
    i_in, i_tau_eff = soma_input_currents(
        inputs.I_dendritic, inputs.I_somatic, state.adaptation.I_out, cfg, consts
    )
    i_gain = effective_gain_current(state, cfg, consts)
    tau = cfg.C_mem * consts.U_T / (consts.kappa * i_tau_eff)
    return _Drive(i_in, i_tau_eff, i_gain, tau)


def _exp_region_b_coeffs(d: _Drive, g: float) -> tuple[float, float]:
    # tau*dI/dt + I = (I_gain/I_tau)*(I_in + g*I)  =>  dI/dt = a + b*I
    a = d.I_ss / d.tau
    b = ((d.I_gain_eff / d.I_tau_eff) * g - 1.0) / d.tau
    return a, b


def next_spike_time(i0: float, cfg: SomaConfig, d: _Drive, consts: PhysicsConstants = NOMINAL) -> float:
    """Time from now until the membrane fires, with drives held constant."""
    if cfg.killed:
        return INFINITY
    if cfg.model == "thresholded":
        if cfg.I_spkthr <= 0:
            return INFINITY
        if i0 >= cfg.I_spkthr:
            return 0.0
        return _lin_time_to(i0, d.I_ss, d.tau, cfg.I_spkthr)

    g = cfg.exp_feedback_gain
    ceiling = cfg.ceiling()
    if g <= 0:
        return INFINITY
    boundary = d.I_tau_eff / g
    t_acc = 0.0
    i = i0
    for _ in range(3):
        if i >= ceiling:
            return t_acc
        if i <= boundary and not (i == boundary and d.I_ss > boundary):
            target = min(boundary, ceiling)
            t_hit = _lin_time_to(i, d.I_ss, d.tau, target)
            if t_hit == INFINITY:
                return INFINITY
            t_acc += t_hit
            i = target
            continue
        a, b = _exp_region_b_coeffs(d, g)
        t_hit = _affine_time_to(i, a, b, ceiling)
        if t_hit != INFINITY:
            return t_acc + t_hit
        return INFINITY
    return INFINITY


def advance_membrane(
    i0: float, cfg: SomaConfig, d: _Drive, dt: float, consts: PhysicsConstants = NOMINAL
) -> float:
    """Membrane current after ``dt`` with constant drives and no spike inside."""
    if cfg.killed:
        return 0.0
    if cfg.model == "thresholded":
        return max(_lin_advance(i0, d.I_ss, d.tau, dt), 0.0)

    g = cfg.exp_feedback_gain
    if g <= 0:
        return max(_lin_advance(i0, d.I_ss, d.tau, dt), 0.0)
    boundary = d.I_tau_eff / g
    i = i0
    remaining = dt
    for _ in range(3):
        if remaining <= 0:
            break
        if i <= boundary and not (i == boundary and d.I_ss > boundary):
            t_hit = _lin_time_to(i, d.I_ss, d.tau, boundary)
            if t_hit >= remaining:
                i = _lin_advance(i, d.I_ss, d.tau, remaining)
                remaining = 0.0
            else:
                i = boundary
                remaining -= t_hit
            continue
        a, b = _exp_region_b_coeffs(d, g)
        if b < 0 and -a / b < boundary:
            t_exit = _affine_time_to(i, a, b, boundary)
            if t_exit < remaining:
                i = boundary * (1.0 - 1e-15)
                remaining -= t_exit
                continue
        i = _affine_advance(i, a, b, remaining)
        remaining = 0.0
    return max(i, 0.0)


# ---------------------------------------------------------------------------
# Feedback (adaptation / calcium) low-pass filters
# ---------------------------------------------------------------------------


def _feedback_input(px: PulseExtenderState | None, t: float, weight: float) -> float:
    if px is None or weight == 0.0:
        return 0.0
    return weight if px.pulse_start <= t < px.pulse_end else 0.0


def advance_feedback_filters(
    state: SomaState, cfg: SomaConfig, t0: float, t1: float, consts: PhysicsConstants = NOMINAL
) -> SomaState:
    """Advance adaptation and calcium exactly, splitting at the pulse edges."""
    if t1 < t0:
        raise ConfigError("t1 must be >= t0")
    adaptation, calcium = state.adaptation, state.calcium
    px = state.feedback_px
    edges = [t0]
    if px is not None:
        for edge in (px.pulse_start, px.pulse_end):
            if t0 < edge < t1:
                edges.append(edge)
    edges.append(t1)
    edges.sort()
    for left, right in zip(edges, edges[1:]):
        dt = right - left
        if dt <= 0:
            continue
        mid = left
        if cfg.adaptation_dpi is not None:
            adaptation = dpi_advance(
                adaptation, cfg.adaptation_dpi, _feedback_input(px, mid, cfg.adaptation_weight), dt, consts
            )
        if cfg.calcium_dpi is not None:
            calcium = dpi_advance(
                calcium, cfg.calcium_dpi, _feedback_input(px, mid, cfg.calcium_weight), dt, consts
            )
    return replace(state, adaptation=adaptation, calcium=calcium)


def on_spike_feedback(
    state: SomaState, cfg: SomaConfig, t: float, consts: PhysicsConstants = NOMINAL
) -> SomaState:
    """Trigger the shared adaptation/calcium pulse extender for a spike at t."""
    px = state.feedback_px
    if px is None:
        px = PulseExtenderState(mode="basic", I_pw=cfg.feedback_pw_current, C_px=cfg.feedback_C)
    return replace(state, feedback_px=px_trigger(px, t, consts))


# ---------------------------------------------------------------------------
# Stepping
# ---------------------------------------------------------------------------


def soma_step(
    state: SomaState,
    cfg: SomaConfig,
    inputs: SomaInputs,
    dt: float,
    consts: PhysicsConstants = NOMINAL,
) -> tuple[SomaState, list[float]]:
    """Advance the soma by ``dt`` with the branch currents held constant.

    Returns the new state and the absolute spike times emitted.  The
    adaptation current, homeostatic gain and feedback-pulse edges are
    resampled at every internal leg boundary (spikes and pulse edges), so a
    long step is equivalent to a sequence of short ones at those points.
    """
    if dt < 0:
        raise ConfigError(f"dt must be >= 0, got {dt}")
    t0 = state.membrane.last_update
    t_end = t0 + dt
    now = t0
    spikes: list[float] = []
    guard = 0
    while now < t_end:
        guard += 1
        if guard > 1_000_000:
            raise RuntimeError("soma_step failed to converge; check parameters")
        # Next internal boundary: feedback pulse edge or step end.
        leg_end = t_end
        px = state.feedback_px
        if px is not None:
            for edge in (px.pulse_start, px.pulse_end):
                if now < edge < leg_end:
                    leg_end = edge
        state, spike_t = _advance_leg(state, cfg, inputs, now, leg_end, consts)
        if spike_t is not None:
            spikes.append(spike_t)
            now = spike_t
        else:
            now = leg_end
    return state, spikes


def _advance_leg(
    state: SomaState,
    cfg: SomaConfig,
    inputs: SomaInputs,
    t0: float,
    t1: float,
    consts: PhysicsConstants,
) -> tuple[SomaState, float | None]:
    """Advance up to t1 or to the first spike, whichever comes first."""
    d = _membrane_drive(state, cfg, inputs, consts)
    i0 = state.membrane.I_out

    spike_at = None
    if state.refractory_until >= t1:
        membrane_i = 0.0
    else:
        start = max(t0, state.refractory_until)
        i_start = 0.0 if start > t0 else i0
        t_fire = next_spike_time(i_start, cfg, d, consts)
        if start + t_fire <= t1:
            spike_at = start + t_fire
            t1 = spike_at
            membrane_i = 0.0  # reset on spike
        else:
            membrane_i = advance_membrane(i_start, cfg, d, t1 - start, consts)
        if cfg.killed:
            membrane_i = 0.0

    state = advance_feedback_filters(state, cfg, t0, t1, consts)
    if cfg.homeostasis_enabled and cfg.homeostasis is not None:
        v = homeostasis_step(
            state.V_gain, cfg.homeostasis, state.calcium.I_out, t1 - t0, cfg.homeostasis_active, consts
        )
        state = replace(state, V_gain=v)

    state = replace(state, membrane=DpiState(I_out=membrane_i, last_update=t1))
    if spike_at is not None:
        state = replace(state, refractory_until=spike_at + cfg.refractory_time(consts))
        state = on_spike_feedback(state, cfg, spike_at, consts)
    return state, spike_at
