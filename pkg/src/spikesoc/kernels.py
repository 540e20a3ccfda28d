"""Reusable analog primitives: first-order current-mode filter and pulse extenders.

The filter has two faces.  ``dpi_advance`` is the closed-form update of the
linear operating regime and is exact for piecewise-constant inputs; it is
what the event-driven engine uses between event edges.  ``dpi_full_rhs`` /
``dpi_integrate_full`` expose the full nonlinear current-mode equation for
the validation mode and for oracle checks.

Pulse extenders convert instantaneous digital events into analog pulses.
The basic one restarts on retrigger (output = union of the extended
events); the delayed one ignores events that arrive while it is busy.
Timing uses the swing model T = C * V_dd * (1 - switch_fraction) / I for
both the discharge (pulse width) and charge (delay) phases.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import ConfigError
from .params import NOMINAL, PhysicsConstants


@dataclass(frozen=True)
class DpiParams:
    """Static biases of one filter instance."""

    I_tau: float
    I_gain: float
    C: float
    polarity: str = "N"
    mirrored: bool = False

    def __post_init__(self) -> None:
        if self.I_tau <= 0:
            raise ConfigError(f"I_tau must be positive, got {self.I_tau}")
        if self.I_gain <= 0:
            raise ConfigError(f"I_gain must be positive, got {self.I_gain}")
        if self.C <= 0:
            raise ConfigError(f"C must be positive, got {self.C}")
        if self.polarity not in ("N", "P"):
            raise ConfigError(f"polarity must be 'N' or 'P', got {self.polarity!r}")


@dataclass(frozen=True)
class DpiState:
    """Dynamic state: output current and the time it was last valid."""

    I_out: float = 0.0
    last_update: float = 0.0

    def __post_init__(self) -> None:
        if self.I_out < 0:
            raise ConfigError(f"I_out must be >= 0, got {self.I_out}")


def dpi_tau(params: DpiParams, consts: PhysicsConstants = NOMINAL) -> float:
    """Filter time constant in seconds."""
    return params.C * consts.U_T / (consts.kappa * params.I_tau)


def dpi_steady_state(params: DpiParams, I_in: float) -> float:
    """Asymptotic output for a constant input, linear regime."""
    return (params.I_gain / params.I_tau) * I_in


def dpi_advance(
    state: DpiState,
    params: DpiParams,
    I_in: float,
    dt: float,
    consts: PhysicsConstants = NOMINAL,
) -> DpiState:
    """Exact linear-regime update over an interval of constant input."""
    if dt < 0:
        raise ConfigError(f"dt must be >= 0, got {dt}")
    if dt == 0.0:
        return state
    tau = dpi_tau(params, consts)
    i_ss = dpi_steady_state(params, I_in)
    i_out = i_ss + (state.I_out - i_ss) * math.exp(-dt / tau)
    if i_out < 0.0:
        i_out = 0.0
    return DpiState(I_out=i_out, last_update=state.last_update + dt)


def dpi_full_rhs(
    I_out: float,
    I_in: float,
    params: DpiParams,
    consts: PhysicsConstants = NOMINAL,
) -> float:
    """dI_out/dt of the full nonlinear current-mode equation.

    The drive term saturates through the harmonic mean of I_gain and I_out,
    which reduces to the linear regime when I_out dominates and to
    capacitor-voltage integration when I_gain dominates.
    """
    tau = dpi_tau(params, consts)
    drive = (I_in / params.I_tau) * (params.I_gain * I_out / (params.I_gain + I_out))
    return (drive - I_out) / tau


def dpi_integrate_full(
    state: DpiState,
    params: DpiParams,
    I_in: float,
    dt: float,
    consts: PhysicsConstants = NOMINAL,
    rtol: float = 1e-8,
) -> DpiState:
    """Adaptive RK4 integration of the full equation over constant input.

    Step doubling with Richardson error control; used by the validation
    engine mode.  The state is floored at zero (currents cannot reverse).
    """
    if dt < 0:
        raise ConfigError(f"dt must be >= 0, got {dt}")
    if dt == 0.0:
        return state

    def rhs(y: float) -> float:
        return dpi_full_rhs(max(y, 0.0), I_in, params, consts)

    tau = dpi_tau(params, consts)
    y = state.I_out
    t = 0.0
    h = min(dt, tau / 16.0)
    scale_floor = 1e-3 * max(y, dpi_steady_state(params, I_in), consts.I_0)
    while t < dt:
        h = min(h, dt - t)
        y_full = _rk4_step(rhs, y, h)
        y_half = _rk4_step(rhs, _rk4_step(rhs, y, h / 2.0), h / 2.0)
        err = abs(y_full - y_half)
        scale = max(abs(y_half), scale_floor)
        if err <= rtol * scale or h <= dt * 1e-12:
            t += h
            y = max(y_half, 0.0)
            if err > 0.0:
                h *= min(2.0, 0.9 * (rtol * scale / err) ** 0.2)
            else:
                h *= 2.0
        else:
            h *= max(0.1, 0.9 * (rtol * scale / err) ** 0.2)
    return DpiState(I_out=y, last_update=state.last_update + dt)


def _rk4_step(rhs, y: float, h: float) -> float:
    k1 = rhs(y)
    k2 = rhs(y + 0.5 * h * k1)
    k3 = rhs(y + 0.5 * h * k2)
    k4 = rhs(y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


# ---------------------------------------------------------------------------
# Pulse extenders
# ---------------------------------------------------------------------------

_NEG_INF = float("-inf")


@dataclass(frozen=True)
class PulseExtenderState:
    """One pulse extender: biases plus the current pulse window.

    ``pulse_start``/``pulse_end`` are absolute times of the pulse in flight
    (or in the past).  For the delayed variant the unit is busy from the
    accepted trigger until ``pulse_end``.
    """

    mode: str  # "basic" | "delayed"
    I_pw: float
    C_px: float
    I_delay: float | None = None
    accepted_at: float = _NEG_INF
    pulse_start: float = _NEG_INF
    pulse_end: float = _NEG_INF

    def __post_init__(self) -> None:
        if self.mode not in ("basic", "delayed"):
            raise ConfigError(f"mode must be 'basic' or 'delayed', got {self.mode!r}")
        if self.I_pw <= 0:
            raise ConfigError(f"I_pw must be positive, got {self.I_pw}")
        if self.C_px <= 0:
            raise ConfigError(f"C_px must be positive, got {self.C_px}")
        if self.mode == "delayed" and (self.I_delay is None or self.I_delay <= 0):
            raise ConfigError("delayed mode requires I_delay > 0")


def px_pulse_width(I_pw: float, C_px: float, consts: PhysicsConstants = NOMINAL) -> float:
    """Pulse width in seconds for a discharge current."""
    if I_pw <= 0:
        raise ConfigError(f"I_pw must be positive, got {I_pw}")
    swing = consts.V_dd * (1.0 - consts.switch_threshold_fraction)
    return C_px * swing / I_pw


def px_delay_time(I_delay: float, C_px: float, consts: PhysicsConstants = NOMINAL) -> float:
    """Onset delay in seconds for a charge current (same swing model)."""
    if I_delay <= 0:
        raise ConfigError(f"I_delay must be positive, got {I_delay}")
    swing = consts.V_dd * (1.0 - consts.switch_threshold_fraction)
    return C_px * swing / I_delay


def px_trigger(
    state: PulseExtenderState, t: float, consts: PhysicsConstants = NOMINAL
) -> PulseExtenderState:
    """Basic extender trigger: start a pulse, or restart the one in flight."""
    t_pulse = px_pulse_width(state.I_pw, state.C_px, consts)
    if state.pulse_start <= t < state.pulse_end:
        # Retrigger recharges the capacitor: the pulse extends, output stays
        # the union of the individual windows.
        return replace(state, accepted_at=t, pulse_end=t + t_pulse)
    return replace(state, accepted_at=t, pulse_start=t, pulse_end=t + t_pulse)


def px_delayed_trigger(
    state: PulseExtenderState, t: float, consts: PhysicsConstants = NOMINAL
) -> PulseExtenderState:
    """Delayed extender trigger; events during the busy window are dropped."""
    if state.mode != "delayed":
        raise ConfigError("px_delayed_trigger requires a delayed-mode state")
    if state.accepted_at <= t < state.pulse_end:
        return state
    t_delay = px_delay_time(state.I_delay, state.C_px, consts)
    t_pulse = px_pulse_width(state.I_pw, state.C_px, consts)
    return replace(
        state,
        accepted_at=t,
        pulse_start=t + t_delay,
        pulse_end=t + t_delay + t_pulse,
    )


def px_is_active(state: PulseExtenderState, t: float) -> bool:
    """Whether the output pulse is high at time t."""
    return state.pulse_start <= t < state.pulse_end


def lpf_charge_per_event(I_gain: float, I_w: float, I_tau: float, T_pulse: float) -> float:
    """Total output charge one event injects through an event low-pass filter."""
    if min(I_gain, I_w, I_tau, T_pulse) <= 0:
        raise ConfigError("lpf_charge_per_event requires positive arguments")
    return (I_gain * I_w / I_tau) * T_pulse
