"""Bias generation: parameter-generator currents, I/V conversion, flexible DAC.

Every analog knob in the emulator resolves to a current through one of the
operations here.  Currents are amperes, voltages volts, capacitances farads
throughout the package; no implicit unit scaling anywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .errors import ConfigError, DomainError

# Nominal per-range base currents of the coarse DAC stage, index 0..5.
COARSE_CURRENTS: tuple[float, ...] = (
    70e-12,
    550e-12,
    4.45e-9,
    35e-9,
    0.28e-6,
    2.25e-6,
)

FINE_MAX = 255


@dataclass(frozen=True)
class PhysicsConstants:
    """Process constants shared by all subthreshold circuit models.

    Defaults are standard 180 nm weak-inversion values; the switch threshold
    is the fraction of the supply at which the starved-inverter pulse
    extenders flip.
    """

    U_T: float = 0.025
    kappa: float = 0.7
    I_0: float = 0.5e-15
    V_dd: float = 1.8
    switch_threshold_fraction: float = 0.25

    def __post_init__(self) -> None:
        if self.U_T <= 0:
            raise ConfigError(f"U_T must be positive, got {self.U_T}")
        if not 0 < self.kappa <= 1:
            raise ConfigError(f"kappa must be in (0, 1], got {self.kappa}")
        if self.I_0 <= 0:
            raise ConfigError(f"I_0 must be positive, got {self.I_0}")
        if self.V_dd <= 0:
            raise ConfigError(f"V_dd must be positive, got {self.V_dd}")
        if not 0 < self.switch_threshold_fraction < 1:
            raise ConfigError(
                "switch_threshold_fraction must be in (0, 1), got "
                f"{self.switch_threshold_fraction}"
            )


NOMINAL = PhysicsConstants()


@dataclass(frozen=True)
class BiasCode:
    """A (coarse, fine) DAC code plus the per-parameter trim factor."""

    coarse: int
    fine: int
    k_parameter: float = 1.0

    def __post_init__(self) -> None:
        if not 0 <= self.coarse <= 5:
            raise ConfigError(f"coarse code out of range [0, 5]: {self.coarse}")
        if not 0 <= self.fine <= FINE_MAX:
            raise ConfigError(f"fine code out of range [0, 255]: {self.fine}")
        if self.k_parameter <= 0:
            raise ConfigError(f"k_parameter must be positive: {self.k_parameter}")


def resolve_bias(code: BiasCode, coarse_table: Sequence[float] = COARSE_CURRENTS) -> float:
    """Resolve a DAC code to its output current in amperes.

    The fine code scales the selected coarse base current linearly; fine = 0
    yields exactly zero (ideal dark-current-free mode).
    """
    if len(coarse_table) != 6:
        raise ConfigError(f"coarse table must have 6 entries, got {len(coarse_table)}")
    base = coarse_table[code.coarse]
    if base < 0:
        raise ConfigError(f"coarse table entries must be >= 0, got {base}")
    return code.k_parameter * base * (code.fine / FINE_MAX)


def bias_for_current(current: float, coarse_table: Sequence[float] = COARSE_CURRENTS) -> BiasCode:
    """Pick a code whose resolved current equals ``current`` exactly.

    Chooses the lowest coarse range that can represent the value with
    fine <= 255, then trims with k.  Useful for building calibrated
    configuration profiles.
    """
    if current < 0:
        raise ConfigError(f"bias current must be >= 0, got {current}")
    if current == 0.0:
        return BiasCode(0, 0, 1.0)
    for coarse, base in enumerate(coarse_table):
        if current <= base or coarse == len(coarse_table) - 1:
            fine = min(FINE_MAX, max(1, round(current / base * FINE_MAX)))
            k = current / (base * fine / FINE_MAX)
            return BiasCode(coarse, fine, k)
    raise AssertionError("unreachable")


def current_to_gate_voltage(current: float, polarity: str, consts: PhysicsConstants = NOMINAL) -> float:
    """Gate voltage of the diode-connected transistor conducting ``current``.

    N-type referenced to ground, P-type to the supply rail.
    """
    if current <= 0:
        raise DomainError(f"gate voltage undefined for current <= 0: {current}")
    v = (consts.U_T / consts.kappa) * math.log(current / consts.I_0)
    if polarity == "N":
        return v
    if polarity == "P":
        return consts.V_dd - v
    raise ConfigError(f"polarity must be 'N' or 'P', got {polarity!r}")


def gate_voltage_to_current(voltage: float, polarity: str, consts: PhysicsConstants = NOMINAL) -> float:
    """Inverse of :func:`current_to_gate_voltage`."""
    if polarity == "N":
        v = voltage
    elif polarity == "P":
        v = consts.V_dd - voltage
    else:
        raise ConfigError(f"polarity must be 'N' or 'P', got {polarity!r}")
    return consts.I_0 * math.exp(consts.kappa * v / consts.U_T)


@dataclass(frozen=True)
class FlexibleDacConfig:
    """Per-unit binary combination of shared base currents.

    ``always_on_bit0`` hard-wires the first branch on regardless of its
    select bit (the minimal-current variant of the circuit).
    """

    base_currents: tuple[float, ...]
    select_bits: tuple[bool, ...]
    always_on_bit0: bool = False

    def __post_init__(self) -> None:
        if not 2 <= len(self.base_currents) <= 4:
            raise ConfigError(
                f"flexible DAC supports 2-4 branches, got {len(self.base_currents)}"
            )
        if len(self.base_currents) != len(self.select_bits):
            raise ConfigError("base_currents and select_bits lengths differ")
        if any(b < 0 for b in self.base_currents):
            raise ConfigError("base currents must be >= 0")


def flexible_dac_output(cfg: FlexibleDacConfig) -> float:
    """Sum of the selected base currents, in amperes."""
    total = 0.0
    for i, (base, bit) in enumerate(zip(cfg.base_currents, cfg.select_bits)):
        if bit or (i == 0 and cfg.always_on_bit0):
            total += base
    return total
