"""Dendritic branches: conductance transform, alpha-function EPSC, diffusion, gating.

Each neuron owns four branches.  The two excitatory ones (AMPA, NMDA) and
the distal inhibitory one (GABA_B) feed the soma's dendritic input with
signs +, +, -; the proximal inhibitory one (GABA_A) shunts the soma by
adding to its leak instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.linalg

from .errors import ConfigError
from .kernels import DpiParams
from .params import NOMINAL, PhysicsConstants

CORE_ROWS = 16
CORE_COLS = 16
CORE_SIZE = CORE_ROWS * CORE_COLS


class Branch(Enum):
    AMPA = "AMPA"
    NMDA = "NMDA"
    GABA_B = "GABA_B"
    GABA_A = "GABA_A"


EXCITATORY = (Branch.AMPA, Branch.NMDA)


@dataclass(frozen=True)
class DendriteBranchConfig:
    """Static configuration of one branch.

    ``alpha_inhibitory`` holds the inhibitory filter of the double-filter
    alpha EPSC (gain sets its jump, tau its decay); only excitatory
    branches may enable it.  ``gate_source`` selects whether conductance
    mode compares the reversal potential against the membrane or the
    calcium-estimator gate voltage.
    """

    branch: Branch
    dpi: DpiParams
    conductance_enabled: bool = False
    V_reversal: float = 0.0
    gate_source: str = "membrane"  # "membrane" | "calcium"
    alpha_enabled: bool = False
    alpha_inhibitory: DpiParams | None = None
    nmda_threshold: float = 0.0
    nmda_gated: bool = False
    diffusion_enabled: bool = False

    def __post_init__(self) -> None:
        if self.alpha_enabled and self.branch not in EXCITATORY:
            raise ConfigError(f"alpha EPSC is only available on AMPA/NMDA, not {self.branch}")
        if self.alpha_enabled and self.alpha_inhibitory is None:
            raise ConfigError("alpha_enabled requires alpha_inhibitory filter parameters")
        if self.nmda_gated and self.branch is not Branch.NMDA:
            raise ConfigError("membrane gating is only available on the NMDA branch")
        if self.diffusion_enabled and self.branch is not Branch.AMPA:
            raise ConfigError("the diffusion grid is only available on the AMPA branch")
        if self.gate_source not in ("membrane", "calcium"):
            raise ConfigError(f"gate_source must be 'membrane' or 'calcium': {self.gate_source!r}")


def conductance_transform(
    I_dendrite: float,
    V_reversal: float,
    V_neuron: float,
    consts: PhysicsConstants = NOMINAL,
) -> float:
    """Branch output scaled by the driving force toward the reversal potential.

    Signed: the current reverses once the neuron voltage exceeds the
    reversal potential, clamping the membrane there.
    """
    if I_dendrite < 0:
        raise ConfigError(f"I_dendrite must be >= 0, got {I_dendrite}")
    return I_dendrite * math.tanh((V_reversal - V_neuron) / consts.U_T)


def alpha_ddpi_output(W_E: float, tau_E: float, W_I: float, tau_I: float, t: float) -> float:
    """Impulse response of the excitatory-minus-inhibitory filter pair."""
    if min(W_E, tau_E, W_I, tau_I) < 0 or tau_E == 0 or tau_I == 0:
        raise ConfigError("alpha_ddpi_output requires non-negative weights, positive taus")
    if t < 0:
        raise ConfigError(f"t must be >= 0, got {t}")
    return max(W_E * math.exp(-t / tau_E) - W_I * math.exp(-t / tau_I), 0.0)


def alpha_peak_time(tau_E: float, tau_I: float) -> float:
    """Time of the EPSC maximum for equal jump amplitudes."""
    if tau_E <= tau_I:
        raise ConfigError("alpha EPSC needs tau_E > tau_I for a rising phase")
    return math.log(tau_E / tau_I) / (1.0 / tau_I - 1.0 / tau_E)


def nmda_gate(I_in: float, V_mem: float, V_nmda: float) -> float:
    """Pass the branch current only while the membrane exceeds the threshold."""
    if I_in < 0:
        raise ConfigError(f"I_in must be >= 0, got {I_in}")
    return I_in if V_mem > V_nmda else 0.0


# ---------------------------------------------------------------------------
# Diffusion grid
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DiffusionGridConfig:
    """Pseudo-resistor conductances of the per-core 16 x 16 grid.

    ``g_n`` drains each enabled node toward its neuron output, ``g_h`` and
    ``g_v`` couple horizontal and vertical neighbors.  Setting g_v to zero
    gives independent 1D rows.  Disabled nodes are detached and pass their
    injection straight through.
    """

    g_n: float
    g_h: float
    g_v: float
    enabled_mask: tuple[bool, ...] = field(default=tuple([True] * CORE_SIZE))

    def __post_init__(self) -> None:
        if len(self.enabled_mask) != CORE_SIZE:
            raise ConfigError(f"enabled_mask must have {CORE_SIZE} entries")
        if any(self.enabled_mask) and self.g_n <= 0:
            raise ConfigError("g_n must be positive where the grid is enabled")
        if self.g_h < 0 or self.g_v < 0:
            raise ConfigError("coupling conductances must be >= 0")


def conductance_from_bias(I_bias: float, consts: PhysicsConstants = NOMINAL) -> float:
    """Small-signal conductance of a pseudo-resistor biased at I_bias."""
    if I_bias < 0:
        raise ConfigError(f"I_bias must be >= 0, got {I_bias}")
    return consts.kappa * I_bias / consts.U_T


class DiffusionSolver:
    """Quasi-static solver for the resistive grid of one core.

    Builds the node conductance matrix once (LU-factorized) and solves per
    injection epoch.  The only paths to ground are the per-node g_n drains,
    so total output current equals total injected current.
    """

    def __init__(self, grid: DiffusionGridConfig):
        self.grid = grid
        self.nodes = [i for i in range(CORE_SIZE) if grid.enabled_mask[i]]
        self._index = {n: k for k, n in enumerate(self.nodes)}
        n = len(self.nodes)
        if n == 0:
            self._lu = None
            return
        a = np.zeros((n, n))
        for node in self.nodes:
            k = self._index[node]
            a[k, k] += grid.g_n
            row, col = divmod(node, CORE_COLS)
            for (nr, nc), g in (
                ((row, col + 1), grid.g_h),
                ((row + 1, col), grid.g_v),
            ):
                if g == 0.0 or not (0 <= nr < CORE_ROWS and 0 <= nc < CORE_COLS):
                    continue
                neighbor = nr * CORE_COLS + nc
                if not grid.enabled_mask[neighbor]:
                    continue
                j = self._index[neighbor]
                a[k, k] += g
                a[j, j] += g
                a[k, j] -= g
                a[j, k] -= g
        self._lu = scipy.linalg.lu_factor(a)

    def solve(self, injections: np.ndarray) -> np.ndarray:
        """Per-neuron output currents for per-neuron injected currents."""
        injections = np.asarray(injections, dtype=float)
        if injections.shape != (CORE_SIZE,):
            raise ConfigError(f"injections must have shape ({CORE_SIZE},)")
        out = injections.copy()
        if not self.nodes:
            return out
        rhs = injections[self.nodes]
        v = scipy.linalg.lu_solve(self._lu, rhs)
        out[self.nodes] = self.grid.g_n * v
        return out


def diffuse(injections, grid: DiffusionGridConfig) -> np.ndarray:
    """One-shot grid solve; prefer a cached DiffusionSolver in hot paths."""
    return DiffusionSolver(grid).solve(np.asarray(injections, dtype=float))
