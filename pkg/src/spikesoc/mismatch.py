"""Device mismatch: reproducible per-instance lognormal spread factors.

Each analog instance is addressed by a path string ending in its mismatch
class (for example ``chip0/core1/n42/syn7/dly2``).  The factor for a path
is a pure function of (seed, path): the path is hashed to a uniform draw,
mapped through the normal quantile, and exponentiated so factors are
positive with median exactly one.  The default class spreads are the
measured delay-DAC coefficients of variation.
"""

from __future__ import annotations

import hashlib
import logging
import math
import struct
from dataclasses import dataclass, field

from scipy.special import ndtri

from .errors import ConfigError

log = logging.getLogger(__name__)

DEFAULT_CV = {
    "dly0": 0.054,
    "dly1": 0.067,
    "dly2": 0.371,
}


def lognormal_sigma(cv: float) -> float:
    """Log-domain sigma giving a lognormal the requested coefficient of variation."""
    if cv < 0:
        raise ConfigError(f"cv must be >= 0, got {cv}")
    return math.sqrt(math.log1p(cv * cv))


@dataclass(frozen=True)
class MismatchModel:
    seed: int = 0
    cv_by_class: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_CV))
    distribution: str = "lognormal"
    enabled: bool = False

    def __post_init__(self) -> None:
        if self.distribution != "lognormal":
            raise ConfigError(f"unsupported mismatch distribution {self.distribution!r}")

    def factor(self, instance_path: str) -> float:
        """Spread factor for one instance; exactly 1.0 when disabled or cv = 0."""
        if not self.enabled:
            return 1.0
        cls = instance_path.rsplit("/", 1)[-1]
        cv = self.cv_by_class.get(cls)
        if cv is None:
            log.warning("unknown mismatch class %r in path %r; using factor 1.0", cls, instance_path)
            return 1.0
        return sample_mismatch_factor(self.seed, instance_path, cv)


def sample_mismatch_factor(seed: int, instance_path: str, cv: float) -> float:
    """Deterministic median-1 lognormal draw for (seed, path)."""
    if cv == 0.0:
        return 1.0
    digest = hashlib.sha256(f"{seed}:{instance_path}".encode()).digest()
    (word,) = struct.unpack_from(">Q", digest)
    # Uniform in the open interval (0, 1): offset by half a ulp of 2^-64.
    u = (word + 0.5) / 2.0**64
    return math.exp(lognormal_sigma(cv) * float(ndtri(u)))
