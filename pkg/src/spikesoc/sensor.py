"""2D sensor event pre-processor.

Stages run in fixed order: pixel filter, duplication, sum pooling, patch
cutting, polarity filter, source mapping.  Every input event ends up in
exactly one counter bucket (mapped or dropped-at-stage); duplication adds
an extra outgoing copy without consuming the original.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ConfigError
from .routing import Displacement, InterNeuronEvent, SensorEvent

POOL_FACTORS = (1, 2, 4, 8)
MAX_PATCH = 64
MAX_FILTER_ADDRESSES = 64

# Input geometries of the directly supported camera models; arbitrary sizes
# up to the 9-bit coordinate limit are accepted as well.
SENSOR_PRESETS = {
    "davis346": (346, 260),
    "davis240": (240, 180),
    "dvs128": (128, 128),
}
MAX_COORD = 512


@dataclass(frozen=True)
class MappingEntry:
    """Outgoing word fields for one patch pixel."""

    tag: int
    dx: int = 0
    dy: int = 0
    cores: int = 0


@dataclass(frozen=True)
class SensorPipelineConfig:
    geometry: tuple[int, int] = SENSOR_PRESETS["davis346"]
    pixel_filter: tuple[tuple[int, int], ...] = ()
    duplicate_to: tuple[int, int] | None = None  # chip displacement, each in {-1, 0, 1}
    pool_x: int = 1
    pool_y: int = 1
    cut_origin: tuple[int, int] = (0, 0)
    cut_size: tuple[int, int] = (MAX_PATCH, MAX_PATCH)
    polarity_mode: str = "both"  # "both" | "on_only" | "off_only"
    mapping: dict[tuple[int, int], MappingEntry] = field(default_factory=dict)
    mapping_on: dict[tuple[int, int], MappingEntry] | None = None
    mapping_off: dict[tuple[int, int], MappingEntry] | None = None

    def __post_init__(self) -> None:
        w, h = self.geometry
        if not (0 < w <= MAX_COORD and 0 < h <= MAX_COORD):
            raise ConfigError(f"sensor geometry out of range: {self.geometry}")
        if len(self.pixel_filter) > MAX_FILTER_ADDRESSES:
            raise ConfigError(
                f"pixel filter holds at most {MAX_FILTER_ADDRESSES} addresses, got {len(self.pixel_filter)}"
            )
        if self.pool_x not in POOL_FACTORS or self.pool_y not in POOL_FACTORS:
            raise ConfigError(f"pool factors must be one of {POOL_FACTORS}")
        cw, ch = self.cut_size
        if not (1 <= cw <= MAX_PATCH and 1 <= ch <= MAX_PATCH):
            raise ConfigError(f"cut size must be within {MAX_PATCH}x{MAX_PATCH}: {self.cut_size}")
        if self.polarity_mode not in ("both", "on_only", "off_only"):
            raise ConfigError(f"unknown polarity mode {self.polarity_mode!r}")
        if self.duplicate_to is not None:
            ddx, ddy = self.duplicate_to
            if abs(ddx) + abs(ddy) != 1:
                raise ConfigError("duplicate_to must name one of the four neighbor chips")

    def mapping_for(self, pol: int) -> dict[tuple[int, int], MappingEntry]:
        if pol and self.mapping_on is not None:
            return self.mapping_on
        if not pol and self.mapping_off is not None:
            return self.mapping_off
        return self.mapping


@dataclass
class PipelineCounters:
    received: int = 0
    filtered: int = 0
    duplicated: int = 0
    cut_dropped: int = 0
    polarity_dropped: int = 0
    unmapped: int = 0
    mapped: int = 0

    def as_dict(self) -> dict[str, int]:
        return dict(vars(self))


def identity_mapping(width: int, height: int, cores: int = 1, base_tag: int = 0) -> dict:
    """Row-major one-to-one patch mapping: tag = base + y*64 + x."""
    return {
        (x, y): MappingEntry(tag=base_tag + y * MAX_PATCH + x, cores=cores)
        for y in range(height)
        for x in range(width)
    }


def sensor_source_map(
    patch_x: int, patch_y: int, pol: int, cfg: SensorPipelineConfig
) -> InterNeuronEvent | None:
    """Look up the outgoing word for a patch pixel; None when unmapped."""
    entry = cfg.mapping_for(pol).get((patch_x, patch_y))
    if entry is None:
        return None
    return InterNeuronEvent(
        tag=entry.tag,
        dy=Displacement.from_value(entry.dy),
        dx=Displacement.from_value(entry.dx),
        cores=entry.cores,
    )


def process_sensor_event(
    ev: SensorEvent,
    cfg: SensorPipelineConfig,
    counters: PipelineCounters | None = None,
) -> tuple[InterNeuronEvent | None, SensorEvent | None]:
    """Run one decoded sensor event through the pipeline.

    Returns the mapped inter-neuron word (or None if dropped at any stage)
    and the duplicated sensor word (or None when duplication is off).
    """
    if counters is None:
        counters = PipelineCounters()
    counters.received += 1
    x, y, pol = ev.pixel_x, ev.pixel_y, ev.pol

    if (x, y) in cfg.pixel_filter:
        counters.filtered += 1
        return None, None

    duplicate = None
    if cfg.duplicate_to is not None:
        ddx, ddy = cfg.duplicate_to
        duplicate = SensorEvent(
            pol=pol,
            pixel_y=y,
            pixel_x=x,
            dy=Displacement.from_value(ddy),
            dx=Displacement.from_value(ddx),
        )
        counters.duplicated += 1

    x //= cfg.pool_x
    y //= cfg.pool_y

    ox, oy = cfg.cut_origin
    cw, ch = cfg.cut_size
    if not (ox <= x < ox + cw and oy <= y < oy + ch):
        counters.cut_dropped += 1
        return None, duplicate
    x -= ox
    y -= oy

    if (cfg.polarity_mode == "on_only" and pol == 0) or (
        cfg.polarity_mode == "off_only" and pol == 1
    ):
        counters.polarity_dropped += 1
        return None, duplicate

    word = sensor_source_map(x, y, pol, cfg)
    if word is None:
        counters.unmapped += 1
        return None, duplicate
    counters.mapped += 1
    return word, duplicate
