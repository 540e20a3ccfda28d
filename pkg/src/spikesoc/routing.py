"""Event fabric: 24-bit AER word codec, source-mapping fan-out, grid routing.

Word layout (bit 23 discriminates the two formats):

    inter-neuron:  0 | tag[22:12] | dy[11:8] | dx[7:4] | cores[3:0]
    sensor:        1 | pol[22] | pixel_y[21:13] | pixel_x[12:4] | dy[3:2] | dx[1:0]

Displacements are sign-magnitude (MSB of the field is the sign), so the
4-bit fields reach +/-7 chips and the 2-bit sensor fields one neighbor.
Sign-magnitude has a negative zero; the codec preserves it bit-exactly, the
routing logic treats it as zero.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .errors import EncodingError

WORD_BITS = 24
WORD_COUNT = 1 << WORD_BITS


@dataclass(frozen=True)
class Displacement:
    """Sign-magnitude chip displacement as stored in a word field."""

    magnitude: int
    negative: bool = False

    @property
    def value(self) -> int:
        return -self.magnitude if self.negative else self.magnitude

    @classmethod
    def from_value(cls, value: int) -> "Displacement":
        return cls(abs(value), value < 0)

    def raw(self, bits: int) -> int:
        mag_bits = bits - 1
        if not 0 <= self.magnitude < (1 << mag_bits):
            raise EncodingError(
                f"displacement magnitude {self.magnitude} does not fit {bits}-bit field"
            )
        return (int(self.negative) << mag_bits) | self.magnitude

    @classmethod
    def from_raw(cls, raw: int, bits: int) -> "Displacement":
        mag_bits = bits - 1
        return cls(raw & ((1 << mag_bits) - 1), bool(raw >> mag_bits))


ZERO_DISPLACEMENT = Displacement(0, False)


@dataclass(frozen=True)
class InterNeuronEvent:
    tag: int
    dy: Displacement = ZERO_DISPLACEMENT
    dx: Displacement = ZERO_DISPLACEMENT
    cores: int = 0


@dataclass(frozen=True)
class SensorEvent:
    pol: int
    pixel_y: int
    pixel_x: int
    dy: Displacement = ZERO_DISPLACEMENT
    dx: Displacement = ZERO_DISPLACEMENT


def _check(name: str, value: int, bits: int) -> int:
    if not 0 <= value < (1 << bits):
        raise EncodingError(f"{name}={value} does not fit a {bits}-bit field")
    return value


def encode_word(event: InterNeuronEvent | SensorEvent) -> int:
    """Pack an event into its 24-bit raw word."""
    if isinstance(event, InterNeuronEvent):
        return (
            (_check("tag", event.tag, 11) << 12)
            | (event.dy.raw(4) << 8)
            | (event.dx.raw(4) << 4)
            | _check("cores", event.cores, 4)
        )
    if isinstance(event, SensorEvent):
        return (
            (1 << 23)
            | (_check("pol", event.pol, 1) << 22)
            | (_check("pixel_y", event.pixel_y, 9) << 13)
            | (_check("pixel_x", event.pixel_x, 9) << 4)
            | (event.dy.raw(2) << 2)
            | event.dx.raw(2)
        )
    raise EncodingError(f"cannot encode {type(event).__name__}")


def decode_word(raw: int) -> InterNeuronEvent | SensorEvent:
    """Unpack a 24-bit raw word; lossless for every value."""
    if not 0 <= raw < WORD_COUNT:
        raise EncodingError(f"raw word {raw:#x} does not fit 24 bits")
    if raw >> 23:
        return SensorEvent(
            pol=(raw >> 22) & 0x1,
            pixel_y=(raw >> 13) & 0x1FF,
            pixel_x=(raw >> 4) & 0x1FF,
            dy=Displacement.from_raw((raw >> 2) & 0x3, 2),
            dx=Displacement.from_raw(raw & 0x3, 2),
        )
    return InterNeuronEvent(
        tag=(raw >> 12) & 0x7FF,
        dy=Displacement.from_raw((raw >> 8) & 0xF, 4),
        dx=Displacement.from_raw((raw >> 4) & 0xF, 4),
        cores=raw & 0xF,
    )


def decode_words(raw: np.ndarray) -> dict[str, np.ndarray]:
    """Vectorized field extraction for bulk event-file processing.

    Returns raw sign-magnitude displacement fields alongside their signed
    values; ``is_sensor`` selects which field set applies per word.
    """
    raw = np.asarray(raw, dtype=np.uint32)
    is_sensor = (raw >> 23) & 0x1
    fields = {
        "is_sensor": is_sensor.astype(bool),
        "tag": ((raw >> 12) & 0x7FF).astype(np.int32),
        "dy4": ((raw >> 8) & 0xF).astype(np.int32),
        "dx4": ((raw >> 4) & 0xF).astype(np.int32),
        "cores": (raw & 0xF).astype(np.int32),
        "pol": ((raw >> 22) & 0x1).astype(np.int32),
        "pixel_y": ((raw >> 13) & 0x1FF).astype(np.int32),
        "pixel_x": ((raw >> 4) & 0x1FF).astype(np.int32),
        "dy2": ((raw >> 2) & 0x3).astype(np.int32),
        "dx2": (raw & 0x3).astype(np.int32),
    }
    fields["dy"] = _signed_from_raw(fields["dy4"], 4)
    fields["dx"] = _signed_from_raw(fields["dx4"], 4)
    fields["sensor_dy"] = _signed_from_raw(fields["dy2"], 2)
    fields["sensor_dx"] = _signed_from_raw(fields["dx2"], 2)
    return fields


def encode_words(fields: dict[str, np.ndarray]) -> np.ndarray:
    """Vectorized inverse of :func:`decode_words` from the raw fields."""
    is_sensor = np.asarray(fields["is_sensor"], dtype=np.uint32)
    neuron = (
        (np.asarray(fields["tag"], dtype=np.uint32) << 12)
        | (np.asarray(fields["dy4"], dtype=np.uint32) << 8)
        | (np.asarray(fields["dx4"], dtype=np.uint32) << 4)
        | np.asarray(fields["cores"], dtype=np.uint32)
    )
    sensor = (
        (np.uint32(1) << np.uint32(23))
        | (np.asarray(fields["pol"], dtype=np.uint32) << 22)
        | (np.asarray(fields["pixel_y"], dtype=np.uint32) << 13)
        | (np.asarray(fields["pixel_x"], dtype=np.uint32) << 4)
        | (np.asarray(fields["dy2"], dtype=np.uint32) << 2)
        | np.asarray(fields["dx2"], dtype=np.uint32)
    )
    return np.where(is_sensor.astype(bool), sensor, neuron).astype(np.uint32)


def _signed_from_raw(raw: np.ndarray, bits: int) -> np.ndarray:
    mag = raw & ((1 << (bits - 1)) - 1)
    sign = raw >> (bits - 1)
    return np.where(sign.astype(bool), -mag, mag).astype(np.int32)


# ---------------------------------------------------------------------------
# Source mapping and routing decisions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SramEntry:
    """One outgoing source-mapping slot of a neuron."""

    tag: int = 0
    dx: int = 0
    dy: int = 0
    cores: int = 0

    def __post_init__(self) -> None:
        if not 0 <= self.tag <= 0x7FF:
            raise EncodingError(f"tag out of range [0, 2047]: {self.tag}")
        if abs(self.dx) > 7 or abs(self.dy) > 7:
            raise EncodingError(f"displacement out of range [-7, 7]: ({self.dx}, {self.dy})")
        if not 0 <= self.cores <= 0xF:
            raise EncodingError(f"cores mask out of range [0, 15]: {self.cores}")


def fan_out(srams: tuple[SramEntry, ...] | list[SramEntry]) -> list[InterNeuronEvent]:
    """Words a spiking neuron emits, in slot order; cores == 0 slots emit nothing."""
    words = []
    for entry in srams:
        if entry.cores == 0:
            continue
        words.append(
            InterNeuronEvent(
                tag=entry.tag,
                dy=Displacement.from_value(entry.dy),
                dx=Displacement.from_value(entry.dx),
                cores=entry.cores,
            )
        )
    return words


class Direction(Enum):
    LOCAL = "local"
    WEST = "west"
    EAST = "east"
    SOUTH = "south"
    NORTH = "north"


def route_decision(dx: int, dy: int) -> Direction:
    """Top-level router rule: x displacement first, then y."""
    if dx < 0:
        return Direction.WEST
    if dx > 0:
        return Direction.EAST
    if dy < 0:
        return Direction.SOUTH
    if dy > 0:
        return Direction.NORTH
    return Direction.LOCAL


_STEP = {
    Direction.WEST: (-1, 0),
    Direction.EAST: (1, 0),
    Direction.SOUTH: (0, -1),
    Direction.NORTH: (0, 1),
}


def direction_step(direction: Direction) -> tuple[int, int]:
    """Unit grid offset of a forwarding direction."""
    return _STEP[direction]


def forward_displacements(
    dx: Displacement, dy: Displacement, direction: Direction
) -> tuple[Displacement, Displacement]:
    """Displacements carried by the word after one hop in ``direction``."""
    if direction in (Direction.WEST, Direction.EAST):
        return replace(dx, magnitude=dx.magnitude - 1), dy
    if direction in (Direction.SOUTH, Direction.NORTH):
        return dx, replace(dy, magnitude=dy.magnitude - 1)
    return dx, dy


def mux_soma_of(neuron_index: int, de_mux: bool) -> int:
    """Soma that receives a neuron's dendritic output.

    With four-neuron multiplexing on, the two-by-two blocks of the 16 x 16
    array share the top-left soma; off, every neuron drives its own.
    """
    if not 0 <= neuron_index <= 255:
        raise EncodingError(f"neuron index out of range [0, 255]: {neuron_index}")
    if not de_mux:
        return neuron_index
    row, col = divmod(neuron_index, 16)
    return (row - row % 2) * 16 + (col - col % 2)
