"""Behavioral emulator of a multi-core mixed-signal spiking neural network processor."""

__version__ = "0.1.0"
