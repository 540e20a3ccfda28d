"""Exception types shared across the emulator."""


class SpikesocError(Exception):
    """Base class for all emulator errors."""


class ConfigError(SpikesocError, ValueError):
    """A configuration value is out of range or inconsistent."""


class DomainError(SpikesocError, ValueError):
    """A numeric argument is outside the physical domain of an operation."""


class EncodingError(SpikesocError, ValueError):
    """An event word field does not fit its bit layout."""


class ResourceError(SpikesocError, ValueError):
    """A network cannot be placed within the hardware resource limits."""
