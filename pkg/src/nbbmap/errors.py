"""Exception hierarchy shared by every nbbmap module."""


class NBBError(Exception):
    """Base class for all nbbmap errors."""


class RangeError(NBBError, IndexError):
    """A coordinate lies outside its index space."""


class DomainError(NBBError, ValueError):
    """An argument is well-formed but outside the function's domain."""


class ShapeError(NBBError, ValueError):
    """Array dimensions do not match the expected geometry."""


class CapacityError(NBBError, ValueError):
    """A value does not fit into a fixed-size container (e.g. a fragment)."""


class ConfigError(NBBError, ValueError):
    """An invalid or unsupported configuration."""


class ResourceError(NBBError, MemoryError):
    """A request exceeds the configured memory/size budget."""


class LaunchError(NBBError, RuntimeError):
    """A kernel raised during a launch.

    ``block`` and ``thread`` locate the failing work item when the engine can
    recover them; both are ``None`` otherwise.
    """

    def __init__(self, message, block=None, thread=None):
        super().__init__(message)
        self.block = block
        self.thread = thread
