"""Exception types raised by the library."""


class MfgError(Exception):
    """Base class for library errors."""


class InvalidInputError(MfgError, ValueError):
    """Malformed input: wrong shapes, non-distributions, out-of-range parameters."""


class UnsupportedSettingError(MfgError):
    """The quantity is not defined for this game (e.g. an L_P=0-only proxy on a coupled kernel)."""


class PreconditionError(MfgError):
    """A mathematical precondition of the operation does not hold."""
