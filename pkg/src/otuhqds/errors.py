"""Exception types shared across the package."""


class QdsError(Exception):
    """Base class for all package-specific errors."""


class LengthMismatchError(QdsError, ValueError):
    """Two bit strings that must have equal length do not."""


class OneTimeUseError(QdsError):
    """A one-shot object (hash instance, key bundle, pad) was used twice."""


class KeyExhaustedError(QdsError):
    """A key pool has fewer unconsumed bits than a draw requires."""


class RandomnessExhaustedError(QdsError):
    """A finite randomness tape ran out of bits."""


class ProtocolAbortError(QdsError):
    """The protocol must stop: authenticated-channel tamper was detected.

    Distinct from a signature verdict of "reject" -- an abort means the
    classical channel itself failed authentication.
    """


class NumericalDomainError(QdsError, ValueError):
    """A numeric routine was evaluated outside its valid domain."""
