"""Exception types shared across the package."""


class KeybufError(Exception):
    """Base class for all package errors."""


class NonNormalized(KeybufError):
    """A probability table does not sum to 1 within tolerance."""


class AlphabetTooLarge(KeybufError):
    """Exhaustive grid search over the input simplex would be too expensive."""


class SymbolOutOfRange(KeybufError):
    """A channel input symbol is outside the input alphabet."""


class BudgetExceeded(KeybufError):
    """An exhaustive enumeration would exceed the configured budget."""

    def __init__(self, message, size=None):
        super().__init__(message)
        self.size = size


class MessageOutOfRange(KeybufError):
    """Message index is not a valid bin of the codebook."""


class LengthMismatch(KeybufError):
    """Bit-sequence lengths do not agree."""


class DimensionMismatch(KeybufError):
    """Matrix/vector dimensions do not agree."""


class NonMonotoneSlot(KeybufError):
    """Key buffer pushes must carry strictly increasing slot indices."""


class Underflow(KeybufError):
    """More key bits requested than the buffer holds (key starvation)."""


class OverlappingGroups(KeybufError):
    """Variable groups passed to a mutual-information query are not disjoint."""


class SeparationViolated(KeybufError):
    """Key-age separation precondition fails: a window slot uses a key drawn
    from inside the window."""


class ConfigError(KeybufError):
    """Config file cannot be parsed or is semantically invalid."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
