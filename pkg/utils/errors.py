"""Exception hierarchy shared by every layer of the toolkit.

The CLI maps any ``ProsodyError`` to exit code 1 with a one-line diagnostic. Value-like
errors also subclass ``ValueError`` and IO-like errors ``OSError`` so callers that only know
the builtin types still catch them.
"""


class ProsodyError(Exception):
    """Base class for toolkit errors."""


# --- signal-io ------------------------------------------------------------

class MalformedWavError(ProsodyError, ValueError):
    """RIFF/WAVE header or chunk layout could not be parsed."""


class UnsupportedFormatError(ProsodyError, ValueError):
    """Valid WAV but not 16-bit PCM mono at the pipeline sample rate."""


class ProsodyIOError(ProsodyError, OSError):
    """File could not be written or read."""


class EmptySignalError(ProsodyError, ValueError):
    pass


class InvalidSpecError(ProsodyError, ValueError):
    """Synthetic spec, manifest, or override violates its invariants."""


# --- dsp-engine -----------------------------------------------------------

class BadLengthError(ProsodyError, ValueError):
    pass


class OutOfRangeError(ProsodyError, ValueError):
    pass


class SignalTooShortError(ProsodyError, ValueError):
    pass


class BadRatioError(ProsodyError, ValueError):
    pass


class OverlappingSpansError(ProsodyError, ValueError):
    pass


class SpanOutOfBoundsError(ProsodyError, ValueError):
    pass


class UnvoicedError(ProsodyError, ValueError):
    """Autocorrelation peak below the voicing threshold."""


# --- grad-core ------------------------------------------------------------

class ShapeMismatchError(ProsodyError, ValueError):
    pass


class NonFiniteError(ProsodyError, ArithmeticError):
    """A primitive produced NaN or Inf."""


class NotScalarError(ProsodyError, ValueError):
    pass


# --- mask-salience / rl-policy --------------------------------------------

class TooLongError(ProsodyError, ValueError):
    """Brute-force enumeration requested for too many frames."""


class LengthMismatchError(ProsodyError, ValueError):
    pass


class EmptyCorpusError(ProsodyError, ValueError):
    pass


class NoSegmentsError(ProsodyError):
    """No salient segment survived extraction for an utterance."""


__all__ = [
    "ProsodyError",
    "MalformedWavError",
    "UnsupportedFormatError",
    "ProsodyIOError",
    "EmptySignalError",
    "InvalidSpecError",
    "BadLengthError",
    "OutOfRangeError",
    "SignalTooShortError",
    "BadRatioError",
    "OverlappingSpansError",
    "SpanOutOfBoundsError",
    "UnvoicedError",
    "ShapeMismatchError",
    "NonFiniteError",
    "NotScalarError",
    "TooLongError",
    "LengthMismatchError",
    "EmptyCorpusError",
    "NoSegmentsError",
]
