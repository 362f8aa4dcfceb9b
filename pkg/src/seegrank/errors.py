"""Exception hierarchy for the seegrank pipeline.

Everything raised on bad input or bad configuration derives from
:class:`SeegrankError`; the CLI maps these to exit code 2 (validation)
and everything else to exit code 3 (runtime).
"""


class SeegrankError(Exception):
    """Base class for all pipeline validation errors."""


# -- channel labels and montages ------------------------------------------

class MalformedLabel(SeegrankError):
    """Channel label text does not match ``<LETTERS><DIGITS>`` with digits >= 1."""


class InvertedRange(SeegrankError):
    """Range shorthand like ``LA3-1`` where the end precedes the start."""


class UnknownChannel(SeegrankError):
    """A channel label does not resolve against the montage or recording."""


class SchemaError(SeegrankError):
    """A JSON document does not match its documented schema."""


# -- ingestion -------------------------------------------------------------

class NonFiniteSample(SeegrankError):
    """Signal contains NaN or infinite samples."""


class AnnotationOutOfBounds(SeegrankError):
    """Seizure annotation lies outside the recording, or too close to its end."""


class NyquistViolation(SeegrankError):
    """Sampling rate too low for the configured analysis band."""


# -- signal processing -----------------------------------------------------

class BandOutOfRange(SeegrankError):
    """Bandpass edges violate 0 < low < high < fs/2, or bad filter order."""


class UnstableFilter(SeegrankError):
    """Designed IIR filter has a pole on or outside the unit circle."""


class FrameTooShort(SeegrankError):
    """Frame length is too small for the requested wavelet decomposition depth."""


# -- dataset assembly ------------------------------------------------------

class FrameCountMismatch(SeegrankError):
    """Per-channel feature blocks disagree on frame count."""


class EmptyDataset(SeegrankError):
    """No feature blocks / no frames to assemble."""


class SingleClassDataset(SeegrankError):
    """Training or splitting requires both classes present."""


# -- models and attribution ------------------------------------------------

class DimensionMismatch(SeegrankError):
    """Input vector width does not match the model's feature count."""


class DomainError(SeegrankError):
    """Argument outside the mathematical domain (e.g. coalition size >= n)."""


class TooManyPlayers(SeegrankError):
    """Exact subset enumeration refused; use the tree fast path or sampling."""


class EmptySequence(SeegrankError):
    """No frames to aggregate attributions over."""


# -- synthetic generation --------------------------------------------------

class SpecError(SeegrankError):
    """Synthetic recording spec is inconsistent."""
