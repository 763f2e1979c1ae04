"""Exception types shared across the package."""


class PDAugmentError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(PDAugmentError):
    """Input file is not in a supported format (bad header, bad encoding)."""


class UnsupportedChannelError(FormatError):
    """Audio has more than one channel; we refuse to downmix silently."""


class MidiParseError(FormatError):
    """Standard MIDI file could not be parsed.

    Carries ``offset``, the byte position at which parsing failed.
    """

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class EmptyScoreError(PDAugmentError):
    """MIDI file contains no usable melodic notes."""


class InsufficientNotesError(PDAugmentError):
    """Note sequence is shorter than the requested window."""


class ValidationError(PDAugmentError):
    """Structured input violates a documented invariant."""


class UnsyllabifiableError(ValidationError):
    """Phoneme tier contains no vowel, so no syllable can be formed."""


class AnalysisError(PDAugmentError):
    """Signal is unsuitable for vocoder analysis (e.g. too short)."""


class ConsistencyError(PDAugmentError):
    """Two inputs that must share a frame grid or span do not."""
