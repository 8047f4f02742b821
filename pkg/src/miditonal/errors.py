"""Exception hierarchy shared across the package."""


class MiditonalError(Exception):
    """Base class for every error raised by this package."""


class MidiError(MiditonalError, ValueError):
    """Raised when a Standard MIDI File cannot be decoded."""


class MalformedVlq(MidiError):
    pass


class BadHeader(MidiError):
    pass


class BadChunk(MidiError):
    pass


class UnsupportedDivision(MidiError):
    pass


class UnsupportedFormat(MidiError):
    pass


class EmptyCloud(MiditonalError, ValueError):
    pass


class NoNotes(MiditonalError, ValueError):
    pass


class EmptyTrack(MiditonalError, ValueError):
    pass


class DegenerateData(MiditonalError, ValueError):
    pass


class DimensionMismatch(MiditonalError, ValueError):
    pass


class BadModelFile(MiditonalError, ValueError):
    pass
