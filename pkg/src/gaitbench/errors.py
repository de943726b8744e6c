"""Error types raised across the package.

Each class maps to one failure family so callers (and the CLI) can translate
them into distinct exit codes without string matching.
"""


class GaitbenchError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(GaitbenchError):
    """A value object violates one of its invariants."""


class DataFormatError(GaitbenchError):
    """On-disk dataset is missing, incomplete, or malformed."""


class DegenerateWaveformError(GaitbenchError):
    """A waveform lacks the landmarks a feature extractor needs."""

    def __init__(self, message, subject_id=None, session=None, trial=None, foot=None):
        self.subject_id = subject_id
        self.session = session
        self.trial = trial
        self.foot = foot
        ident = ""
        if subject_id is not None:
            ident = f" (subject={subject_id} session={session} trial={trial} foot={foot})"
        super().__init__(message + ident)


class UnsupportedCombinationError(GaitbenchError):
    """The requested preprocessing combination is not executable."""


class StoreError(GaitbenchError):
    """The result store is unreadable or inconsistent."""
