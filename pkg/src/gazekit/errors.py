"""Exception hierarchy shared across the pipeline stages."""


class PipelineError(Exception):
    """Base class for all errors raised by gazekit stages."""


class ManifestError(PipelineError):
    """Session manifest is malformed or references missing files."""


class FormatError(PipelineError):
    """A data file violates its format contract.

    Carries the offending path and, when known, the 1-based row number so
    callers can point at the exact input line.
    """

    def __init__(self, message: str, path=None, row: int | None = None):
        location = ""
        if path is not None:
            location = f"{path}"
            if row is not None:
                location += f":{row}"
            location = f" [{location}]"
        super().__init__(message + location)
        self.path = path
        self.row = row


class SyncError(PipelineError):
    """Lag estimation or track rewriting cannot proceed."""


class BackendError(PipelineError):
    """An annotation backend failed to produce a response."""


class StateError(PipelineError):
    """A pipeline state directory is missing or inconsistent."""


class LoadWarning(UserWarning):
    """Non-fatal irregularity noticed while loading a data file."""
