"""Exception types shared across the pipeline."""

from __future__ import annotations


class PromptNilmError(Exception):
    """Base class for every error raised by this package."""


# --- ingest -----------------------------------------------------------------

class FileUnreadable(PromptNilmError):
    """A data file could not be opened or decoded."""


class ParseError(PromptNilmError):
    """A line in a data file violates the expected format."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EmptySeries(PromptNilmError):
    """A channel file yielded zero readings."""


class DuplicateChannel(PromptNilmError):
    """A labels file declares the same channel number twice."""

    def __init__(self, channel: int):
        self.channel = channel
        super().__init__(f"channel {channel} declared more than once")


class MissingChannel(PromptNilmError):
    """A layout references a channel with no file on disk."""

    def __init__(self, channel: int):
        self.channel = channel
        super().__init__(f"no channel file for declared channel {channel}")


# --- preprocess --------------------------------------------------------------

class EmptyGrid(PromptNilmError):
    """The requested resampling grid spans zero slots."""


class GridMismatch(PromptNilmError):
    """Series that must share a grid disagree on start, step, or length."""


class ArityMismatch(PromptNilmError):
    """Wrong number of mains channels for the declared region."""

    def __init__(self, region: str, count: int):
        self.region = region
        self.count = count
        super().__init__(f"region {region!r} expects a fixed mains count, got {count}")


class UnfilledGaps(PromptNilmError):
    """An operation that requires a gap-free series received gaps."""


# --- knowledge ---------------------------------------------------------------

class NoOnEvents(PromptNilmError):
    """Profile extraction found no ON activity for an appliance."""


# --- prompt ------------------------------------------------------------------

class ConfigMismatch(PromptNilmError):
    """Prompt inputs do not match the enabled prompt components."""


class LengthMismatch(PromptNilmError):
    """Paired sequences disagree in length."""


class UnparseablePrompt(PromptNilmError):
    """A prompt's structure could not be recovered by the round-trip parser."""


# --- client ------------------------------------------------------------------

class BackendError(PromptNilmError):
    """Base class for chat-completion backend failures."""


class AuthError(BackendError):
    """Missing or rejected API credentials."""


class RateLimited(BackendError):
    """Rate-limit responses persisted after all retries."""


class Timeout(BackendError):
    """The backend did not answer within the configured timeout."""


class TransportError(BackendError):
    """Network failure or unusable HTTP response."""


# --- driver ------------------------------------------------------------------

class ContextLongerThanWindow(PromptNilmError):
    """Requested context tail exceeds the predicted window length."""


# --- metrics / harness -------------------------------------------------------

class EmptyRun(PromptNilmError):
    """An evaluation produced no processed windows."""
