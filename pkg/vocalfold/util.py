"""Module containing various utility definitions.

In particular, the pydantic :class:`BaseModel` every config and report derives from, the exception classes, and the
:class:`ProgressUi` protocol long running operations report to.
"""
from pathlib import Path
from tempfile import TemporaryDirectory
from traceback import format_exception
from typing import Any, Protocol, Self

from pydantic import BaseModel as PydanticBaseModel, ConfigDict, ValidationError as PydanticValidationError


class BaseModel(PydanticBaseModel):
    """Base class for all pydantic models."""

    model_config = ConfigDict(extra="forbid", from_attributes=True, hide_input_in_errors=True)


class VocalfoldBaseException(Exception):
    """Base exception class for errors used by the vocalfold package."""

    def __init__(self, message: str, *, detail: str | list[str] | list[dict[str, Any]] | None = None) -> None:
        """Base exception class for errors used by the vocalfold package.

        Args:
            message: Simple error message that can always be displayed. Names the offending file or parameter.
            detail: More detailed error message, e.g. the underlying exception's text.
        """
        self.message = message
        self.detail = detail
        super().__init__(message)


class AudioError(VocalfoldBaseException):
    """Indicates that an audio file could not be read."""


class AudioFileNotFound(AudioError):
    """The audio file does not exist."""


class UnsupportedEncoding(AudioError):
    """The audio file is not uncompressed integer PCM at a supported bit depth."""


class MalformedHeader(AudioError):
    """The RIFF/WAVE structure of the file is broken or inconsistent."""


class EmptyAudioData(AudioError):
    """The file's data chunk holds no samples."""


class SignalError(VocalfoldBaseException):
    """Indicates that a signal violates the preconditions of an operation."""


class SpectralError(VocalfoldBaseException):
    """Indicates that a spectral transform or filterbank could not be computed."""


class WaveletError(VocalfoldBaseException):
    """Indicates that a wavelet packet operation received invalid input."""


class FeatureError(VocalfoldBaseException):
    """Indicates that a feature vector or dataset is invalid."""


class ExtractionError(FeatureError):
    """Indicates that no file of a batch could be turned into features."""


class PcaError(VocalfoldBaseException):
    """Indicates that a PCA model could not be fitted or applied."""


class AnnError(VocalfoldBaseException):
    """Indicates that the neural network received invalid input."""


class TrainingDiverged(AnnError):
    """The training loss stopped being a finite number."""

    def __init__(self, message: str, *, epoch: int, detail: str | None = None) -> None:
        """The training loss stopped being a finite number.

        Args:
            message: Simple error message that can always be displayed.
            epoch: Index of the epoch whose loss was not finite.
            detail: More detailed error message.
        """
        self.epoch = epoch
        super().__init__(message, detail=detail)


class SynthError(VocalfoldBaseException):
    """Indicates that synthetic data could not be generated or written."""


class EvaluationError(VocalfoldBaseException):
    """Indicates that a cross-validation experiment cannot be run."""


class EncodingError(VocalfoldBaseException):
    """Indicates that a CSV, manifest or model file could not be encoded or decoded properly."""


class ParameterError(VocalfoldBaseException):
    """Indicates that a user supplied parameter is out of range."""


class ExceptionInfo(BaseModel):
    """Details about an exception that was raised."""

    type: str
    message: str
    detail: str | list[str] | list[dict[str, Any]] | None = None

    @classmethod
    def from_exception(cls, error: Exception) -> Self:
        """Constructs an instance from a raised exception."""
        if isinstance(error, VocalfoldBaseException):
            return cls(
                type=error.__class__.__name__,
                message=error.message,
                detail=error.detail,
            )
        elif isinstance(error, PydanticValidationError):
            return cls(
                type=error.__class__.__name__,
                message=str(error),
                detail=str(error.errors(include_input=True, include_url=False)),
            )
        else:
            return cls(
                type=error.__class__.__name__,
                message="Unknown exception occurred.",
                detail=format_exception(error),
            )


class ProgressUi(Protocol):
    """Interface long running operations use to report their progress.

    Every method has a no-op default, so implementations only need to override what they display.
    """

    def start_task(self, name: str, total: int) -> None:
        """Announces a task consisting of `total` steps."""
        return

    def advance(self, name: str) -> None:
        """Informs the ui that one step of the task has been completed."""
        return

    def finish_task(self, name: str) -> None:
        """Informs the ui that the task is done."""
        return


class EmptyUi(ProgressUi):
    """A dummy Ui."""


class TempDir(TemporaryDirectory):
    """Python's `TemporaryDirectory` but with a contextmanager returning a Path."""

    def __enter__(self) -> Path:
        return Path(super().__enter__())
