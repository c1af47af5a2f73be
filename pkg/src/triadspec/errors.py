"""Exception and warning types shared across the package."""


class TriadspecError(Exception):
    """Base class for all triadspec errors."""


class ParameterError(TriadspecError, ValueError):
    """A parameter or input value is out of its documented range."""


class InsufficientDataError(TriadspecError, ValueError):
    """The input is too short for the requested analysis."""


class ScaleError(TriadspecError):
    """A grid is in the wrong scale for the requested operation."""


class MalformedInputError(TriadspecError, ValueError):
    """Structurally invalid input, e.g. mismatched component lengths."""


class BoundaryGapError(TriadspecError):
    """A gap touches the series boundary and cannot be interpolated."""


class RateMismatchError(TriadspecError):
    """Sample rates or sample phases disagree across sensors."""


class NoOverlapError(TriadspecError):
    """The three series share no common time support."""


class ResolutionMismatchError(TriadspecError):
    """Spectrogram frequency resolutions differ."""


class ShapeMismatchError(TriadspecError):
    """Grids have incompatible shapes."""


class UndefinedShareError(TriadspecError):
    """Luminance shares are undefined because the image carries no power."""


class AliasingError(TriadspecError, ValueError):
    """An injected tone sits at or above the Nyquist frequency."""


class FormatError(TriadspecError, ValueError):
    """A text input (triad CSV or scenario file) failed to parse.

    ``line`` carries the 1-based offending line number when known.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class PipelineStageError(TriadspecError):
    """A pipeline stage failed; ``stage`` names the stage, the original
    error is chained as ``__cause__``."""

    def __init__(self, stage, cause):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage


class DegenerateNormalizationWarning(UserWarning):
    """A constant spectrogram was normalised; the channel renders dark."""
