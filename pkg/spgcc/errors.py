"""Exception tree shared by every stage; each error carries a stable code and CLI exit code."""


class SpgccError(Exception):
    code: str = "error"
    exit_code: int = 1


class ShapeError(SpgccError, ValueError):
    code = "dimension_mismatch"
    exit_code = 2


class ParameterError(SpgccError, ValueError):
    code = "invalid_parameter"
    exit_code = 2


class ConfigError(SpgccError, ValueError):
    code = "invalid_config"
    exit_code = 2


class GradientError(SpgccError, RuntimeError):
    code = "gradient"


class FormatError(SpgccError, ValueError):
    """A binary artifact could not be decoded."""
    code = "invalid_payload"
    exit_code = 2


class BadMagicError(FormatError):
    code = "bad_magic"


class TruncatedPayloadError(FormatError):
    code = "truncated_payload"


class DimensionMismatchError(FormatError):
    code = "dimension_mismatch"


class LabelRangeError(FormatError):
    code = "label_range"


class MissingArtifactError(SpgccError, FileNotFoundError):
    code = "missing_artifact"
    exit_code = 3

    def __init__(self, artifact: str, producer: str) -> None:
        super().__init__(f"{artifact} not found: run {producer} first")
        self.artifact = artifact
        self.producer = producer
