"""Exception hierarchy shared by all modules.

Every error carries a short machine-parseable ``category`` used by the CLI
to pick an exit code and emit a one-line diagnostic.
"""


class ToolkitError(Exception):
    category = "internal"


class ConfigError(ToolkitError):
    """Invalid configuration value or unknown configuration key."""

    category = "config"


class FormatError(ToolkitError):
    """Structurally malformed data (ragged rows, bad header, empty channels)."""

    category = "data"


class ParseError(ToolkitError):
    """A cell that should be numeric (or an id) failed to parse."""

    category = "data"


class LabelError(ToolkitError):
    """Missing or unrecognized label value."""

    category = "data"


class SplitError(ToolkitError):
    """A requested partition would leave a split empty."""

    category = "data"


class FeatureError(ToolkitError):
    """Input sequence does not satisfy a feature's preconditions."""

    category = "data"


class MaskError(ToolkitError):
    """Mask specification is invalid for the given series."""

    category = "data"


class ReportError(ToolkitError):
    """A salient point references a channel or index that does not exist."""

    category = "data"


class ShapeError(ToolkitError):
    """Architecture/input shape mismatch."""

    category = "model"


class CheckpointError(ToolkitError):
    """Unreadable, truncated or version-incompatible checkpoint file."""

    category = "model"


class ChecksumError(CheckpointError):
    """Checkpoint payload does not match its recorded CRC."""

    category = "model"


class TrainingError(ToolkitError):
    """Training diverged (non-finite loss)."""

    category = "train"


EXIT_CODES = {
    "config": 2,
    "data": 3,
    "model": 4,
    "train": 5,
    "io": 6,
    "internal": 1,
}
