"""Exception hierarchy for the basilgrow toolkit.

Every error raised on purpose derives from :class:`BasilgrowError` so the
command line layer can map failures onto its exit codes without touching
tracebacks from genuine bugs.
"""


class BasilgrowError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(BasilgrowError):
    """Operands have incompatible dimensions; message names both shapes."""


class SchemaError(BasilgrowError):
    """Input table is missing a required column or has a malformed header."""


class EmptyDatasetError(BasilgrowError):
    """Cleaning dropped every row, leaving nothing to train on."""


class ConfigError(BasilgrowError):
    """A configuration value is out of range or internally inconsistent."""


class SingularMatrixError(BasilgrowError):
    """Normal equations are rank deficient.

    ``column`` holds the index of the pivot column where elimination
    failed, so callers can name the offending feature.
    """

    def __init__(self, message: str, column: int | None = None):
        super().__init__(message)
        self.column = column


class TrainingDivergedError(BasilgrowError):
    """Loss became non-finite during training.

    Carries enough context (epoch, learning rate, last gradient norm) to
    diagnose the divergence without re-running.
    """

    def __init__(self, epoch: int, lr: float, grad_norm: float):
        super().__init__(
            f"training diverged at epoch {epoch}: loss is not finite "
            f"(lr={lr}, last gradient norm={grad_norm:.6g})"
        )
        self.epoch = epoch
        self.lr = lr
        self.grad_norm = grad_norm


class CheckpointError(BasilgrowError):
    """Checkpoint file has an unknown format version or a broken payload."""


class ArtifactMismatchError(BasilgrowError):
    """Artifacts being combined were produced from different datasets."""
