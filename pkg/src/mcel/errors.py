"""Exception types shared across the package."""


class McelError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(McelError, ValueError):
    """Shapes of the supplied arrays are incompatible."""


class SingularScatterError(McelError):
    """Within-class scatter (plus ridge) is not positive definite.

    Usually means too few samples per class for the feature dimension;
    increase the ridge term.
    """


class DataFormatError(McelError, ValueError):
    """A file could not be parsed; message names the offending line/offset."""


class TrainingDivergedError(McelError):
    """Loss became non-finite during training."""

    def __init__(self, epoch, batch, message=None):
        self.epoch = epoch
        self.batch = batch
        super().__init__(
            message or f"training diverged at epoch {epoch}, batch {batch}"
        )
