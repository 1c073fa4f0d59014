"""Exception types shared across the package.

The CLI maps these onto exit codes: usage problems exit 1, data and
validation problems exit 2, training divergence exits 3.
"""


class TermNormError(Exception):
    """Base class for errors raised by this package."""


class FileFormatError(TermNormError):
    """A data file failed to parse or violated its schema."""

    def __init__(self, message: str, path=None, line: int | None = None):
        self.path = path
        self.line = line
        prefix = ""
        if path is not None:
            prefix = str(path)
            if line is not None:
                prefix += f":{line}"
            prefix += ": "
        super().__init__(prefix + message)


class UnknownIdError(TermNormError):
    """An identifier was not found where the schema requires it to exist."""


class ConfigError(TermNormError):
    """A configuration file or option set is invalid."""


class UsageError(TermNormError):
    """Command line arguments are malformed."""


class TrainingDivergedError(TermNormError):
    """A training loss became non-finite.

    Carries enough context to reproduce: the phase label, epoch and batch
    index at failure, the offending loss value, and the learning rate.
    """

    def __init__(self, phase: str, epoch: int, batch: int, loss: float,
                 learning_rate: float):
        self.phase = phase
        self.epoch = epoch
        self.batch = batch
        self.loss = loss
        self.learning_rate = learning_rate
        super().__init__(
            f"training diverged in phase {phase!r} at epoch {epoch}, "
            f"batch {batch}: loss={loss!r}, learning_rate={learning_rate}"
        )
