"""Exception hierarchy shared across the pipeline.

The CLI maps these onto exit codes: usage problems exit 1, ``DataError``
subclasses exit 2, anything else exits 3.
"""


class CosmoError(Exception):
    """Base class for all toolkit errors."""


class DataError(CosmoError):
    """Bad input data: malformed files, schema violations, empty results."""


class LogParseError(DataError):
    """The raw log file could not be parsed."""


class LogSchemaError(DataError):
    """The log parsed but is missing mandatory attributes."""


class ConsistencyError(DataError):
    """A constraint edit set is contradictory."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__(
            "contradictory constraint set: " + "; ".join(str(v) for v in self.violations)
        )


class FingerprintMismatchError(DataError):
    """A checkpoint and a constraint universe do not belong together."""


class CheckpointError(DataError):
    """A checkpoint file is corrupted or has an unsupported version."""


class TrainingDivergedError(CosmoError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch, last_stable_epoch):
        self.epoch = epoch
        self.last_stable_epoch = last_stable_epoch
        super().__init__(
            f"loss became non-finite at epoch {epoch}; "
            f"last stable epoch was {last_stable_epoch}"
        )
