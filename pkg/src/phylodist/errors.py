"""Exception hierarchy shared across the package.

The CLI maps these onto distinct exit codes: ConfigError -> 2,
DataError -> 3, NumericError -> 4.
"""


class PhylodistError(Exception):
    """Base class for all package errors."""


class ConfigError(PhylodistError):
    """Invalid parameter values or inconsistent configuration."""


class DataError(PhylodistError):
    """Malformed input data (files, matrices, alignments, trees)."""


class NewickError(DataError):
    """Newick syntax error; carries the byte offset of the failure."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte {offset})"
        super().__init__(message)
        self.offset = offset


class NumericError(PhylodistError):
    """Numerical failure: saturation, divergence, singular matrices."""


class SaturationError(NumericError):
    """A distance correction formula left its domain and the policy is Error."""


class TrainingDiverged(NumericError):
    """Loss became non-finite during optimization."""

    def __init__(self, epoch, batch, param_norm):
        super().__init__(
            f"non-finite loss at epoch {epoch}, batch {batch} "
            f"(parameter norm {param_norm:.6g})"
        )
        self.epoch = epoch
        self.batch = batch
        self.param_norm = param_norm
