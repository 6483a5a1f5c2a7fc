"""Exception types raised across the package."""


class ShapeError(ValueError):
    """Operand shapes are incompatible with the requested operation."""


class ContractError(ValueError):
    """A precondition of an operation was violated."""


class NumericError(ArithmeticError):
    """A computation produced non-finite values."""


class GenerationError(RuntimeError):
    """Problem generation failed after exhausting its retry budget."""


class FormatError(ValueError):
    """A dataset or checkpoint file is malformed."""


class ConfigMismatchError(ValueError):
    """A checkpoint was produced under a different model configuration."""


class TrainingDiverged(RuntimeError):
    """Training hit a non-finite loss. ``dump_path`` points at the diagnostic dump."""

    def __init__(self, message, dump_path=None):
        super().__init__(message)
        self.dump_path = dump_path
