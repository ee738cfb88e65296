"""Exception hierarchy shared by every module.

Each class carries the process exit code the CLI reports for it.
"""


class HyperforecastError(Exception):
    """Base class for all expected failures."""
    exit_code = 1


# ── Tensor engine ───────────────────────────────────────────────────────────

class ShapeMismatch(HyperforecastError):
    pass


class NonFiniteValue(HyperforecastError):
    pass


class DomainError(HyperforecastError):
    pass


class NotScalar(HyperforecastError):
    pass


class DetachedTensor(HyperforecastError):
    pass


# ── Model ───────────────────────────────────────────────────────────────────

class ZeroNormEmbedding(HyperforecastError):
    pass


class InvalidTemperature(HyperforecastError):
    pass


class EmptyMask(HyperforecastError):
    pass


class ConfigError(HyperforecastError):
    exit_code = 2


# ── Data ────────────────────────────────────────────────────────────────────

class DataError(HyperforecastError):
    """Input file missing or unreadable."""
    exit_code = 3


class ParseError(DataError):
    def __init__(self, message, row=None, column=None):
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column!r}")
        super().__init__(f"{message} ({', '.join(loc)})" if loc else message)
        self.row = row
        self.column = column


class RaggedRows(DataError):
    pass


class TooShort(DataError):
    pass


class NormalizerScopeError(HyperforecastError):
    pass


# ── Training / evaluation ───────────────────────────────────────────────────

class Diverged(HyperforecastError):
    exit_code = 4

    def __init__(self, epoch, step, value):
        super().__init__(f"loss became non-finite ({value}) at epoch {epoch}, step {step}")
        self.epoch = epoch
        self.step = step


class EmptyEvaluation(HyperforecastError):
    pass


class CheckpointMismatch(HyperforecastError):
    exit_code = 5


class CheckpointFormatError(HyperforecastError):
    exit_code = 5
