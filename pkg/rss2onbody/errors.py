from typing import Optional


class Rss2OnBodyError(Exception):
    exit_code: int = 1


class MissingInputError(Rss2OnBodyError, FileNotFoundError):
    exit_code = 3


class FormatVersionError(Rss2OnBodyError, ValueError):
    """A file or config document carries an unsupported version / magic"""

    exit_code = 4


class ChecksumError(Rss2OnBodyError, ValueError):
    exit_code = 4


class InvalidConfigError(Rss2OnBodyError, ValueError):
    exit_code = 5


class ShapeMismatchError(Rss2OnBodyError, ValueError):
    exit_code = 5


class SearchSpaceTooLargeError(Rss2OnBodyError, ValueError):
    exit_code = 5

    def __init__(self, size: int, bound: int):
        super().__init__(
            f"Exhaustive search over {size} candidate extractors exceeds the bound of {bound}"
        )
        self.size = size
        self.bound = bound


class TraceParseError(Rss2OnBodyError, ValueError):
    exit_code = 6

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class TraceTooShortError(Rss2OnBodyError, ValueError):
    exit_code = 6


class InsufficientLabelsError(Rss2OnBodyError, ValueError):
    exit_code = 6


class UndefinedRateError(Rss2OnBodyError, ValueError):
    """TP rate without on-body samples or FP rate without off-body samples"""

    exit_code = 6


class NonFiniteGradientError(Rss2OnBodyError, ArithmeticError):
    exit_code = 7

    def __init__(self, param_id: str):
        super().__init__(f"Non-finite gradient for parameter {param_id}")
        self.param_id = param_id


class TrainingDivergedError(Rss2OnBodyError, ArithmeticError):
    exit_code = 7

    def __init__(self, message: str, epoch: int, batch: Optional[int] = None):
        where = f"epoch {epoch}" + (f", batch {batch}" if batch is not None else "")
        super().__init__(f"{message} ({where})")
        self.epoch = epoch
        self.batch = batch
