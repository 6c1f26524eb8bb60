class DriftBenchError(Exception):
    """
    Base class for all exceptions.
    """

    pass


class SpecificationError(DriftBenchError, ValueError):
    """
    An Exception occurred when arguments, shapes or specs are invalid.
    """

    pass


class ParseError(SpecificationError):
    """
    An Exception occurred when a line of a text dataset could not be parsed.
    """

    def __init__(self, message: str, line_no: int = 0):
        super().__init__(f"line {line_no}: {message}" if line_no else message)
        self.line_no = line_no


class RangeError(SpecificationError):
    """
    An Exception occurred when an index or a month is out of range.
    """

    pass


class FormatError(SpecificationError):
    """
    An Exception occurred when a value has an unknown format.
    """

    pass


class EncodeError(DriftBenchError):
    """
    An Exception occurred when an encoding process failed.
    """

    pass


class DecodeError(DriftBenchError):
    """
    An Exception occurred when a decoding process failed.
    """

    pass


class UnsupportedFormatError(DecodeError):
    """
    An Exception occurred when a file has unknown magic bytes or version.
    """

    pass


class CorruptionError(DecodeError):
    """
    An Exception occurred when a file is truncated or inconsistent.
    """

    pass


class NumericError(DriftBenchError, ArithmeticError):
    """
    An Exception occurred when a computation produced NaN or Inf.
    """

    pass


class UsageError(DriftBenchError):
    """
    An Exception occurred when an API or a command was used incorrectly.
    """

    pass


class TrainingError(DriftBenchError):
    """
    An Exception occurred when a model could not be trained.
    """

    pass


class UnsupportedOperationError(DriftBenchError):
    """
    An Exception occurred when a model kind does not support an operation.
    """

    pass


class SamplingError(DriftBenchError):
    """
    An Exception occurred when a batch could not be sampled.
    """

    pass


class SelectionError(DriftBenchError):
    """
    An Exception occurred when active learning samples could not be selected.
    """

    pass


class SearchError(DriftBenchError):
    """
    An Exception occurred when a hyperparameter search failed.
    """

    pass


class RunError(DriftBenchError):
    """
    An Exception occurred during an experiment run. The message carries the
    month or trial context.
    """

    pass
