class GraphSmileError(Exception):
    exit_code = 1


class ConfigError(GraphSmileError):
    exit_code = 2


class DataError(GraphSmileError):
    exit_code = 3


class ParseError(DataError):
    pass


class SchemaError(DataError):
    pass


class VocabularyError(DataError):
    pass


class RangeError(DataError, ValueError):
    pass


class LabelingError(DataError):
    pass


class ShapeError(GraphSmileError, ValueError):
    pass


class NumericError(GraphSmileError):
    """Raised when training produces a non-finite loss."""

    exit_code = 4
