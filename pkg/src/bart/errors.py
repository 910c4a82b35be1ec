"""Exception types shared across the package."""


class BartError(Exception):
    """Base class for all errors raised by this package."""


class StructuralEditError(BartError):
    """A tree edit was applied to a node that does not satisfy its precondition."""


class InvalidTreeError(BartError):
    """A tree is inconsistent with the dataset it is evaluated against."""


class DegenerateResponseError(BartError):
    """The response carries no usable variation (constant, or perfectly fit)."""


class DegenerateLabelsError(BartError):
    """Binary classification was requested but only one class is present."""


class DataError(BartError):
    """A data file could not be parsed into a valid dataset."""


class SchemaError(BartError):
    """Prediction data does not match the columns the model was trained on."""


class ModelParseError(BartError):
    """A model file is malformed or truncated."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ModelVersionError(ModelParseError):
    """A model file declares a format version this library does not read."""
