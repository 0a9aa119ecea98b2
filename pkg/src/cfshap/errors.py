"""Exception types shared across the package.

Input errors (malformed files, schema violations) exit the CLI with code 1;
domain errors (valid inputs for which the requested computation is not
defined) exit with code 2.
"""


class CfshapError(Exception):
    """Base class for all library errors."""

    exit_code = 2

    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location

    def to_json(self):
        return {
            "code": type(self).__name__,
            "message": str(self),
            "location": self.location,
        }


class InputError(CfshapError):
    """A file or argument could not be read or parsed."""

    exit_code = 1


# -- ingestion / parsing ----------------------------------------------------

class ParseError(InputError):
    pass


class MissingColumn(InputError):
    pass


class NonBinaryLabel(InputError):
    pass


class SchemaError(InputError):
    pass


class UnsupportedFeature(InputError):
    pass


# -- domain -----------------------------------------------------------------

class DimensionMismatch(CfshapError):
    pass


class EmptyDataset(CfshapError):
    pass


class MissingLabels(CfshapError):
    pass


class SingleClassDataset(CfshapError):
    pass


class EmptyBackground(CfshapError):
    pass


class TooManyFeatures(CfshapError):
    pass


class NoRowsInClass(CfshapError):
    pass


class NoCounterfactualPool(CfshapError):
    pass


class NotACounterfactual(CfshapError):
    pass


class EmptyActionSubset(CfshapError):
    pass


class PoolTooSmall(CfshapError):
    pass


class LengthMismatch(CfshapError):
    pass


class NoRejectedSamples(CfshapError):
    pass
