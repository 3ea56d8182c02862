"""Exception hierarchy shared across the package."""


class MedbootError(Exception):
    """Base class for all errors raised by medboot."""


class DataError(MedbootError):
    """Malformed input file or invalid role assignment."""


class SingularDesign(MedbootError):
    pass


class TooFewRows(MedbootError):
    pass


class NegativeOperand(MedbootError):
    pass


class EmptyInput(MedbootError):
    pass


class AllMissingColumn(MedbootError):
    pass


class AllMissingRow(MedbootError):
    pass


class NonPositiveDefinite(MedbootError):
    pass


class ChainDivergence(MedbootError):
    pass


class TooFewReplicates(MedbootError):
    pass


class InvalidLevel(MedbootError):
    pass


class AllReplicatesFailed(MedbootError):
    pass


class UndefinedDeviance(MedbootError):
    pass


# Failures that a bootstrap replicate may hit by bad luck of the resample.
REPLICATE_FAILURES = (
    SingularDesign,
    TooFewRows,
    AllMissingColumn,
    NonPositiveDefinite,
    ChainDivergence,
)
