"""Exception taxonomy shared by all mcqcal modules."""

from __future__ import annotations


class McqcalError(Exception):
    """Base class for all toolkit errors."""

    def to_json_dict(self) -> dict:
        return {"error": type(self).__name__, "message": str(self)}


class SchemaError(McqcalError):
    """A decoded record does not have the expected shape or types."""


class MissingField(SchemaError):
    pass


class LengthMismatch(SchemaError):
    pass


class OutOfRange(McqcalError):
    pass


class NonFinite(McqcalError):
    pass


class DuplicateKey(McqcalError):
    pass


class PolicyUnavailable(McqcalError):
    """A confidence policy or estimator needs fields the record does not carry."""


class EmptyDataset(McqcalError):
    pass


class UnlabeledRecord(McqcalError):
    pass


class NonPositiveTemperature(McqcalError):
    pass


class NotNormalized(McqcalError):
    pass


class NonFiniteObjective(McqcalError):
    pass


class AlignmentMismatch(McqcalError):
    """Reference distributions do not line up with the dataset records."""


class NotFitted(McqcalError):
    pass


class WrongChoiceFormat(McqcalError):
    pass


class ZeroMass(McqcalError):
    """Total choice-letter probability is numerically zero; conditional undefined."""


class UnknownFormat(McqcalError):
    pass


class ZeroMarginal(McqcalError):
    pass


class IndexOutOfRange(McqcalError):
    pass


class MissingGold(McqcalError):
    pass


class TooManyItems(McqcalError):
    pass


class EmptyCalibSet(McqcalError):
    pass


class MissingPosition(McqcalError):
    pass


class EmptyBins(McqcalError):
    pass
