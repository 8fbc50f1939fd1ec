"""Exception hierarchy.

Everything raised on bad input derives from either :class:`ConfigError`
(malformed spaces, configurations or experiment settings) or
:class:`DataError` (unreadable or unusable datasets).  The CLI maps the two
families to distinct exit codes.
"""


class CashError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(CashError):
    pass


class DataError(CashError):
    pass


# -- data ------------------------------------------------------------------


class EmptyFile(DataError):
    pass


class MissingLabelColumn(DataError):
    pass


class RaggedRow(DataError):
    def __init__(self, row_index, expected=None, found=None):
        self.row_index = row_index
        msg = f"row at line {row_index} is ragged"
        if expected is not None:
            msg += f" (expected {expected} fields, found {found})"
        super().__init__(msg)


class ParseError(DataError):
    def __init__(self, line, reason=""):
        self.line = line
        super().__init__(f"line {line}: {reason}" if reason else f"line {line}")


class UnsupportedAttributeType(DataError):
    pass


class MissingValue(DataError):
    pass


class TooFewInstances(DataError):
    pass


class KTooLarge(DataError):
    pass


# -- parameter spaces ------------------------------------------------------


class SpaceError(ConfigError):
    pass


class CycleDetected(SpaceError):
    def __init__(self, path):
        self.path = tuple(path)
        super().__init__("condition cycle: " + " -> ".join(self.path))


class UnknownParent(SpaceError):
    pass


class DefaultOutOfDomain(SpaceError):
    pass


class NonCategoricalParent(SpaceError):
    pass


class InvalidDomain(SpaceError):
    pass


class InvalidConfig(ConfigError):
    pass


# -- learners / evaluation -------------------------------------------------


class BudgetExhausted(CashError):
    """Raised by a learner when its instance-evaluation budget runs out."""


class ArityMismatch(DataError):
    pass


class MissingFold(CashError):
    def __init__(self, fold):
        self.fold = fold
        super().__init__(f"no record for fold {fold}")


class EmptyInput(CashError):
    pass


class LengthMismatch(CashError):
    pass


class TooFewObservations(CashError):
    pass


class NonpositiveDensity(CashError):
    pass
