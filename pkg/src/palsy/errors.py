"""Exception types shared across the package."""


class PalsyError(Exception):
    """Base class for all errors raised by this package."""


class MalformedRecord(PalsyError):
    """A cohort file row that cannot be parsed; carries the row index."""

    def __init__(self, row: int, reason: str):
        super().__init__(f"row {row}: {reason}")
        self.row = row
        self.reason = reason


class WrongLandmarkCount(MalformedRecord):
    def __init__(self, row: int, count: int):
        MalformedRecord.__init__(self, row, f"expected 68 landmark pairs, found {count}")
        self.count = count


class NonFiniteCoordinate(MalformedRecord):
    def __init__(self, row: int, field: str):
        MalformedRecord.__init__(self, row, f"non-finite value in {field}")


class DegenerateFaceBox(PalsyError):
    pass


class IoFailure(PalsyError):
    pass


class CoincidentEyeCenters(PalsyError):
    pass


class EmptyInput(PalsyError):
    pass


class DegenerateMetric(PalsyError):
    pass


class DimensionMismatch(PalsyError):
    pass


class KTooLarge(PalsyError):
    pass


class SingleClassInput(PalsyError):
    pass


class ZeroDenominator(PalsyError):
    pass


class FoldError(PalsyError):
    """A trainer failure inside cross-validation; carries the fold index."""

    def __init__(self, fold: int, cause: Exception):
        super().__init__(f"fold {fold}: {cause}")
        self.fold = fold
        self.cause = cause


class InfeasibleFloor(PalsyError):
    pass


class DegenerateSeries(PalsyError):
    pass


class TargetUnreachable(PalsyError):
    pass
