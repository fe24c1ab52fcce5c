"""Exception hierarchy shared by every sded module."""


class SdedError(Exception):
    """Base class for all errors raised by sded."""


class ParseError(SdedError):
    pass


class ValidationError(SdedError):
    """Raised with the full list of invariant violations found in a case."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class UnknownGenerator(SdedError):
    pass


class UnknownBus(SdedError):
    pass


class NonMonotonePercentiles(SdedError):
    def __init__(self, timestep, detail=""):
        self.timestep = timestep
        msg = f"percentiles decrease at timestep {timestep}"
        super().__init__(f"{msg}: {detail}" if detail else msg)


class HorizonMismatch(SdedError):
    pass


class DimensionMismatch(SdedError):
    pass


class EmptyHorizon(SdedError):
    pass


class IndexMismatch(SdedError):
    pass


class NumericalFailure(SdedError):
    pass


class NoFeasibleFound(SdedError):
    pass


class TooManyBinaries(SdedError):
    pass


class IoError(SdedError, OSError):
    pass


class BackendFailure(SdedError):
    pass


class MissingBaseline(SdedError):
    pass


class SolveFailure(SdedError):
    pass
