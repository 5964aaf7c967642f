class RegretObserverError(Exception):
    """Root of every error raised by the toolkit."""


class BadInput(RegretObserverError):
    """Caller handed over something malformed. CLI exit code 3."""


class SolverFailure(RegretObserverError):
    """A numerical kernel or an optimizer could not deliver. CLI exit code 2."""


class DimensionMismatch(BadInput):
    pass


class NonFiniteEntries(BadInput):
    pass


class NotSymmetric(BadInput):
    pass


class MissingBlock(BadInput):
    pass


class SystemFileError(BadInput):
    pass


class BadConfig(BadInput):
    pass


class UnknownPattern(BadInput):
    pass


class UnknownSystem(BadInput):
    pass


class WorstCaseNeedsObserver(BadInput):
    pass


class NotCausal(BadInput):
    pass


class NotClairvoyant(BadInput):
    pass


class NotPositiveDefinite(SolverFailure):
    pass


class SingularBlock(SolverFailure):
    pass


class RankDeficient(SolverFailure):
    pass


class NoConvergence(SolverFailure):
    pass


class SdpInfeasible(SolverFailure):
    pass


class SdpMaxIterations(SolverFailure):
    pass


class CausalityViolation(SolverFailure):
    pass


class AchievabilityViolation(SolverFailure):
    pass


class CheckFailed(SolverFailure):
    pass


EXIT_OK = 0
EXIT_SOLVER = 2
EXIT_BAD_INPUT = 3


def exit_code_for(err: BaseException) -> int:
    if isinstance(err, BadInput):
        return EXIT_BAD_INPUT
    if isinstance(err, SolverFailure):
        return EXIT_SOLVER
    return 1
