"""Exception hierarchy shared by every module and mapped to CLI exit codes."""


class ChaosSimError(Exception):
    """Base class for all errors raised by chaossim."""


class SpecError(ChaosSimError, ValueError):
    """A parameter set violates an experiment's or operation's preconditions."""


class InputError(ChaosSimError, ValueError):
    """An input object (stream, walk) is too short or malformed for the request."""


class EmptyStreamError(InputError):
    pass


class EnumerationLimitError(ChaosSimError, ValueError):
    """Refusal to enumerate partitions above a configured size."""

    def __init__(self, n, limit):
        super().__init__(
            f"refusing to enumerate partitions of {n}: enumeration limit is {limit}"
        )
        self.n = n
        self.limit = limit


class DomainError(SpecError):
    pass


class EvaluationOverflow(ChaosSimError, OverflowError):
    """exp() of the log-Euler sum overflowed at angle ``t``."""

    def __init__(self, t, log_modulus):
        super().__init__(
            f"exp overflow evaluating F at t={t!r} (Re log F = {log_modulus:.6g})"
        )
        self.t = t
        self.log_modulus = log_modulus


class TrialFailureAbort(ChaosSimError):
    """More than the tolerated fraction of Monte Carlo trials failed."""

    def __init__(self, failed, trials, threshold):
        self.failed = list(failed)
        self.trials = trials
        self.threshold = threshold
        super().__init__(
            f"{len(self.failed)} of {trials} trials failed "
            f"(abort threshold {threshold:.2%}); first failed indices: {self.failed[:10]}"
        )
