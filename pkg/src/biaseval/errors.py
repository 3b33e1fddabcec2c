"""Exception types shared across the toolkit."""


class BiasEvalError(Exception):
    """Base class for all toolkit errors."""


class ScoreRangeError(BiasEvalError):
    """A scorer returned a value outside its declared score range."""


class ScorerError(BiasEvalError):
    """A scorer failed on a specific input pair."""

    def __init__(self, message, hyp=None, ref=None):
        super().__init__(message)
        self.hyp = hyp
        self.ref = ref


class NoComparableContentError(BiasEvalError):
    """Both sides of a comparison are empty after vocabulary filtering."""


class DegenerateDataError(BiasEvalError):
    """A statistic is undefined on the given data (e.g. zero rank variance)."""


class BridgeError(BiasEvalError):
    """Base class for bridge/child-process failures."""


class BridgeTimeoutError(BridgeError):
    """The child did not reply within the configured timeout."""


class BridgeProtocolError(BridgeError):
    """The child sent a malformed or unexpected reply."""


class BridgeCrashError(BridgeError):
    """The child process exited unexpectedly."""
