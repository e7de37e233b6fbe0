class SpliceError(Exception):
    """Base class for errors raised by splice_em."""


class DataError(SpliceError, ValueError):
    """Invalid or unusable observations."""


class DegenerateWindowError(SpliceError, ValueError):
    """A truncation window carries no probability mass."""


class ConvergenceError(SpliceError, RuntimeError):
    """An iterative procedure failed to converge or to bracket a root."""

    def __init__(self, message, iterations=None):
        super().__init__(message)
        self.iterations = iterations


class InfiniteMeanError(SpliceError, ValueError):
    """A premium or TVaR is infinite because the tail has no finite mean."""
