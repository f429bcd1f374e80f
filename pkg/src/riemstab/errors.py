"""Exception types shared across the package."""


class DomainError(ValueError):
    """A point lies outside the chart (or domain) an operation needs."""


class RangeError(ValueError):
    """A point or vector lies outside the ball where a map is defined."""


class UsageError(ValueError):
    """Arguments are inconsistent (shapes, base points, empty samplers)."""


class InapplicableError(ValueError):
    """No clause of the injectivity-radius estimate applies."""


class PreconditionError(ValueError):
    """A verifier was handed inputs outside its stated hypotheses."""


class ConfigError(ValueError):
    """Invalid scenario configuration.

    ``path`` names the offending field (``"a"``, ``"run.h0"``) or is ``None``
    for parse errors, whose message carries line and column instead.
    """

    def __init__(self, message, path=None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class IntegrationError(RuntimeError):
    """Integration could not continue.

    Carries the last valid state, its time and the batch index of the
    offending run so callers can name it.
    """

    def __init__(self, message, time=None, state=None, index=None):
        super().__init__(message)
        self.time = time
        self.state = state
        self.index = index


class ChartExitError(IntegrationError):
    """The solution left the chart and step rejection could not recover."""


class StiffnessError(IntegrationError):
    """Step rejection shrank the step below the allowed minimum."""
