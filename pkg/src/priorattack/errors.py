"""Exception hierarchy shared across the package."""


class AttackError(Exception):
    """Base class for every error raised by priorattack."""


class ShapeError(AttackError, ValueError):
    pass


class InvalidDimensionError(AttackError, ValueError):
    pass


class UndefinedSimilarityError(AttackError, ArithmeticError):
    """Cosine similarity requested with a zero vector."""


class ConfigError(AttackError, ValueError):
    """Invalid configuration; ``problems`` lists every violated field."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class BudgetExhausted(AttackError):
    """The query ledger has no queries left."""


class PartialEstimateError(BudgetExhausted):
    """Budget ran out in the middle of a gradient-estimation batch."""

    def __init__(self, queries_spent):
        self.queries_spent = queries_spent
        super().__init__(f"budget exhausted after {queries_spent} estimation queries")


class DegeneratePerturbationError(AttackError):
    """A filtered perturbation collapsed to the zero vector."""


class DegenerateEstimateError(AttackError):
    """All terms of the Monte Carlo estimate cancelled."""


class GradientUnavailable(AttackError):
    """Analytic gradient requested from a non-analytic oracle."""


class OracleError(AttackError):
    pass


class TransportError(OracleError):
    """Network failure or timeout after all retries."""


class ProtocolError(OracleError):
    """Remote oracle answered with something other than a valid label."""


class InvalidStartError(AttackError):
    """The supplied starting image is not adversarial."""


class InitializationFailed(AttackError):
    pass


class UndefinedMetricError(AttackError, ValueError):
    pass
