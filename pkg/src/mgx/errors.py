"""Exception types shared across the package."""


class MgxError(Exception):
    """Base class for all package-specific errors."""


class NonFinitePayoff(MgxError):
    """Payoff matrix contains NaN or infinite entries."""


class SolverFailure(MgxError):
    """The LP solver did not converge within its iteration cap."""


class DimensionMismatch(MgxError):
    """Strategy / game / data shapes are inconsistent."""


class InvalidShape(MgxError):
    """Instance constructor parameters violate a structural precondition."""


class ConstructionFailed(MgxError):
    """Randomized constructor exhausted its rejection budget."""


class BudgetExceeded(MgxError):
    """An adversary requested more replacements than the contamination budget."""


class EpsilonTooLarge(MgxError):
    """Contamination level too large for the estimator's contract."""


class NotConverged(MgxError):
    """Iterative estimator hit its iteration cap (best iterate is attached)."""


class CoverageTooWeak(MgxError):
    """Empirical design matrix too ill-conditioned for the stated contract."""


class TooFewSamples(MgxError):
    """Not enough samples for the requested estimate."""


class EmptySlice(MgxError):
    """A per-timestep data slice contains no tuples."""


class SingularCovariance(MgxError):
    """Covariance matrix is not positive definite."""


class NeRequired(MgxError):
    """The supplied strategy pair is not a Nash equilibrium of the game."""


class EmptySelection(MgxError):
    """Plot selection matched no result rows."""


class ConfigError(MgxError):
    """Experiment configuration file is invalid."""
