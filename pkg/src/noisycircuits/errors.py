"""Exception and warning types shared across the package."""


class NoisyCircuitsError(Exception):
    """Base class for all package-specific errors."""


class CircuitFormatError(NoisyCircuitsError):
    """A circuit or config description is malformed (bad fields, overlapping
    gate supports, out-of-range sites or rates)."""


class BudgetExceeded(NoisyCircuitsError):
    """A dense simulation would allocate more density-matrix entries than the
    configured budget allows."""

    def __init__(self, cost_log2: float, budget: int):
        self.cost_log2 = cost_log2
        self.budget = budget
        super().__init__(
            f"dense patch needs 2^{cost_log2:.1f} density-matrix entries, "
            f"budget is {budget} entries"
        )


class NormalizationError(NoisyCircuitsError):
    """A probability vector failed its normalization or positivity check
    beyond the allowed roundoff tolerance."""


class InsufficientData(NoisyCircuitsError):
    """Too few usable points for a fit."""


class ZeroConditionalWarning(UserWarning):
    """The conditioning event had numerically zero probability; a uniform
    conditional was substituted."""

    def __init__(self, site: int, event_probability: float):
        self.site = site
        self.event_probability = event_probability
        super().__init__(
            f"conditioning event for site {site} has probability "
            f"{event_probability:.3e}; returning uniform conditional"
        )
