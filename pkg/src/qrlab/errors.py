"""Exception types raised across the package."""


class QRLabError(Exception):
    """Base class for all package errors."""


class DimensionMismatchError(QRLabError, ValueError):
    pass


class MapConfigError(QRLabError, ValueError):
    """A map descriptor failed validation."""


class NearBranchPointError(QRLabError, ValueError):
    """Finite differences requested too close to the branch set."""


class BudgetExceededError(QRLabError, RuntimeError):
    def __init__(self, required, budget):
        super().__init__(f"requires {required} atoms, budget is {budget}")
        self.required = required
        self.budget = budget


class ExceptionalSeedError(QRLabError, ValueError):
    """Backward orbit of the seed is finite, so it cannot fill the Julia set."""


class NotPeriodicError(QRLabError, ValueError):
    pass


class DegenerateCondenserError(QRLabError, ValueError):
    pass
