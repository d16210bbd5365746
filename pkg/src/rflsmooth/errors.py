"""Exception hierarchy shared across the toolkit."""


class ToolkitError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(ToolkitError):
    """Configuration file is missing, malformed, or inconsistent."""


class DimensionError(ToolkitError):
    """Matrix dimensions are mutually inconsistent."""


class InfeasibleError(ToolkitError):
    """A scaling point or Riccati equation admits no valid solution.

    Attributes
    ----------
    margin : float or None
        Feasibility margin (negative when infeasible), if known.
    eigenvalues : ndarray or None
        Offending eigenvalues (e.g. imaginary-axis Hamiltonian spectrum).
    """

    def __init__(self, message, margin=None, eigenvalues=None):
        super().__init__(message)
        self.margin = margin
        self.eigenvalues = eigenvalues


class CouplingError(InfeasibleError):
    """Spectral-radius coupling condition rho(Y X) < tau violated."""

    def __init__(self, message, rho=None, tau=None):
        super().__init__(message)
        self.rho = rho
        self.tau = tau


class NumericalError(ToolkitError):
    """A numerical routine produced an unacceptably large residual."""


class StationarityError(ToolkitError):
    """The closed loop is not Hurwitz, so no stationary covariance exists."""
