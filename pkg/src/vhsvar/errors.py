"""Exception hierarchy shared across the package."""


class VhsvarError(Exception):
    """Base class for package errors."""


class ValidationError(VhsvarError):
    """Invalid user input (bad config value, malformed argument)."""


class DataError(VhsvarError):
    """Malformed or inconsistent input data (prices, CSV schema)."""


class DegeneratePortfolioError(VhsvarError):
    """Portfolio value collapsed to zero; weights are undefined."""


class FitError(VhsvarError):
    """Estimation failed (non-convergence, rank deficiency)."""


class UnsupportedFeatureError(VhsvarError):
    """Explicitly out-of-scope request (e.g. AEPD designs)."""
