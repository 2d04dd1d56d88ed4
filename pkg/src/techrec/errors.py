"""Exception hierarchy shared across the pipeline.

The CLI maps these onto exit codes: usage errors exit 1, DataError exits 2,
NumericalError exits 3.
"""


class TechrecError(Exception):
    pass


class UsageError(TechrecError):
    """Invalid invocation: bad flag value, unusable environment setting."""


class DataError(TechrecError):
    """Malformed or inconsistent input data (bad file, unknown id, schema violation)."""


class NumericalError(TechrecError):
    """Numerical failure: non-finite parameters, degenerate model state."""
