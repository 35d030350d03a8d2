"""Exception types shared across modules (kept torch-free)."""


class NumericalError(RuntimeError):
    """A loss or model output stopped being finite."""


class CliError(ValueError):
    """Command-line validation failure (maps to exit code 1)."""
