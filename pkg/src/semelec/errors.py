"""Exception types shared across the simulator."""


class ConfigError(ValueError):
    """Invalid or incomplete device/experiment configuration."""


class StepFailure(RuntimeError):
    """A transient step produced non-finite or negative densities."""


class ConvergenceError(RuntimeError):
    """Raised by callers that demand convergence of an iterative solve."""
