"""Exception types shared across the package."""


class GravitopError(Exception):
    """Base class for all errors raised by gravitop."""


class ConfigError(GravitopError):
    """Invalid problem/run configuration (bad geometry, unknown name, bad selector)."""


class ParameterError(GravitopError):
    """Invalid model parameter (e.g. non-positive Heaviside sharpness)."""


class AnalysisError(GravitopError):
    """Finite element analysis failure (singular system, solver non-convergence)."""


class OptimizerError(GravitopError):
    """Optimization failure (non-finite gradients, subproblem breakdown)."""
