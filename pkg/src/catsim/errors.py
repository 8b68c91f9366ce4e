"""Exception types shared across the package."""


class CatsimError(Exception):
    """Base class for all catsim errors."""


class TruncationTooSmall(CatsimError):
    """Fock truncation cannot represent the requested state accurately."""


class DimensionMismatch(CatsimError):
    """Operands live on different Hilbert spaces."""


class StiffnessFailure(CatsimError):
    """Adaptive integrator step collapsed below the stiffness floor."""


class NoConvergence(CatsimError):
    """Steady-state search exhausted its time budget."""


class QuadratureNoConvergence(CatsimError):
    """Adaptive quadrature failed to reach the requested tolerance."""


class NonExponentialDecay(CatsimError):
    """Decay-rate fit residual exceeds the acceptance threshold."""


class NonOrthonormalBasis(CatsimError):
    """Projection basis is not orthonormal to the required tolerance."""


class ConfigError(CatsimError):
    """Experiment configuration is malformed or inconsistent."""
