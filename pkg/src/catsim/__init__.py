"""catsim: driven-dissipative cat-qubit simulation toolkit."""

__version__ = "0.1.0"

from .errors import (
    CatsimError,
    ConfigError,
    DimensionMismatch,
    NoConvergence,
    NonExponentialDecay,
    NonOrthonormalBasis,
    QuadratureNoConvergence,
    StiffnessFailure,
    TruncationTooSmall,
)
from .hilbert import (
    CatSpec,
    FockDim,
    Ket,
    Operator,
    annihilation,
    cat,
    coherent,
    creation,
    default_n_max,
    displacement,
    fock,
    identity,
    number,
    parity,
    tensor,
)
from .lindblad import (
    DensityMatrix,
    LindbladModel,
    Propagator,
    Trajectory,
    expect,
    fidelity,
    four_photon_model,
    integrate,
    purity,
    rhs,
    steady_state,
    trace_distance,
    two_photon_model,
)
