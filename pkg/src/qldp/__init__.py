"""Simulation and verification toolkit for quantum local differential privacy."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    DensityMatrix,
    ProductState,
    computational_basis_density,
    maximally_mixed,
    pure_state_density,
    random_density_matrix,
    tensor,
    walsh_hadamard,
)
from .errors import (  # noqa: E402
    BudgetExceeded,
    CapacityError,
    InsufficientCopies,
    MaxIterationsExceeded,
    NotTrivialEnough,
    QldpError,
    ValidationError,
)
from .measurement import (  # noqa: E402
    Povm,
    check_dp,
    expectation,
    minimal_triviality,
    minimal_triviality_on_set,
    outcome_probabilities,
    projective_povm,
    random_povm,
    sample_outcome,
)
from .oracles import QldpOracle, QsqOracle  # noqa: E402
from .rng import make_rng  # noqa: E402
