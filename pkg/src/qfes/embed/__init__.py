"""Linear embeddings of nonlinear flows: densities, KvN/KvH wavefunctions,
Koopman observables and Carleman monomials."""
from .grid import PeriodicGrid, VectorField, central_difference
from .linear import (
    CFLError, ThetaStepper, integrable_propagate, koopman_generator, koopman_observable_step,
    koopman_theta_step, kvn_hamiltonian, kvn_step, liouville_generator, liouville_step,
    participation_ratio, prequantum_operator, theta_value, upwind_liouville_generator,
)
from .carleman import (
    CarlemanResult, CarlemanSystem, carleman_build, carleman_propagate, laurent_density_matrix,
    rescale_polynomial,
)
from .oracle import EnsembleResult, rk4_trajectory, trajectory_oracle
