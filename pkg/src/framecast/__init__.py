"""Numerics for broadcasting a Cartesian reference frame through spin ensembles."""

__version__ = "0.1.0"

from .agreement import (
    ObserverScenario,
    PriorSpec,
    SimulationRecord,
    delta_convergence_probe,
    eta_normalization,
    joint_density,
    pairwise_consistency,
    run_rounds,
    simulate_round,
)
from .disturbance import (
    ConvergenceError,
    DisturbanceReport,
    finite_j_fidelity,
    lambda_constant,
    single_observer_disturbance,
    trace_distance_bounds,
)
from .encoding import (
    EncodingSpec,
    Eigenpair,
    b_norm_squared,
    encoding_spec,
    multiplicity,
    toeplitz_numeric,
    toeplitz_top_eigenpair,
)
from .likelihood import (
    LikelihoodModel,
    ResolutionError,
    average_error,
    build_model,
    density_grid,
    likelihood_density,
    overlap,
    overlap_closed_form,
    sample_estimate,
    transmission_error,
)
from .oracle import CouplingTree, brute_overlap, build_state_vectors, coupled_basis
from .su2 import (
    HaarGrid,
    So3Rotation,
    Su2Element,
    haar_integrate,
    haar_integrate_class,
    haar_sample,
    relative_angle,
    su2_compose,
    su2_from_angles,
    su2_from_axis_angle,
    su2_identity,
    su2_inverse,
    su2_to_rotation,
)
