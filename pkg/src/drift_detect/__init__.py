"""Sequential detection of which coordinate of a 3D Brownian motion drifts.

Solver for the optimal stopping boundaries of the Bayes-risk problem
(observation time plus a penalty c for a wrong terminal pick), plus the
closed-form ingredients, a Monte Carlo simulator, and a small CLI.
"""

from .errors import (
    BoundaryMismatch,
    DegeneratePrior,
    DomainError,
    DriftDetectError,
    NoBracket,
    NonConvergence,
)
from .model import (
    ModelParams,
    PhiPoint,
    Posterior,
    Prior,
    gain_hat_H,
    loss_hat_M,
    mayer_check_M,
    phi_to_posterior,
    prior_to_phi,
    terminal_decision,
)
from .closed_form import (
    AuxOneDSolution,
    OneDSolution,
    aux_solution,
    aux_value,
    oned_solution,
    oned_value,
    solve_beta,
)
from .transition import (
    LogGaussianLaw,
    QuadratureSpec,
    density,
    expect_H_over_region,
    generator_residual,
    log_law,
    sample_phi,
)
from .boundaries import (
    Boundaries,
    Region,
    ResidualReport,
    SolverConfig,
    SymmetryReport,
    classify,
    fixed_point_residuals,
    from_json,
    picard_solve,
    symmetry_residuals,
    to_csv,
    to_json,
    update_point,
)
from .value import (
    ValueReport,
    batch_values,
    value_grid,
    value_hat,
    value_original,
    value_report,
)
from .simulate import (
    Measure,
    RiskReport,
    SimConfig,
    simulate_risk_ppi,
    simulate_value_p0,
    write_trace_csv,
)

__version__ = "0.1.0"
