"""Large-time asymptotic expansions for u_t = Delta u + F(x, t, u, grad u).

Gauss-kernel moment calculus, a spectral Duhamel solver, the U_n / tilde / hat
expansions and log-log decay-rate verdicts.
"""

from .errors import ConvergenceError, DomainError, GuardError
from .kernel import MultiIndex, g_alpha, g_alpha_moment, gauss, gaussian_moment, multi_indices
from .field import (
    Field, Grid, gauss_field, g_alpha_field, gradient, heat_apply, integrate, load_field,
    lq_norm, moment_of_field, save_field, weighted_l1_norm,
)
from .moments import MomentTable, bracket, commute_check, moment_coefficients, project_P
from .dynamics import (
    ChemotaxisState, Nonlinearity, make_convection, make_keller_segel, make_semilinear,
    make_system, make_zero, update_chemotaxis,
)
from .solver import (
    SolveConfig, Trajectory, duhamel_residual, load_trajectory, mass_and_moment_audit,
    picard_step, save_trajectory, solve,
)
from .expansion import (
    ExpansionProfile, build_hat_u, build_tilde_u, build_U0, build_Un, c_alpha_series,
    coefficient_drift_check, convection_profile, mass_profile,
)
from .rates import (
    NormSeries, RateVerdict, fit_slope, judge, measure_error_series, predicted_rate,
    predicted_rate_tilde, verdict,
)

__version__ = "0.1.0"
