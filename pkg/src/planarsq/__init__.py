"""Entanglement-depth bounds and certification for planar spin-squeezed ensembles."""

from .criteria import (
    Assumption,
    Criterion,
    CriterionConfig,
    DepthVerdict,
    compare_criteria,
    entangled_fraction,
    entanglement_depth,
    moments_from_dict,
    moments_to_dict,
    sm_depth,
    unequal_polarization_bound,
    xi_parallel,
)
from .curves import (
    BoundCurve,
    ZetaTable,
    curve_eval,
    curve_lower,
    hull_by_legendre,
    linear_lower_bound,
    producibility_hull,
    published_zeta_table,
    sm_curve,
    symmetric_curve,
    zeta,
    zeta_table,
)
from .errors import *  # noqa: F401,F403
from .ground import DEFAULT_CONFIG, LagrangianParams, SolverConfig, ground_state, solve_lagrangian, sweep_lambda
from .metrology import normalized_sensitivity, phase_averaged_enhancement, sensitivity, sql_sensitivity
from .spin import PlanarMoments, SpinLabel, build_operators, rotate_to_polarization_axis

__version__ = "0.1.0"
