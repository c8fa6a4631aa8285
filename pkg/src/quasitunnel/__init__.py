"""Tunneling exponents by three routes: 1-D WKB integrals, first-order
gradient flow of a superpotential, and second-order Euclidean relaxation."""

__version__ = "0.1.0"

from .fields import (  # noqa: E402
    CriticalPoint,
    DegenerateFieldError,
    LowBarrierWarning,
    Metric,
    MetricError,
    PotentialFromSuperpotential,
    ScalarField,
    diagonal_metric,
    find_critical_points,
    flat_metric,
    potential_value,
)
from .numerics import Log10Number  # noqa: E402
from .wkb import (  # noqa: E402
    AlphaDecayModel,
    BarrierModel1D,
    lifetime_sweep,
    tunneling_probability,
    turning_points,
    wkb_exponent,
)
from .flow import (  # noqa: E402
    ActionReport,
    FlowOptions,
    FlowProblem,
    FlowStatus,
    Trajectory,
    action_closed_form,
    action_from_trajectory,
    solve_flow,
    upper_bound_amplitude,
    verify_second_order,
)
from .instanton import BvpProblem, compare_routes, solve_instanton  # noqa: E402
from .manifold import ChartedSurface, manifold_action, manifold_flow, morse_cells  # noqa: E402
from .catalog import CATALOG, make_field  # noqa: E402
