"""Implementing outcomes of normal-form games through partially specified information structures."""

from .constructor import (
    ConstructedMechanism,
    RationalCE,
    build_mechanism,
    build_product_mechanism,
    implement_jointly_coherent,
    line_sum_array,
    verify_line_sums,
)
from .direct import can_induce, direct_certificate, entropy_report, search_direct, unique_ce_linear_constraint
from .errors import (
    BudgetExceeded,
    ConvergenceError,
    CoordMechError,
    InconsistentConstraints,
    InputError,
    RejectionError,
)
from .game import (
    Distribution,
    Game,
    ProductSpace,
    StrategyProfile,
    deviation_gain,
    expected_payoffs,
    is_correlated_equilibrium,
    pushforward,
)
from .maxent import MomentConstraints, build_constraints, max_entropy, verify_kkt
from .psdgp import FeedbackFunction, PartiallySpecifiedDGP, informationally_equivalent, reduce_feedback
from .rational_lp import (
    ce_polytope,
    ce_vertices,
    enumerate_extreme_points,
    is_jointly_coherent,
    jointly_coherent_support,
    maximal_support_rational_ce,
    solve_lp,
)
from .verifier import check_implementation, epsilon_bound
from .examples import run_examples

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
