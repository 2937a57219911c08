"""Verification workbench for uniform oscillatory-integral bounds.

The package certifies, at desk scale, that the weighted oscillatory
integral of a form with an interior non-singular zero stays below
C * min(1, 1/|tau|) uniformly in the logarithmic oscillation exponents,
by materializing every constructive ingredient: exact polynomial
diagnostics, certified inverse-function boxes, stationary-phase normal
forms, first-derivative integral bounds, and grid sweeps.
"""

__version__ = "0.1.0"

from .bounds import AxisBox
from .hypotheses import (
    CaseReport,
    ProblemConfig,
    Weight,
    build_weight,
    classify_case,
    find_good_pair,
    find_surface_point,
    load_config,
)
from .ift import IFTCertificate, SmoothMap2, admissible_m, certify, invert
from .oscquad import (
    PhaseProblem,
    QuadResult,
    fresnel_partial,
    integrate_1d,
    integrate_phase,
    vdc_bound_i,
    vdc_bound_ii,
)
from .polyring import (
    MonomialSplit,
    MultiPoly,
    divides,
    format_poly,
    parse_poly,
    scaled_gradient_det,
    split_monomials,
    valuation,
)
from .stphase import (
    BranchRegions,
    MorseChart,
    PhaseSlice,
    SliceGeometry,
    build_geometry,
    classify_branch,
    decompose_phase,
    find_critical_point,
)
