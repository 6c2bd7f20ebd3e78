"""Verification and computation toolkit for the critical biharmonic Hartree equation.

Evaluates the closed-form objects of the problem (bubbles, Funk-Hecke
eigenvalues, sector spectra, interaction constants), cross-checks them with
independent quadrature oracles, reproduces the nondegeneracy and
stability-constant computations, and solves the reduced equations locating
multi-bubble solutions for a user-supplied potential.
"""

from .specfun import (
    AmplitudeInfo,
    PaperConstants,
    ProblemParams,
    c_n_alpha,
    i_of_s,
    lambda_k,
    log_gamma,
    sharp_constants,
)
from .bubble import Bubble, SpherePoint, eval_bubble, riesz_convolution_Wp, stereographic
from .quad import QuadratureError, QuadratureSpec, integrate_1d, two_center_integral
from .spectral import (
    SectorSpectrum,
    funk_hecke_numeric,
    mu_ladder,
    nondegeneracy_check,
    sector_spectrum,
    stability_constants,
)
from .multibubble import (
    InteractionConstants,
    PolygonConfig,
    PotentialModel,
    parse_potential,
    solve_reduced,
)
from .stability import DeficitExperiment, deficit_experiment, deficit_quadratic_form

__version__ = "0.1.0"
