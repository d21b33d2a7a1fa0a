"""Symbol-based Galerkin FEM solver for option pricing under Levy models.

All model-dependent quantities (stiffness matrix, localized right-hand side,
reference prices) are assembled in Fourier space from the model's symbol, so
swapping models means swapping one closed-form function.
"""

__version__ = "0.1.0"

from .assembly import (AssemblyError, distort, stiffness_bs_closed_form,
                       stiffness_direct_merton, stiffness_fft, stiffness_symbol)
from .basis import (BasisFamily, Grid, HatBasis, MollifiedHatBasis, SplineBasis,
                    make_family, nodal_synthesis, synthesize)
from .localization import (AuxiliaryFunction, BsPriceAux, Payoff, QhsNormalAux,
                           default_eta, initial_coefficients, make_aux,
                           payoff_hat, rhs_bs, rhs_qhs)
from .models import (CGMY, NIG, BlackScholes, DampingStrip, LevyModel, Merton,
                     StripError)
from .quadrature import QuadratureConfig, QuadratureError
from .studies import (DistortionReport, EocReport, distortion_study, eoc_study,
                      reference_price, reference_prices, solve_pricing_problem)
from .timestepping import PriceSurface, ThetaConfig, evaluate_surface, run_theta
from .toeplitz import ToeplitzMatrix

__all__ = [
    "AssemblyError",
    "AuxiliaryFunction",
    "BasisFamily",
    "BlackScholes",
    "BsPriceAux",
    "CGMY",
    "DampingStrip",
    "DistortionReport",
    "EocReport",
    "Grid",
    "HatBasis",
    "LevyModel",
    "Merton",
    "MollifiedHatBasis",
    "NIG",
    "Payoff",
    "PriceSurface",
    "QhsNormalAux",
    "QuadratureConfig",
    "QuadratureError",
    "SplineBasis",
    "StripError",
    "ThetaConfig",
    "ToeplitzMatrix",
    "default_eta",
    "distort",
    "distortion_study",
    "eoc_study",
    "evaluate_surface",
    "initial_coefficients",
    "make_aux",
    "make_family",
    "nodal_synthesis",
    "payoff_hat",
    "reference_price",
    "reference_prices",
    "rhs_bs",
    "rhs_qhs",
    "run_theta",
    "solve_pricing_problem",
    "stiffness_bs_closed_form",
    "stiffness_direct_merton",
    "stiffness_fft",
    "stiffness_symbol",
    "synthesize",
]
