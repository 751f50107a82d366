"""Two-asset option pricing without a riskless bond, driven by a common Levy jump process.

The main entry points are re-exported here; see the submodules for details.
"""

from .errors import LRError, NonConvergence
from .levy_models import BS, CGMY, NIG, VG, MarketLeg, RiskNeutralSetup, char_exponent, jump_compensator
from .shadow_rate import TwoAssetSpec, rolling_shadow_series, shadow_rate
from .fourier_pricing import carr_madan_prices, cos_price, p1_p2_price, price_options
from .lattice import LatticeSpec, StepMoves, price_on_lattice
from .closed_form import LrInputs, lr_closed_form_price, pde_residual, solve_y_star
from .mc_oracle import SimSpec, mc_price, simulate_terminal
from .calibration import CalibrationSettings, calibrate, fit_model

__version__ = "0.1.0"

__all__ = [
    "BS", "CGMY", "NIG", "VG", "MarketLeg", "RiskNeutralSetup", "char_exponent", "jump_compensator",
    "TwoAssetSpec", "shadow_rate", "rolling_shadow_series",
    "carr_madan_prices", "cos_price", "p1_p2_price", "price_options",
    "StepMoves", "LatticeSpec", "price_on_lattice",
    "LrInputs", "solve_y_star", "lr_closed_form_price", "pde_residual",
    "SimSpec", "simulate_terminal", "mc_price",
    "CalibrationSettings", "calibrate", "fit_model",
    "LRError", "NonConvergence",
]
