"""Log-normal continuous cascades (MRM/MRW): simulation, approximations, estimation, forecasting."""
from .core_model import ModelParams, moment_prefactor, psi, scale_factor_law, zeta_m, zeta_x

__version__ = "0.1.0"

__all__ = ["ModelParams", "moment_prefactor", "psi", "scale_factor_law", "zeta_m", "zeta_x", "__version__"]
