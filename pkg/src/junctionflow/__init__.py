"""Traffic flow at a 2-to-1 on-ramp junction: coupling models, calibration and simulation."""

from .classical import ClassicalModel, ClassicalParams, solve_c1, solve_c2, solve_c3, solve_c4
from .errors import ConfigError, ContractError, DomainError
from .junction import PAPER_FDS, UNIT_FDS, AdmissibleSet, CouplingFluxes, FundamentalDiagram
from .kvfile import TOOL_VERSION as __version__
from .ml import MlCouplingModel, init_model, load_model, save_model

__all__ = [
    "PAPER_FDS",
    "UNIT_FDS",
    "AdmissibleSet",
    "ClassicalModel",
    "ClassicalParams",
    "ConfigError",
    "ContractError",
    "CouplingFluxes",
    "DomainError",
    "FundamentalDiagram",
    "MlCouplingModel",
    "init_model",
    "load_model",
    "save_model",
    "solve_c1",
    "solve_c2",
    "solve_c3",
    "solve_c4",
]
