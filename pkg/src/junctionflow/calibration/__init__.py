"""Parameter estimation: model errors, delays, diagrams, classical and ML fits."""

from .benchmark import generate_c1prime_dataset, run_capability_test
from .classical_fit import fit_classical
from .de import DifferentialEvolutionConfig, differential_evolution
from .delays import apply_delays, estimate_delays
from .errors import Samples, TrainingSample, model_error, rms_norm, road_errors
from .fd_fit import fit_fundamental_diagram, stagnation_bound
from .training import AmsGrad, AmsGradConfig, consistency_penalty, train_ml

__all__ = [
    "AmsGrad",
    "AmsGradConfig",
    "DifferentialEvolutionConfig",
    "Samples",
    "TrainingSample",
    "apply_delays",
    "consistency_penalty",
    "differential_evolution",
    "estimate_delays",
    "fit_classical",
    "fit_fundamental_diagram",
    "generate_c1prime_dataset",
    "model_error",
    "rms_norm",
    "road_errors",
    "run_capability_test",
    "stagnation_bound",
    "train_ml",
]
