"""Ordered-logit panel models of opinion change with workshop effects and
reversion, estimated by maximum simulated likelihood."""

__version__ = "0.1.0"

from .config import ConfigError, ModelConfig, load_config  # noqa: E402
from .data import DataValidationError, Dataset, WaveSchedule, load_dataset, write_dataset  # noqa: E402
from .draws import DrawMatrix, mlhs  # noqa: E402
from .estimator import EstimationResult, ReversionOrderedLogit, starting_values  # noqa: E402
from .likelihood import LikelihoodEngine, simulated_loglik  # noqa: E402
from .model import decay, ordered_probs  # noqa: E402
from .params import ParameterStructure, ParameterVector  # noqa: E402
from .reporting import describe, paired_t_test, reversion_curves, trajectories  # noqa: E402
from .synthesis import ScenarioSpec, recovery_experiment, simulate_dataset, reference_scenario  # noqa: E402

__all__ = [
    "ConfigError", "DataValidationError", "Dataset", "DrawMatrix", "EstimationResult", "LikelihoodEngine",
    "ModelConfig", "ParameterStructure", "ParameterVector", "ReversionOrderedLogit", "ScenarioSpec",
    "WaveSchedule", "decay", "describe", "load_config", "load_dataset", "mlhs", "ordered_probs",
    "paired_t_test", "recovery_experiment", "reversion_curves", "simulate_dataset", "simulated_loglik",
    "starting_values", "reference_scenario", "trajectories", "write_dataset",
]
