"""Daily COVID-19 case forecasting with growth curves, regressors and ensembles."""

from .config import ExperimentConfig, load_config
from .errors import ConfigError, DataError, EpiforgeError, NumericError
from .pipeline import run_pipeline

__version__ = "0.1.0"

__all__ = ["ExperimentConfig", "load_config", "run_pipeline", "EpiforgeError", "ConfigError",
           "DataError", "NumericError"]
