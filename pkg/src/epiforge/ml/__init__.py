from .forecast import recurrent_forecast, recurrent_forecast_many
from .models import (
    KNN,
    GradientBoosting,
    KernelRidge,
    RandomForest,
    RegressorKind,
    fit_regressor,
    parse_kind,
    predict,
)
from .search import DEFAULT_GRIDS, HyperGrid, grid_search, kfold_indices

__all__ = [
    "KNN", "GradientBoosting", "KernelRidge", "RandomForest", "RegressorKind", "fit_regressor",
    "parse_kind", "predict", "recurrent_forecast", "recurrent_forecast_many", "DEFAULT_GRIDS",
    "HyperGrid", "grid_search", "kfold_indices",
]
