"""Grid search over hyperparameters with contiguous (unshuffled) k-fold CV."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from ..errors import EmptyGrid, FoldError
from .models import RegressorKind, fit_regressor, parse_kind

DEFAULT_GRIDS = {
    RegressorKind.RANDOM_FOREST: {"max_depth": [4, 8, 16, None], "n_estimators": [50, 100, 200]},
    RegressorKind.GRADIENT_BOOSTING: {"learning_rate": [0.01, 0.05, 0.1, 0.3],
                                      "n_estimators": [50, 100, 200]},
    RegressorKind.KNN: {"k": list(range(2, 16))},
    RegressorKind.KERNEL_RIDGE: {"alpha": [1e-3, 1e-2, 1e-1, 1.0, 10.0],
                                 "gamma": [1e-3, 1e-2, 1e-1, 1.0, 10.0]},
}


@dataclass
class HyperGrid:
    grids: dict = field(default_factory=lambda: {k: dict(v) for k, v in DEFAULT_GRIDS.items()})
    folds: int = 5

    def candidates(self, kind):
        kind = parse_kind(kind)
        grid = self.grids.get(kind)
        if not grid or any(len(v) == 0 for v in grid.values()):
            raise EmptyGrid(f"empty hyperparameter grid for {kind.value}")
        names = list(grid)
        return [dict(zip(names, combo)) for combo in itertools.product(*(grid[n] for n in names))]


def kfold_indices(n, folds):
    """Contiguous folds; the first ``n % folds`` folds get one extra row."""
    if folds < 2:
        raise FoldError(f"need at least 2 folds, got {folds}")
    if folds > n:
        raise FoldError(f"{folds} folds requested for {n} rows")
    sizes = np.full(folds, n // folds)
    sizes[: n % folds] += 1
    bounds = np.concatenate([[0], np.cumsum(sizes)])
    return [np.arange(bounds[i], bounds[i + 1]) for i in range(folds)]


def cv_rmse(kind, X, y, hyperparameters, folds=5, seed=0):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    scores = []
    for test in kfold_indices(len(y), folds):
        train = np.setdiff1d(np.arange(len(y)), test)
        model = fit_regressor(kind, X[train], y[train], hyperparameters, seed)
        resid = model.predict(X[test]) - y[test]
        scores.append(float(np.sqrt(np.mean(resid**2))))
    return float(np.mean(scores))


def grid_search(kind, X_train, y_train, grid=None, seed=0):
    """Return (best hyperparameters, [(candidate, mean fold RMSE), ...]).

    Ties keep the earliest candidate in grid order.
    """
    grid = grid or HyperGrid()
    results = []
    best, best_score = None, np.inf
    for cand in grid.candidates(kind):
        score = cv_rmse(kind, X_train, y_train, cand, grid.folds, seed)
        results.append((cand, score))
        if score < best_score:
            best, best_score = cand, score
    if best is None:
        # every candidate scored NaN/inf; fall back to the first one
        best = results[0][0]
    return dict(best), results
