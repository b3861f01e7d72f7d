"""The four regressors: random forest, gradient boosting, kNN and kernel ridge.

All models are fitted on standardized design rows and predict in that space.
Each exposes ``kind``, ``hyperparameters``, ``seed``, ``n_features`` and a
vectorized ``predict``.
"""

from __future__ import annotations

import enum

import numpy as np
import scipy.linalg

from ..errors import (
    EmptyTrainingSet,
    HyperparameterError,
    ModelError,
    SingularKernel,
    WidthMismatch,
)
from .tree import RegressionTree, predict_forest, stack_trees

GB_DEFAULT_DEPTH = 3


class RegressorKind(str, enum.Enum):
    RANDOM_FOREST = "random_forest"
    GRADIENT_BOOSTING = "gradient_boosting"
    KNN = "knn"
    KERNEL_RIDGE = "kernel_ridge"

    @property
    def short(self):
        return SHORT_NAMES[self]


SHORT_NAMES = {
    RegressorKind.RANDOM_FOREST: "RF",
    RegressorKind.GRADIENT_BOOSTING: "GB",
    RegressorKind.KNN: "KNN",
    RegressorKind.KERNEL_RIDGE: "KRR",
}

# required and optional hyperparameters per kind
SCHEMA = {
    RegressorKind.RANDOM_FOREST: ({"max_depth", "n_estimators"}, {"bootstrap"}),
    RegressorKind.GRADIENT_BOOSTING: ({"learning_rate", "n_estimators"}, {"max_depth"}),
    RegressorKind.KNN: ({"k"}, set()),
    RegressorKind.KERNEL_RIDGE: ({"alpha", "gamma"}, set()),
}


def parse_kind(kind):
    if isinstance(kind, RegressorKind):
        return kind
    for k, short in SHORT_NAMES.items():
        if str(kind).upper() == short:
            return k
    try:
        return RegressorKind(kind)
    except ValueError:
        raise HyperparameterError(f"unknown regressor kind {kind!r}") from None


def depth_value(depth):
    """None, 'unlimited', 'none' or a non-positive number all mean unlimited."""
    if depth is None or (isinstance(depth, str) and depth.lower() in ("unlimited", "none")):
        return None
    depth = int(depth)
    return None if depth <= 0 else depth


def tree_rng(seed, index):
    """Counter-based generator keyed by (seed, tree index)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(index)])))


def _as_2d(X):
    X = np.asarray(X, dtype=np.float64)
    return X[None, :] if X.ndim == 1 else X


class _Regressor:
    kind: RegressorKind

    def __init__(self, seed=0, **hyperparameters):
        self.seed = int(seed)
        self.hyperparameters = dict(hyperparameters)
        self.n_features = None

    def _check_fit(self, X, y):
        X = np.ascontiguousarray(_as_2d(X))
        y = np.ascontiguousarray(y, dtype=np.float64).ravel()
        if X.shape[0] == 0:
            raise EmptyTrainingSet(f"{self.kind.value}: no training rows")
        if X.shape[0] != y.shape[0]:
            raise HyperparameterError(f"{X.shape[0]} rows but {y.shape[0]} targets")
        self.n_features = X.shape[1]
        return X, y

    def _check_predict(self, X):
        if self.n_features is None:
            raise EmptyTrainingSet(f"{self.kind.value}: model is not fitted")
        X = np.ascontiguousarray(_as_2d(X))
        if X.shape[1] != self.n_features:
            raise WidthMismatch(f"{self.kind.value}: expected {self.n_features} features, got {X.shape[1]}")
        return X

    def __call__(self, X):
        return self.predict(X)

    def metadata(self):
        hp = {k: (v if v is not None else "unlimited") for k, v in self.hyperparameters.items()}
        return {"kind": self.kind.value, "hyperparameters": hp, "seed": self.seed,
                "n_features": self.n_features}


class RandomForest(_Regressor):
    kind = RegressorKind.RANDOM_FOREST

    def __init__(self, n_estimators=100, max_depth=None, bootstrap=True, seed=0):
        super().__init__(seed, n_estimators=int(n_estimators), max_depth=depth_value(max_depth),
                         bootstrap=bool(bootstrap))
        self.trees = []

    def fit(self, X, y):
        X, y = self._check_fit(X, y)
        hp = self.hyperparameters
        n = X.shape[0]
        self.trees = []
        for t in range(hp["n_estimators"]):
            if hp["bootstrap"]:
                idx = tree_rng(self.seed, t).integers(0, n, size=n)
            else:
                idx = np.arange(n)
            self.trees.append(RegressionTree(hp["max_depth"]).fit(X, y, idx))
        self._stacked = stack_trees(self.trees)
        return self

    def predict(self, X):
        X = self._check_predict(X)
        return predict_forest(*self._stacked, X)


class GradientBoosting(_Regressor):
    """Squared-error boosting: mean start, then shrunken trees on the residuals."""

    kind = RegressorKind.GRADIENT_BOOSTING

    def __init__(self, learning_rate=0.1, n_estimators=100, max_depth=GB_DEFAULT_DEPTH, seed=0):
        super().__init__(seed, learning_rate=float(learning_rate), n_estimators=int(n_estimators),
                         max_depth=depth_value(max_depth))
        self.trees = []
        self.init_ = 0.0

    def fit(self, X, y):
        X, y = self._check_fit(X, y)
        hp = self.hyperparameters
        self.init_ = float(y.mean())
        current = np.full(y.shape, self.init_)
        self.trees = []
        for _ in range(hp["n_estimators"]):
            tree = RegressionTree(hp["max_depth"]).fit(X, y - current)
            current = current + hp["learning_rate"] * tree.predict(X)
            self.trees.append(tree)
        self._stacked = stack_trees(self.trees) if self.trees else None
        return self

    def staged_predict(self, X):
        """Predictions after 0, 1, ..., n_estimators stages."""
        X = self._check_predict(X)
        current = np.full(X.shape[0], self.init_)
        yield current.copy()
        for tree in self.trees:
            current = current + self.hyperparameters["learning_rate"] * tree.predict(X)
            yield current.copy()

    def predict(self, X):
        X = self._check_predict(X)
        if self._stacked is None:
            return np.full(X.shape[0], self.init_)
        # predict_forest averages, so scale the mean back to a sum
        mean = predict_forest(*self._stacked, X)
        return self.init_ + self.hyperparameters["learning_rate"] * len(self.trees) * mean


class KNN(_Regressor):
    kind = RegressorKind.KNN

    def __init__(self, k=5, seed=0):
        super().__init__(seed, k=int(k))

    def fit(self, X, y):
        X, y = self._check_fit(X, y)
        k = self.hyperparameters["k"]
        if not 1 <= k <= X.shape[0]:
            raise HyperparameterError(f"knn: k={k} with {X.shape[0]} training rows")
        self.X_, self.y_ = X.copy(), y.copy()
        return self

    def predict(self, X):
        X = self._check_predict(X)
        k = self.hyperparameters["k"]
        out = np.empty(X.shape[0])
        for lo in range(0, X.shape[0], 512):
            diff = X[lo:lo + 512, None, :] - self.X_[None, :, :]
            d2 = np.einsum("ijk,ijk->ij", diff, diff)
            # ties go to the earlier training row
            nearest = np.argsort(d2, axis=1, kind="stable")[:, :k]
            out[lo:lo + 512] = self.y_[nearest].mean(axis=1)
        return out


def rbf_kernel(A, B, gamma):
    sq = (np.einsum("ij,ij->i", A, A)[:, None] + np.einsum("ij,ij->i", B, B)[None, :]
          - 2.0 * A @ B.T)
    return np.exp(-gamma * np.maximum(sq, 0.0))


class KernelRidge(_Regressor):
    """Dual ridge solve ``(K + alpha I) w = y`` with an RBF kernel."""

    kind = RegressorKind.KERNEL_RIDGE

    def __init__(self, alpha=1.0, gamma=0.1, seed=0):
        super().__init__(seed, alpha=float(alpha), gamma=float(gamma))

    def fit(self, X, y):
        X, y = self._check_fit(X, y)
        hp = self.hyperparameters
        K = rbf_kernel(X, X, hp["gamma"])
        K[np.diag_indices_from(K)] += hp["alpha"]
        try:
            w = scipy.linalg.cho_solve(scipy.linalg.cho_factor(K), y)
        except np.linalg.LinAlgError:
            try:
                w = scipy.linalg.solve(K, y, assume_a="sym")
            except (np.linalg.LinAlgError, scipy.linalg.LinAlgWarning) as exc:
                raise SingularKernel(f"kernel ridge solve failed: {exc}") from None
        if not np.all(np.isfinite(w)):
            raise SingularKernel("kernel ridge produced non-finite dual coefficients")
        self.X_, self.dual_coef_ = X.copy(), w
        return self

    def predict(self, X):
        X = self._check_predict(X)
        out = np.empty(X.shape[0])
        for lo in range(0, X.shape[0], 4096):
            out[lo:lo + 4096] = rbf_kernel(X[lo:lo + 4096], self.X_,
                                           self.hyperparameters["gamma"]) @ self.dual_coef_
        return out


CLASSES = {cls.kind: cls for cls in (RandomForest, GradientBoosting, KNN, KernelRidge)}


def fit_regressor(kind, X, y, hyperparameters, seed=0):
    kind = parse_kind(kind)
    required, optional = SCHEMA[kind]
    keys = set(hyperparameters)
    if not required <= keys or not keys <= required | optional:
        raise HyperparameterError(
            f"{kind.value}: hyperparameters {sorted(keys)} do not match schema "
            f"{sorted(required)} (+ optional {sorted(optional)})"
        )
    return CLASSES[kind](seed=seed, **hyperparameters).fit(X, y)


def predict(model, x):
    """Predict one row (returns a float) or a matrix of rows (returns an array)."""
    x = np.asarray(x, dtype=np.float64)
    out = model.predict(x)
    if not np.all(np.isfinite(out)):
        raise ModelError(f"{model.kind.value}: non-finite prediction")
    return float(out[0]) if x.ndim == 1 else out
