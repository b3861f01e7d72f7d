"""Forecast metrics and ensembling of the two model families."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    EmptySubset,
    EnsembleError,
    LengthMismatch,
    MissingWeight,
    ZeroActual,
    ZeroRmse,
)

ML, POP = "ML", "Pop"
SUBSETS = ("ML", "Pop", "All")
METHODS = ("mean", "median", "wavg")


def _pair(pred, actual):
    pred = np.asarray(pred, dtype=float)
    actual = np.asarray(actual, dtype=float)
    if pred.shape != actual.shape:
        raise LengthMismatch(f"prediction shape {pred.shape} vs actual {actual.shape}")
    return pred, actual


def _relative_errors(pred, actual):
    pred, actual = _pair(pred, actual)
    zero = np.flatnonzero(actual == 0)
    if zero.size:
        raise ZeroActual(int(zero[0]) + 1)
    return (pred - actual) / np.abs(actual)


def mape(pred, actual):
    """Mean absolute percentage error as a fraction (0.1 == 10%)."""
    return float(np.mean(np.abs(_relative_errors(pred, actual))))


def rmse(pred, actual):
    pred, actual = _pair(pred, actual)
    return float(np.sqrt(np.mean((pred - actual) ** 2)))


def mpe(pred, actual):
    """Signed relative error per step."""
    return _relative_errors(pred, actual)


@dataclass
class ForecastSet:
    anchor: object
    forecasts: dict  # model id -> horizon-length array
    families: dict  # model id -> "ML" | "Pop"

    def __post_init__(self):
        lengths = {len(v) for v in self.forecasts.values()}
        if len(lengths) > 1:
            raise LengthMismatch(f"forecast horizons differ at anchor {self.anchor}: {sorted(lengths)}")
        missing = set(self.forecasts) - set(self.families)
        if missing:
            raise EnsembleError(f"no family tag for models {sorted(missing)}")
        self.forecasts = {k: np.asarray(v, dtype=float) for k, v in self.forecasts.items()}

    @property
    def horizon(self):
        return len(next(iter(self.forecasts.values())))

    def members(self, subset="All"):
        if subset == "All":
            ids = list(self.forecasts)
        elif subset in (ML, POP):
            ids = [m for m in self.forecasts if self.families[m] == subset]
        else:
            raise EnsembleError(f"unknown subset {subset!r}")
        return sorted(ids)


@dataclass
class EnsembleWeights:
    weights: dict

    def __post_init__(self):
        if any(w < 0 for w in self.weights.values()):
            raise EnsembleError("weights must be non-negative")
        total = sum(self.weights.values())
        if total <= 0:
            raise EnsembleError("weights sum to zero")
        self.weights = {k: v / total for k, v in self.weights.items()}

    def __getitem__(self, model):
        return self.weights[model]

    def __contains__(self, model):
        return model in self.weights


def wavg_weights(validation_rmse):
    """Weights proportional to the inverse validation RMSE of each model."""
    inv = {}
    for model, value in validation_rmse.items():
        if not value > 0:
            raise ZeroRmse(f"model {model!r} has validation RMSE {value}")
        inv[model] = 1.0 / value
    total = sum(inv.values())
    return EnsembleWeights({m: v / total for m, v in inv.items()})


def aggregate(fset, method="mean", subset="All", weights=None):
    """Element-wise combination of the member forecasts of ``subset``."""
    members = fset.members(subset)
    if not members:
        raise EmptySubset(f"no {subset} models at anchor {fset.anchor}")
    stack = np.stack([fset.forecasts[m] for m in members])
    if method == "mean":
        return stack.mean(axis=0)
    if method == "median":
        return np.median(stack, axis=0)
    if method == "wavg":
        if weights is None:
            raise MissingWeight(members[0])
        w = []
        for m in members:
            if m not in weights:
                raise MissingWeight(m)
            w.append(weights[m])
        w = np.asarray(w, dtype=float)
        if w.sum() <= 0:
            raise EnsembleError(f"weights of the {subset} subset sum to zero")
        return (w / w.sum()) @ stack
    raise EnsembleError(f"unknown aggregation method {method!r}")


def mpe_per_timestep(sets, actuals):
    """Per-family signed-error curves over forecast steps.

    ``actuals`` maps each set's anchor to the observed horizon.  Returns
    family -> {"mpe": curve, "std": across-model std per step}.  The family
    curve averages over anchors and members.
    """
    if not sets:
        raise EnsembleError("no forecast sets")
    horizons = {s.horizon for s in sets}
    if len(horizons) != 1:
        raise LengthMismatch(f"mixed horizons {sorted(horizons)}")
    per_model = {}
    family_of = {}
    for fset in sets:
        actual = actuals[fset.anchor]
        for model, pred in fset.forecasts.items():
            per_model.setdefault(model, []).append(mpe(pred, actual))
            family_of[model] = fset.families[model]
    out = {}
    for family in sorted(set(family_of.values())):
        models = sorted(m for m in per_model if family_of[m] == family)
        all_rows = np.concatenate([np.asarray(per_model[m]) for m in models])
        model_curves = np.stack([np.mean(per_model[m], axis=0) for m in models])
        out[family] = {"mpe": all_rows.mean(axis=0), "std": model_curves.std(axis=0)}
    return out


def mean_errors(forecasts, actuals):
    """Mean over anchors of per-forecast MAPE and RMSE, plus the per-step MPE curve.

    ``forecasts`` and ``actuals`` are aligned sequences of horizon arrays.
    """
    if len(forecasts) == 0:
        raise EnsembleError("no forecasts to score")
    if len(forecasts) != len(actuals):
        raise LengthMismatch(f"{len(forecasts)} forecasts vs {len(actuals)} actuals")
    mapes = [mape(p, a) for p, a in zip(forecasts, actuals)]
    rmses = [rmse(p, a) for p, a in zip(forecasts, actuals)]
    curve = np.mean([mpe(p, a) for p, a in zip(forecasts, actuals)], axis=0)
    return float(np.mean(mapes)), float(np.mean(rmses)), curve


def model_validation_rmse(sets, actuals):
    """Mean per-forecast RMSE of every model over the given sets."""
    scores = {}
    for fset in sets:
        for model, pred in fset.forecasts.items():
            scores.setdefault(model, []).append(rmse(pred, actuals[fset.anchor]))
    return {m: float(np.mean(v)) for m, v in scores.items()}


def evaluate(sets, actuals, method, subset, weights=None):
    """Score one (method, subset) aggregation over many anchors."""
    preds = [aggregate(s, method, subset, weights) for s in sets]
    return mean_errors(preds, [actuals[s.anchor] for s in sets])


def filter_anchors(sets, start=None, end=None):
    """Keep sets whose anchor lies in [start, end)."""
    return [s for s in sets
            if (start is None or s.anchor >= start) and (end is None or s.anchor < end)]
