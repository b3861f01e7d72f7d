"""Shapley attributions for the one-step regressors.

A coalition S is evaluated by keeping the instance's values on S and setting
every other feature to the background mean, so ``v(empty)`` is the prediction
at the background mean and efficiency reads ``sum(phi) = f(x) - v(empty)``.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import SchemaMismatch, TooManyFeatures, UnknownFeature

MAX_EXACT_FEATURES = 12
_MAX_BATCH_ROWS = 200_000


def _predict(model, X):
    fn = model.predict if hasattr(model, "predict") else model
    return np.asarray(fn(np.asarray(X, dtype=float)), dtype=float).ravel()


def baseline_row(background):
    background = np.asarray(background, dtype=float)
    return background.mean(axis=0) if background.ndim == 2 else background


def base_value(model, background):
    return float(_predict(model, baseline_row(background)[None, :])[0])


def shapley_exact(model, instance, background):
    """Exact Shapley values by enumerating every coalition."""
    x = np.asarray(instance, dtype=float)
    d = x.size
    if d > MAX_EXACT_FEATURES:
        raise TooManyFeatures(f"{d} features; exact enumeration is limited to {MAX_EXACT_FEATURES}")
    base = baseline_row(background)
    masks = np.arange(1 << d)
    bits = ((masks[:, None] >> np.arange(d)) & 1).astype(bool)
    rows = np.where(bits, x, base)
    v = _predict(model, rows)

    size = bits.sum(axis=1)
    fact = np.array([math.factorial(k) for k in range(d + 1)], dtype=float)
    weight = fact[size] * fact[d - 1 - np.minimum(size, d - 1)] / fact[d]
    phi = np.empty(d)
    for i in range(d):
        without = ~bits[:, i]
        S = masks[without]
        phi[i] = np.sum(weight[without] * (v[S | (1 << i)] - v[S]))
    return phi


def _permutation_rows(x, base, perms):
    """Rows for walking each permutation from the baseline to ``x``."""
    n_perm, d = perms.shape
    rows = np.repeat(base[None, None, :], n_perm * (d + 1), axis=0).reshape(n_perm, d + 1, d)
    for j in range(d):
        cols = perms[:, j]
        # from step j+1 onwards the j-th feature of the permutation is switched on
        rows[np.arange(n_perm)[:, None], np.arange(j + 1, d + 1)[None, :], cols[:, None]] = \
            x[cols][:, None]
    return rows.reshape(-1, d)


def _accumulate(perms, v, d):
    n_perm = perms.shape[0]
    v = v.reshape(n_perm, d + 1)
    gains = np.diff(v, axis=1)
    phi = np.zeros(d)
    np.add.at(phi, perms.ravel(), gains.ravel())
    return phi / n_perm


def shapley_sampled(model, instance, background, n_permutations=1000, seed=0, *, exhaustive=False):
    """Monte Carlo Shapley values from uniformly drawn feature orderings.

    With ``exhaustive=True`` every one of the d! orderings is walked once and
    ``n_permutations`` is ignored.
    """
    x = np.asarray(instance, dtype=float)
    d = x.size
    base = baseline_row(background)
    if exhaustive:
        perms = np.array(list(itertools.permutations(range(d))), dtype=np.int64)
    else:
        if n_permutations < 1:
            raise ValueError("n_permutations must be at least 1")
        rng = np.random.default_rng(seed)
        perms = np.argsort(rng.random((n_permutations, d)), axis=1)
    per_chunk = max(1, _MAX_BATCH_ROWS // (d + 1))
    phi = np.zeros(d)
    for lo in range(0, perms.shape[0], per_chunk):
        chunk = perms[lo:lo + per_chunk]
        v = _predict(model, _permutation_rows(x, base, chunk))
        phi += _accumulate(chunk, v, d) * chunk.shape[0]
    return phi / perms.shape[0]


def shapley_matrix(model, rows, background, *, n_permutations=100, seed=0, exact=False):
    """Attributions for every row; instance i draws from its own spawned seed."""
    rows = np.asarray(rows, dtype=float)
    if exact:
        return np.stack([shapley_exact(model, r, background) for r in rows])
    seeds = np.random.SeedSequence(seed).spawn(len(rows))
    return np.stack([
        shapley_sampled(model, r, background, n_permutations, np.random.default_rng(s))
        for r, s in zip(rows, seeds)
    ])


@dataclass
class AttributionReport:
    features: list
    values: dict  # model name -> (n_rows, n_features) Shapley matrix
    base_values: dict  # model name -> prediction at the background mean
    mean_abs: dict  # model name -> per-feature mean |phi|
    importance: np.ndarray  # cross-model mean of mean |phi|
    std: np.ndarray  # cross-model standard deviation
    normalized: bool = False

    def ranking(self):
        return [self.features[i] for i in np.argsort(-self.importance, kind="stable")]

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["feature", "mean_abs_shap", "std_across_models"])
            for name, imp, sd in zip(self.features, self.importance, self.std):
                w.writerow([name, repr(float(imp)), repr(float(sd))])


def importance_summary(models, rows, background, features, *, n_permutations=100, seed=0,
                       exact=False, normalize=True, values=None):
    """Mean |SHAP| per feature for each model, then averaged across models.

    ``models`` maps a name to a fitted model (or callable).  Precomputed
    Shapley matrices may be passed through ``values`` to skip recomputation.
    With ``normalize`` the cross-model importances (and their std) are
    divided by the largest importance.
    """
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2 or rows.shape[1] != len(features):
        raise SchemaMismatch(f"rows have shape {rows.shape}; expected {len(features)} features")
    for name, model in models.items():
        width = getattr(model, "n_features", None)
        if width is not None and width != len(features):
            raise SchemaMismatch(f"model {name} expects {width} features, schema has {len(features)}")
    values = dict(values or {})
    bases, mean_abs = {}, {}
    for i, (name, model) in enumerate(sorted(models.items())):
        if name not in values:
            values[name] = shapley_matrix(model, rows, background, n_permutations=n_permutations,
                                          seed=seed + i, exact=exact)
        bases[name] = base_value(model, background)
        mean_abs[name] = np.abs(values[name]).mean(axis=0)
    stack = np.stack([mean_abs[n] for n in sorted(mean_abs)])
    importance, std = stack.mean(axis=0), stack.std(axis=0)
    if normalize and importance.max() > 0:
        scale = importance.max()
        importance, std = importance / scale, std / scale
    return AttributionReport(list(features), values, bases, mean_abs, importance, std,
                             normalize and stack.max() > 0)


def dependence_export(model, rows, feature, features, background, *, raw_rows=None,
                      shap_values=None, n_permutations=100, seed=0):
    """(raw feature value, Shapley value) for every row.

    ``raw_rows`` supplies the unscaled values to report when ``rows`` are in
    model (standardized) space.
    """
    if feature not in features:
        raise UnknownFeature(f"feature {feature!r} not in {list(features)}")
    j = list(features).index(feature)
    rows = np.asarray(rows, dtype=float)
    if shap_values is None:
        shap_values = shapley_matrix(model, rows, background, n_permutations=n_permutations, seed=seed)
    raw = np.asarray(raw_rows if raw_rows is not None else rows, dtype=float)
    if raw.shape[0] != rows.shape[0]:
        raise SchemaMismatch("raw rows and model rows differ in count")
    return [(float(raw[i, j]), float(shap_values[i, j])) for i in range(rows.shape[0])]


def write_dependence_csv(pairs, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["raw_value", "shap_value"])
        for raw, phi in pairs:
            w.writerow([repr(raw), repr(phi)])
