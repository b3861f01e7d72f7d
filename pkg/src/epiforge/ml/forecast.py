"""Recurrent multi-step forecasting.

Step k (target day n+k) feeds the model the k-1 earlier predictions as
lag_1..lag_{k-1}, observed cases n..n-14+k as lag_k..lag_14, and the
exogenous columns at day n+k-14.
"""

import numpy as np

from ..errors import InsufficientHistory
from ..features import EXOG_LAG, EXOG_SOURCE, N_LAGS, SCENARIO_EXOG


def _exog_matrix(panel, scenario, weekday):
    cols = [np.asarray(getattr(panel, EXOG_SOURCE[c]), dtype=float) for c in SCENARIO_EXOG[scenario]]
    if weekday:
        cols.append(np.array([d.isoweekday() for d in panel.days], dtype=float))
    if not cols:
        return np.zeros((len(panel.days), 0))
    return np.column_stack(cols)


def recurrent_forecast_many(model, panel, anchors, horizon=14, scenario=1, scaler=None, *,
                            n_lags=N_LAGS, exog_lag=EXOG_LAG, weekday=False):
    """Forecast ``horizon`` days after each anchor; returns shape (len(anchors), horizon).

    ``anchors`` are dates or panel indices.  With a ``scaler`` the inputs are
    standardized before the model sees them and outputs are mapped back to
    case counts; negative counts clamp to zero.
    """
    idx = np.array([a if isinstance(a, (int, np.integer)) else panel.index_of(a) for a in anchors],
                   dtype=np.int64)
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    if horizon > exog_lag:
        raise InsufficientHistory(f"horizon {horizon} would need exogenous data after the anchor")
    if idx.size and (idx.min() - n_lags + 1 < 0 or idx.min() + 1 - exog_lag < 0):
        raise InsufficientHistory("anchor lacks the lag history needed for the first step")
    if idx.size and idx.max() >= len(panel.days):
        raise InsufficientHistory("anchor beyond the panel calendar")

    cases = np.asarray(panel.cases, dtype=float)
    exog = _exog_matrix(panel, scenario, weekday)
    lags = np.stack([cases[idx - k + 1] for k in range(1, n_lags + 1)], axis=1)
    out = np.empty((idx.size, horizon))
    for step in range(1, horizon + 1):
        rows = np.hstack([lags, exog[idx + step - exog_lag]])
        if scaler is not None:
            rows = scaler.transform(rows)
        pred = np.asarray(model.predict(rows), dtype=float)
        if scaler is not None:
            pred = scaler.inverse_target(pred)
        pred = np.maximum(pred, 0.0)
        out[:, step - 1] = pred
        lags = np.hstack([pred[:, None], lags[:, :-1]])
    return out


def recurrent_forecast(model, panel, anchor, horizon=14, scenario=1, scaler=None, **kwargs):
    """Single-anchor version of :func:`recurrent_forecast_many`."""
    return recurrent_forecast_many(model, panel, [anchor], horizon, scenario, scaler, **kwargs)[0]
