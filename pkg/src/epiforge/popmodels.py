"""Sigmoidal growth curves fitted to cumulative cases.

Closed forms (t in days since the window start)::

    Gompertz     p = exp(a/b + c e^{-bt})                 p' = a p - b p log p
    Logistic     p = 1 / (c e^{-at} + b/a)                p' = a p - b p^2
    Richards     p = (c e^{-at} + (b/a)^s)^{-1/s}         p' = (a/s) p (1 - (p b/a)^s)
    Bertalanffy  p = (a/b + c e^{-bt/4})^4                p' = a p^{3/4} - b p

Richards uses the asymptote a/b so that s = 1 reproduces the Logistic curve.

Starting points come from a three-point inversion.  Each closed form is an
affine function of ``A + C e^{-rt}`` after a transform ``g``:

    Gompertz     g = log p     r = b     A = a/b
    Logistic     g = 1/p       r = a     A = b/a
    Bertalanffy  g = p^{1/4}   r = b/4   A = a/b

With samples at t_i, t_i + h, t_i + 2h and alpha = (g_j - g_i)/(g_k - g_i),
alpha = 1/(1 + e^{-rh}) so r = -log((1 - alpha)/alpha)/h,
C = (g_j - g_i)/(e^{-r t_j} - e^{-r t_i}) and A = g_i - C e^{-r t_i}.
"""

from __future__ import annotations

import datetime as dt
import enum
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateWindow,
    OptimizerDiverged,
    ParamDomain,
    PopModelError,
    WindowLengthError,
)
from .simplex import nelder_mead

DEFAULT_WINDOW = 30
RICHARDS_BASE_FLOOR = 1e-12
FALLBACK = (1.0, 0.1, -1.0)


class GrowthModelKind(str, enum.Enum):
    GOMPERTZ = "gompertz"
    LOGISTIC = "logistic"
    RICHARDS = "richards"
    BERTALANFFY = "bertalanffy"

    @property
    def n_params(self):
        return 4 if self is GrowthModelKind.RICHARDS else 3


KINDS = list(GrowthModelKind)


@dataclass(frozen=True)
class GrowthParams:
    a: float
    b: float
    c: float
    s: float | None = None

    @property
    def p_inf(self):
        """Richards asymptote."""
        return self.a / self.b

    def as_array(self):
        vals = [self.a, self.b, self.c] + ([self.s] if self.s is not None else [])
        return np.array(vals, dtype=float)

    @classmethod
    def from_array(cls, kind, x):
        x = [float(v) for v in x]
        if GrowthModelKind(kind) is GrowthModelKind.RICHARDS:
            return cls(x[0], x[1], x[2], x[3])
        return cls(x[0], x[1], x[2])


def _check(kind, params):
    if kind is GrowthModelKind.LOGISTIC or kind is GrowthModelKind.RICHARDS:
        if params.a == 0:
            raise ParamDomain(f"{kind.value}: a must be nonzero")
    else:
        if params.b == 0:
            raise ParamDomain(f"{kind.value}: b must be nonzero")
    if kind is GrowthModelKind.RICHARDS:
        if params.s is None or not params.s > 0:
            raise ParamDomain(f"richards: s must be positive, got {params.s}")


def _curve(kind, x, t, guard):
    t = np.asarray(t, dtype=float)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        if kind is GrowthModelKind.GOMPERTZ:
            a, b, c = x
            return np.exp(a / b + c * np.exp(-b * t))
        if kind is GrowthModelKind.LOGISTIC:
            a, b, c = x
            return 1.0 / (c * np.exp(-a * t) + b / a)
        if kind is GrowthModelKind.BERTALANFFY:
            a, b, c = x
            return (a / b + c * np.exp(-b * t / 4.0)) ** 4
        a, b, c, s = x
        base = c * np.exp(-a * t) + np.power(b / a, s)
        if guard:
            base = np.maximum(base, RICHARDS_BASE_FLOOR)
        elif np.any(~(base > 0)):
            raise ParamDomain("richards: non-positive base raised to -1/s")
        return np.power(base, -1.0 / s)


def evaluate_curve(kind, params, t):
    """Cumulative cases predicted at times ``t``."""
    kind = GrowthModelKind(kind)
    _check(kind, params)
    return _curve(kind, params.as_array(), t, guard=False)


def ode_rhs(kind, params, p):
    """Right-hand side of the growth ODE evaluated at population ``p``."""
    kind = GrowthModelKind(kind)
    p = np.asarray(p, dtype=float)
    a, b = params.a, params.b
    if kind is GrowthModelKind.GOMPERTZ:
        return a * p - b * p * np.log(p)
    if kind is GrowthModelKind.LOGISTIC:
        return a * p - b * p**2
    if kind is GrowthModelKind.RICHARDS:
        s = params.s
        return (a / s) * p * (1.0 - (p * b / a) ** s)
    return a * p**0.75 - b * p


# --- initialization -------------------------------------------------------

_TRANSFORMS = {
    GrowthModelKind.GOMPERTZ: np.log,
    GrowthModelKind.LOGISTIC: lambda p: 1.0 / p,
    GrowthModelKind.BERTALANFFY: lambda p: p**0.25,
}


def three_points(length):
    """Sample instants (first, middle, last) with equal spacing."""
    if length < 3:
        raise DegenerateWindow(f"window of {length} points; need at least 3")
    h = (length - 1) // 2
    return 0, h, 2 * h


def estimate_initial(kind, window):
    """Closed-form starting parameters from three samples of ``window``."""
    kind = GrowthModelKind(kind)
    if kind not in _TRANSFORMS:
        raise ValueError("richards starts from a fitted logistic; use fit_population_model")
    p = np.asarray(window, dtype=float)
    ti, tj, tk = three_points(p.size)
    h = tj - ti
    pi, pj, pk = p[ti], p[tj], p[tk]
    if not (0 < pi < pj < pk):
        raise DegenerateWindow(f"samples {pi}, {pj}, {pk} are not positive and strictly increasing")

    g = _TRANSFORMS[kind]
    gi, gj, gk = g(pi), g(pj), g(pk)
    alpha = (gj - gi) / (gk - gi)
    if not (0 < alpha < 1) or alpha == 0.5:
        raise DegenerateWindow(f"alpha={alpha!r} gives no finite nonzero rate")
    r = -np.log((1 - alpha) / alpha) / h
    C = (gj - gi) / (np.exp(-r * tj) - np.exp(-r * ti))
    A = gi - C * np.exp(-r * ti)

    if kind is GrowthModelKind.GOMPERTZ:
        b = r
        return GrowthParams(a=float(b * A), b=float(b), c=float(C))
    if kind is GrowthModelKind.LOGISTIC:
        a = r
        return GrowthParams(a=float(a), b=float(a * A), c=float(C))
    b = 4.0 * r
    return GrowthParams(a=float(b * A), b=float(b), c=float(C))


def fallback_initial(kind, first_value):
    """Default start (a=1, b=0.1) with c chosen so that p(0) equals ``first_value``."""
    kind = GrowthModelKind(kind)
    a, b, c = FALLBACK
    p0 = float(first_value)
    if p0 > 0:
        if kind is GrowthModelKind.GOMPERTZ:
            c = np.log(p0) - a / b
        elif kind is GrowthModelKind.BERTALANFFY:
            c = p0**0.25 - a / b
        else:
            c = 1.0 / p0 - b / a
    s = 1.0 if kind is GrowthModelKind.RICHARDS else None
    return GrowthParams(a, b, float(c), s)


# --- fitting --------------------------------------------------------------

@dataclass
class GrowthModelFit:
    kind: GrowthModelKind
    params: GrowthParams
    length: int
    sse: float
    converged: bool
    window_start: dt.date | None = None
    initialized_by: str = "three-point"

    @property
    def window_end(self):
        if self.window_start is None:
            return None
        return self.window_start + dt.timedelta(days=self.length - 1)

    def curve(self, t):
        return _curve(self.kind, self.params.as_array(), t, guard=True)

    def to_dict(self):
        out = {"kind": self.kind.value, "a": self.params.a, "b": self.params.b, "c": self.params.c}
        if self.params.s is not None:
            out["s"] = self.params.s
        out.update(
            sse=self.sse,
            window_start=self.window_start.isoformat() if self.window_start else None,
            window_end=self.window_end.isoformat() if self.window_end else None,
            converged=self.converged,
        )
        return out

    @classmethod
    def from_dict(cls, d):
        kind = GrowthModelKind(d["kind"])
        params = GrowthParams(d["a"], d["b"], d["c"], d.get("s"))
        start = dt.date.fromisoformat(d["window_start"]) if d.get("window_start") else None
        end = dt.date.fromisoformat(d["window_end"]) if d.get("window_end") else None
        length = (end - start).days + 1 if start and end else kind.n_params
        return cls(kind, params, length, d["sse"], d["converged"], start)


def _sse_objective(kind, t, data):
    def sse(x):
        if kind is GrowthModelKind.RICHARDS and not x[3] > 0:
            return np.inf
        if x[0] == 0 or x[1] == 0:
            return np.inf
        resid = _curve(kind, x, t, guard=True) - data
        return float(resid @ resid)
    return sse


def fit_population_model(kind, window, *, window_length=DEFAULT_WINDOW, window_start=None,
                         xtol=1e-4, ftol=1e-4):
    """Least-squares fit of one growth curve to a cumulative window."""
    kind = GrowthModelKind(kind)
    data = np.asarray(window, dtype=float)
    if data.size != window_length:
        raise WindowLengthError(f"window has {data.size} points; expected {window_length}")
    if np.any(np.diff(data) < 0):
        raise PopModelError("cumulative window must be non-decreasing")
    t = np.arange(data.size, dtype=float)

    how = "three-point"
    if kind is GrowthModelKind.RICHARDS:
        logistic = fit_population_model(GrowthModelKind.LOGISTIC, data, window_length=window_length,
                                        xtol=xtol, ftol=ftol)
        p = logistic.params
        x0 = np.array([p.a, p.b, p.c, 1.0])
        how = "logistic-fit"
    else:
        try:
            x0 = estimate_initial(kind, data).as_array()
        except DegenerateWindow:
            x0 = fallback_initial(kind, data[0]).as_array()
            how = "fallback"

    objective = _sse_objective(kind, t, data)
    if not np.isfinite(objective(x0)):
        x0 = fallback_initial(kind, data[0]).as_array()
        how = "fallback"
        if not np.isfinite(objective(x0)):
            raise OptimizerDiverged(f"{kind.value}: objective not finite at the starting point")
    res = nelder_mead(objective, x0, xtol=xtol, ftol=ftol)
    if not np.isfinite(res.fun):
        raise OptimizerDiverged(f"{kind.value}: optimizer ended at a non-finite objective")
    return GrowthModelFit(kind, GrowthParams.from_array(kind, res.x), data.size, res.fun,
                          res.converged, window_start, how)


def forecast_population(fit, horizon=14, *, clamp=True):
    """Daily new cases for the ``horizon`` days following the window."""
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    end = fit.length - 1
    t = np.arange(end, end + horizon + 1, dtype=float)
    p = fit.curve(t)
    daily = np.diff(p)
    if not np.all(np.isfinite(daily)):
        raise OptimizerDiverged(f"{fit.kind.value}: non-finite forecast")
    return np.maximum(daily, 0.0) if clamp else daily


def window_cumulative(cases, anchor_index, length=DEFAULT_WINDOW):
    """Cumulative cases of the ``length`` days ending at ``anchor_index``, counted from the window start."""
    start = anchor_index - length + 1
    if start < 0:
        raise WindowLengthError(f"anchor index {anchor_index} has fewer than {length} prior days")
    return np.cumsum(np.asarray(cases[start:anchor_index + 1], dtype=float))
