"""Downhill simplex (Nelder-Mead) minimizer.

Same scheme and defaults as the classic ``fmin``: reflection 1, expansion 2,
contraction 0.5, shrink 0.5; the starting simplex perturbs each nonzero
coordinate by 5% (zeros by 0.00025); iteration stops once both the simplex
spread in x and in f fall below their tolerances or after ``200 * n``
iterations/evaluations.  Non-finite objective values are treated as +inf so
the simplex retreats from invalid regions instead of propagating NaNs.
"""

from dataclasses import dataclass, field

import numpy as np

RHO, CHI, PSI, SIGMA = 1.0, 2.0, 0.5, 0.5
NONZDELT, ZDELT = 0.05, 0.00025


@dataclass
class SimplexResult:
    x: np.ndarray
    fun: float
    nit: int
    nfev: int
    converged: bool
    history: list = field(default_factory=list)  # best f after each iteration


def nelder_mead(func, x0, *, xtol=1e-4, ftol=1e-4, maxiter=None, maxfev=None):
    x0 = np.asarray(x0, dtype=float).ravel()
    n = x0.size
    maxiter = 200 * n if maxiter is None else maxiter
    maxfev = 200 * n if maxfev is None else maxfev
    nfev = 0

    def f(x):
        nonlocal nfev
        nfev += 1
        value = float(func(x))
        return value if np.isfinite(value) else np.inf

    sim = np.empty((n + 1, n))
    sim[0] = x0
    for k in range(n):
        y = x0.copy()
        y[k] = (1 + NONZDELT) * y[k] if y[k] != 0 else ZDELT
        sim[k + 1] = y
    fsim = np.array([f(x) for x in sim])

    order = np.argsort(fsim, kind="stable")
    sim, fsim = sim[order], fsim[order]
    history = [fsim[0]]
    it = 1
    converged = False

    while nfev < maxfev and it < maxiter:
        if (np.max(np.abs(sim[1:] - sim[0])) <= xtol
                and np.max(np.abs(fsim[0] - fsim[1:])) <= ftol):
            converged = True
            break

        centroid = sim[:-1].mean(axis=0)
        xr = (1 + RHO) * centroid - RHO * sim[-1]
        fxr = f(xr)
        shrink = False

        if fxr < fsim[0]:
            xe = (1 + RHO * CHI) * centroid - RHO * CHI * sim[-1]
            fxe = f(xe)
            if fxe < fxr:
                sim[-1], fsim[-1] = xe, fxe
            else:
                sim[-1], fsim[-1] = xr, fxr
        elif fxr < fsim[-2]:
            sim[-1], fsim[-1] = xr, fxr
        elif fxr < fsim[-1]:
            # outside contraction
            xc = (1 + PSI * RHO) * centroid - PSI * RHO * sim[-1]
            fxc = f(xc)
            if fxc <= fxr:
                sim[-1], fsim[-1] = xc, fxc
            else:
                shrink = True
        else:
            # inside contraction
            xcc = (1 - PSI) * centroid + PSI * sim[-1]
            fxcc = f(xcc)
            if fxcc < fsim[-1]:
                sim[-1], fsim[-1] = xcc, fxcc
            else:
                shrink = True

        if shrink:
            for j in range(1, n + 1):
                sim[j] = sim[0] + SIGMA * (sim[j] - sim[0])
                fsim[j] = f(sim[j])

        order = np.argsort(fsim, kind="stable")
        sim, fsim = sim[order], fsim[order]
        history.append(fsim[0])
        it += 1
    else:
        converged = (np.max(np.abs(sim[1:] - sim[0])) <= xtol
                     and np.max(np.abs(fsim[0] - fsim[1:])) <= ftol)

    return SimplexResult(sim[0].copy(), float(fsim[0]), it, nfev, bool(converged), history)
