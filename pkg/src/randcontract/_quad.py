"""Thin wrappers over QUADPACK used by the formula and oracle modules."""
from __future__ import annotations

import math
import warnings

from scipy import integrate

from .errors import QuadratureError


def quad(fn, a, b, *, rtol=1e-11, points=None, limit=400, what="integral"):
    """Adaptive Gauss-Kronrod on a finite interval; raises on non-convergence.

    Returns ``(value, abserr)``.
    """
    if b <= a:
        return 0.0, 0.0
    kw = {}
    if points is not None:
        pts = sorted(p for p in points if a < p < b)
        if pts:
            kw["points"] = pts
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(fn, a, b, epsabs=0.0, epsrel=rtol, limit=limit, **kw)
        except integrate.IntegrationWarning as exc:
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, err = integrate.quad(fn, a, b, epsabs=0.0, epsrel=rtol, limit=limit, **kw)
            # accept results that are good enough for the callers' 1e-8 contract
            if err <= 1e-9 * abs(val) or (val == 0.0 and err == 0.0):
                return val, err
            raise QuadratureError(f"{what}: {exc}", estimate=val, error_bound=err) from None
    return val, err


def integrate_expanding(fn, a, h0, b=math.inf, *, rtol=1e-11, max_panels=200,
                        points=None, what="integral"):
    """Integrate ``fn`` over ``[a, b)`` on geometrically widening panels.

    Panel ``k`` covers ``[a + h0*(2**k - 1), a + h0*(2**(k+1) - 1)]``. Stops
    once a panel adds less than ``rtol`` of the running total (two panels in a
    row) or ``b`` is reached. Meant for integrands that decay away from ``a``.
    """
    if not h0 > 0:
        raise ValueError("h0 must be positive")
    total, err = 0.0, 0.0
    lo = a
    small = 0
    for k in range(max_panels):
        hi = min(a + h0 * (2.0 ** (k + 1) - 1.0), b)
        v, e = quad(fn, lo, hi, rtol=rtol, points=points, what=what)
        total += v
        err += e
        if hi >= b:
            return total, err
        if abs(v) <= rtol * abs(total):
            small += 1
            if small >= 2:
                return total, err
        else:
            small = 0
        lo = hi
    raise QuadratureError(f"{what}: no decay after {max_panels} panels", estimate=total,
                          error_bound=math.inf)
