"""Independent ground truth for product tails and densities.

Quadrature works on the mixture representations

    P(R S > u) = int_u^{r_F} P(S > u/y) dF(y)
    h(u)       = int_u^{r_F} y^-1 g(u/y) dF(y) = int_0^1 y^-1 f(u/y) dG(y)

with a change of variables chosen by the tail class of ``R``, because the
mass of the integrand piles up at the moving endpoint ``y = u``:

* Gumbel:  ``y = u + z / w(u)``
* Weibull: ``y = r_F - (r_F - u) t``
* Frechet: ``y = u e^v``

All integrands are divided by ``P(R > u)`` (in log space) so nothing
underflows when the answer is around 1e-300.
"""
from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import _mc
from ._quad import integrate_expanding, quad
from .asymptotics import FORMULAS, ApproxResult, ProductModel
from .dist_model import Frechet, Gumbel, MCEstimate
from .errors import ContractionError, DomainError, QuadratureError

__all__ = [
    "exact_tail_quadrature",
    "exact_density_quadrature",
    "exact_tail_nfold",
    "exact_mean_excess",
    "mc_tail",
    "convergence_report",
    "ConvergenceReport",
    "GridResolutionWarning",
]

RTOL = 1e-11


class GridResolutionWarning(UserWarning):
    """The tabulated n-fold survival failed its grid-doubling check."""


def _single(m):
    if not isinstance(m, ProductModel):
        raise TypeError("expected a ProductModel")
    if m.n != 1:
        raise DomainError(f"this oracle handles one factor, model has {m.n}")
    return m.r, m.factors[0]


def _kinks(s, u, lo, hi):
    """Points in ``y`` where ``P(S > u/y)`` or ``g(u/y)`` is not smooth."""
    out = []
    for b in (s.dist.support_lo, s.dist.support_hi):
        if b > 0:
            y = u / b
            if lo < y < hi:
                out.append(y)
    return out


def _atom_at_lo(r):
    lo = r.support_lo
    if lo <= 0:
        return 0.0
    return max(0.0, 1.0 - float(r.sf(lo)))


def _mixture_integral(r, u, weight, kinks, what):
    """``int_a^{r_F} weight(y) f(y) dy / P(R > a)`` with ``a = max(u, r.support_lo)``.

    Returns ``(integral, log P(R > a))``.
    """
    a = max(u, r.support_lo)
    la = float(r.logsf(a))
    if not math.isfinite(la):
        return 0.0, la
    top = r.support_hi
    tail = r.tail

    def f_rel(y):
        return math.exp(min(float(r.logpdf(y)) - la, 700.0))

    if isinstance(tail, Gumbel):
        w = float(tail.w(a))
        if not (w > 0 and math.isfinite(w)):
            raise DomainError(f"auxiliary function of {r.name} is not positive at {a}")
        fn = lambda z: weight(a + z / w) * f_rel(a + z / w) / w
        zk = [(y - a) * w for y in kinks]
        if math.isfinite(top):
            val, _ = quad(fn, 0.0, (top - a) * w, rtol=RTOL, points=zk, what=what)
        else:
            val, _ = integrate_expanding(fn, 0.0, 1.0, rtol=RTOL, points=zk, what=what)
    elif math.isfinite(top):
        span = top - a
        fn = lambda t: weight(top - span * t) * f_rel(top - span * t) * span
        tk = [(top - y) / span for y in kinks]
        val, _ = quad(fn, 0.0, 1.0, rtol=RTOL, points=tk, what=what)
    else:
        if isinstance(tail, Frechet) and tail.gamma > 0:
            h0 = 1.0 / tail.gamma
        else:
            h0 = 1.0
        fn = lambda v: weight(a * math.exp(v)) * f_rel(a * math.exp(v)) * a * math.exp(v)
        vk = [math.log(y / a) for y in kinks]
        val, _ = integrate_expanding(fn, 0.0, h0, rtol=RTOL, points=vk, what=what)
    return val, la


def exact_tail_quadrature(m, u, *, log=False):
    """``P(R S > u)`` by endpoint-aware adaptive quadrature (one factor).

    With ``log=True`` returns the natural log instead, which stays finite
    far below the double-precision range.
    """
    r, s = _single(m)
    u = float(u)
    fin = (lambda v: math.log(v) if v > 0 else -math.inf) if log else (lambda v: v)
    if u < r.support_lo * s.dist.support_lo:
        return fin(1.0)
    if s.dist.is_degenerate:
        s0 = s.dist.support_lo
        if s0 <= 0:
            return fin(0.0)
        return float(r.logsf(u / s0)) if log else float(r.sf(u / s0))
    if u >= r.support_hi * s.dist.support_hi:
        return fin(0.0)
    if not r.has_density:
        return fin(_tail_from_factor_density(r, s, u))

    def weight(y):
        return float(s.upper_tail(1.0 - u / y)) if y > u else 0.0

    a = max(u, r.support_lo)
    val, la = _mixture_integral(r, u, weight, _kinks(s, u, a, r.support_hi), "exact tail")
    atom = _atom_at_lo(r)
    if atom and r.support_lo > u:
        # point mass of R at its lower endpoint
        extra = atom * weight(r.support_lo)
        total = math.exp(la) * val + extra
        return fin(total)
    if log:
        return la + math.log(val) if val > 0 else -math.inf
    return math.exp(la) * val


def _tail_from_factor_density(r, s, u):
    if not s.dist.has_density:
        raise DomainError("neither the risk nor the factor has a density")
    lo = max(u / r.support_hi if math.isfinite(r.support_hi) else 0.0, s.dist.support_lo)
    fn = lambda t: float(r.sf(u / t)) * float(s.dist.pdf(t)) if t > 0 else 0.0
    pts = [u / r.support_lo] if r.support_lo > 0 else None
    val, _ = quad(fn, lo, s.dist.support_hi, rtol=RTOL, points=pts, what="exact tail")
    return val


def exact_density_quadrature(m, u, *, form="auto"):
    """Density of ``R S`` at ``u`` (one factor).

    ``form="factor"`` integrates ``y^-1 g(u/y) dF(y)``; ``form="risk"``
    integrates ``y^-1 f(u/y) dG(y)``. ``"auto"`` prefers the factor form.
    """
    r, s = _single(m)
    u = float(u)
    if form == "auto":
        if s.dist.has_density and r.has_density:
            form = "factor"
        elif r.has_density:
            form = "risk"
        elif s.dist.has_density:
            form = "factor"
        else:
            raise DomainError("neither the risk nor the factor has a density")
    if u <= 0 or u >= r.support_hi * s.dist.support_hi:
        return 0.0
    if form == "factor":
        if not s.dist.has_density:
            raise DomainError(f"{s.name} has no density")
        if not r.has_density:
            raise DomainError("factor-density form with a density-free risk is not supported")

        def weight(y):
            return float(s.dist.pdf(u / y)) / y if y >= u else 0.0

        a = max(u, r.support_lo)
        val, la = _mixture_integral(r, u, weight, _kinks(s, u, a, r.support_hi), "exact density")
        out = math.exp(la) * val
        atom = _atom_at_lo(r)
        if atom and r.support_lo > u:
            out += atom * weight(r.support_lo)
        return out
    if form == "risk":
        if not r.has_density:
            raise DomainError(f"{r.name} has no density")
        if s.dist.is_degenerate:
            s0 = s.dist.support_lo
            return float(r.pdf(u / s0)) / s0
        if not s.dist.has_density:
            raise DomainError(f"{s.name} has no density")
        lo = s.dist.support_lo
        if math.isfinite(r.support_hi):
            lo = max(lo, u / r.support_hi)
        hi = s.dist.support_hi
        if r.support_lo > 0:
            hi = min(hi, u / r.support_lo)
        fn = lambda t: float(r.pdf(u / t)) * float(s.dist.pdf(t)) / t
        val, _ = quad(fn, lo, hi, rtol=RTOL, what="exact density")
        return val
    raise ValueError(f"unknown form {form!r}")


# ---------------------------------------------------------------------------
# n-fold products
# ---------------------------------------------------------------------------


def _log_isf(r, logq):
    """Vectorised inverse of ``logsf`` by bisection (handles logq below -745)."""
    logq = np.asarray(logq, dtype=float)
    lo = np.full(logq.shape, r.support_lo)
    top = r.support_hi
    if math.isfinite(top):
        hi = np.full(logq.shape, top)
    else:
        h = max(1.0, abs(r.support_lo))
        b = r.support_lo + h
        while float(r.logsf(b)) > logq.min():
            h *= 2.0
            b = r.support_lo + h
        hi = np.full(logq.shape, b)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        above = np.asarray(r.logsf(mid)) > logq
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
        if np.all(hi - lo <= 4e-16 * np.abs(hi)):
            break
    return 0.5 * (lo + hi)


def _fold(nodes, t0, factors):
    """Fold factors into the tabulated survival ``t0`` (scaled) at ``nodes``."""
    mids = 0.5 * (nodes[1:] + nodes[:-1])
    t = t0
    for s in factors:
        dt = np.append(t[:-1] - t[1:], t[-1])
        ym = np.append(mids, nodes[-1])
        new = np.empty_like(t)
        rows = 256
        for i0 in range(0, len(nodes), rows):
            y = nodes[i0:i0 + rows, None]
            gap = (ym[None, :] - y) / ym[None, :]
            g = np.asarray(s.upper_tail(np.clip(gap, 0.0, 1.0)), dtype=float)
            g = np.where(gap > 0, g, 0.0)
            new[i0:i0 + rows] = g @ dt
        t = new
    return t


def _iterated(m, u, n_nodes, span):
    r = m.r
    if not r.has_density:
        raise DomainError("iterated n-fold oracle needs a continuous risk")
    factors = [s for s in m.factors if not s.dist.is_degenerate]
    for s in m.factors:
        if s.dist.is_degenerate:
            if s.dist.support_lo <= 0:
                return -math.inf, 0.0
            u = u / s.dist.support_lo
    if not factors:
        return float(r.logsf(u)), 0.0
    if u < m.support_lo:
        return 0.0, 0.0
    a = max(u, r.support_lo)
    la = float(r.logsf(a))
    if not math.isfinite(la):
        return la, 0.0
    levels = la - span * np.linspace(0.0, 1.0, n_nodes)
    nodes = _log_isf(r, levels)
    nodes[0] = a
    t0 = np.exp(np.asarray(r.logsf(nodes)) - la)
    fine = _fold(nodes, t0, factors)[0]
    half = _fold(nodes[::2], t0[::2], factors)[0]
    quarter = _fold(nodes[::4], t0[::4], factors)[0]
    if fine <= 0:
        return -math.inf, 0.0
    # midpoint error is O(h^(1+alpha)) for a factor tail ~ x^alpha at 1
    order = 1.0 + min([1.0] + [s.alpha for s in factors])
    denom = 2.0 ** order - 1.0
    est = fine + (fine - half) / denom
    coarser = half + (half - quarter) / denom
    rel_err = abs(est - coarser) / est
    return la + math.log(est), rel_err


def exact_tail_nfold(m, u, method="iterated", *, n_nodes=4097, span=60.0,
                     n_samples=10**6, seed=None, workers=1, log=False):
    """``P(R S_1 ... S_n > u)`` for any number of factors.

    ``method="iterated"`` folds one factor at a time into a survival table on
    nodes equally spaced in ``log P(R > y)`` (``span`` nats below ``u``),
    with a Stieltjes midpoint rule and Richardson extrapolation against the
    half-resolution grid (order ``1 + min(alpha_i, 1)``). The same
    extrapolation from the half and quarter grids gives the error estimate;
    a :class:`GridResolutionWarning` is issued when it exceeds 1e-4.
    ``method="montecarlo"`` returns an :class:`MCEstimate`.
    """
    if method == "montecarlo":
        if seed is None:
            raise ValueError("Monte Carlo needs an explicit seed")
        return mc_tail(m, u, n_samples, seed, workers=workers)
    if method != "iterated":
        raise ValueError(f"unknown method {method!r}")
    n_nodes = 4 * ((int(n_nodes) - 1) // 4) + 1
    lv, err = _iterated(m, float(u), n_nodes, span)
    if err > 1e-4:
        warnings.warn(f"n-fold grid error estimate {err:.2e} exceeds 1e-4 at u={u}",
                      GridResolutionWarning, stacklevel=2)
    if log:
        return lv
    return math.exp(lv) if lv > -745.2 else 0.0


def exact_mean_excess(m, u):
    """``E[X_n - u | X_n > u]`` by integrating the exact tail beyond ``u``.

    The integrand ``P(X_n > t) / P(X_n > u)`` is formed in log space; the
    step length starts at ``1/w(u)`` for a Gumbel-class risk.
    """
    u = float(u)
    tail_log = (lambda t: exact_tail_quadrature(m, t, log=True)) if m.n == 1 else (
        lambda t: exact_tail_nfold(m, t, log=True))
    lu = tail_log(u)
    if lu == -math.inf:
        raise DomainError(f"P(X > {u}) is zero; mean excess undefined")
    top = m.support_hi
    if isinstance(m.r.tail, Frechet) and m.r.tail.gamma <= 1:
        raise DomainError("mean excess is infinite for a tail index <= 1")
    if isinstance(m.r.tail, Gumbel) and math.isfinite(float(m.r.tail.w(u))) and float(m.r.tail.w(u)) > 0:
        h0 = 1.0 / float(m.r.tail.w(u))
    elif math.isfinite(top):
        h0 = (top - u) / 8.0
    else:
        h0 = max(u, 1.0)
    if math.isfinite(top):
        h0 = min(h0, top - u)

    def ratio(t):
        return math.exp(min(tail_log(t) - lu, 0.0))

    val, _ = integrate_expanding(ratio, u, h0, top, rtol=1e-10, what="mean excess")
    return val


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------


def sample_product(m, rng, size):
    x = m.r.sample(rng, size)
    for s in m.factors:
        x = x * s.dist.sample(rng, size)
    return x


def mc_tail(m, u, n_samples, seed, *, workers=1):
    """Seeded estimate of ``P(X_n > u)`` with a 95% interval."""
    n_samples = int(n_samples)
    if n_samples < 1000:
        raise ValueError("n_samples must be at least 1000")
    if seed is None:
        raise ValueError("Monte Carlo needs an explicit seed")
    u = float(u)
    if u < m.support_lo:
        return MCEstimate(1.0, 0.0, n_samples, int(seed), hits=n_samples)

    def count(rng, k):
        return int(np.count_nonzero(sample_product(m, rng, k) > u))

    hits = sum(_mc.run_chunks(count, n_samples, seed, workers=workers))
    return _mc.binomial_estimate(hits, n_samples, seed)


# ---------------------------------------------------------------------------
# Convergence reports
# ---------------------------------------------------------------------------

COLUMNS = ("u", "exact", "asympt", "ratio", "method")


@dataclass
class ConvergenceReport:
    u_grid: List[float]
    exact: List[float]
    asympt: List[float]
    ratio: List[float]
    method: str
    trend_ok: bool
    formula_id: str = ""
    model: str = ""
    half_width: List[float] = field(default_factory=list)
    gaps: List[str] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def rows(self):
        for j, u in enumerate(self.u_grid):
            yield (u, self.exact[j], self.asympt[j], self.ratio[j], self.method)

    def to_csv(self, fh=None):
        own = fh is None
        buf = io.StringIO() if own else fh
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(COLUMNS + ("formula_id",))
        for row in self.rows():
            wr.writerow([_fmt(x) for x in row[:4]] + [row[4], self.formula_id])
        return buf.getvalue() if own else None

    def to_text(self):
        doc = {
            "columns": list(COLUMNS),
            "rows": [[_fmt(x) for x in row[:4]] + [row[4]] for row in self.rows()],
            "formula_id": self.formula_id,
            "model": self.model,
            "trend_ok": self.trend_ok,
            "gaps": self.gaps,
            "meta": self.meta,
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _fmt(x):
    return repr(float(x)) if isinstance(x, (float, int, np.floating)) else str(x)


def _trend_ok(ratio, allowance):
    dev = [abs(r - 1.0) for r in ratio]
    k = min(4, len(dev))
    tail = dev[-k:]
    allow = allowance[-k:]
    if any(not math.isfinite(d) for d in tail):
        return False
    return all(tail[j + 1] <= tail[j] + allow[j] + allow[j + 1] + 1e-12 for j in range(k - 1))


def convergence_report(m, formula, u_grid, oracle_method="quadrature", *,
                       n_samples=10**6, seed=None, workers=1):
    """Tabulate exact vs asymptotic tail probabilities along ``u_grid``.

    ``formula`` is a callable ``(m, u) -> ApproxResult`` or a name from
    :data:`randcontract.asymptotics.FORMULAS`. ``oracle_method`` is
    ``"quadrature"`` (one factor; the iterated fold otherwise),
    ``"iterated"`` or ``"montecarlo"``.
    """
    if isinstance(formula, str):
        try:
            formula = FORMULAS[formula]
        except KeyError:
            raise ValueError(f"unknown formula {formula!r}") from None
    grid = [float(x) for x in u_grid]
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("u_grid must be strictly increasing")
    if oracle_method == "montecarlo" and seed is None:
        raise ValueError("Monte Carlo oracle needs a seed")
    exact, asympt, ratio, hw, gaps = [], [], [], [], []
    fid = getattr(formula, "__name__", "formula")
    for u in grid:
        lx = la = math.nan
        h = 0.0
        try:
            if oracle_method == "montecarlo":
                est = mc_tail(m, u, n_samples, seed, workers=workers)
                lx = math.log(est.value) if est.value > 0 else -math.inf
                h = est.half_width_95
            elif oracle_method == "quadrature" and m.n == 1:
                lx = exact_tail_quadrature(m, u, log=True)
            elif oracle_method in ("quadrature", "iterated"):
                lx = exact_tail_nfold(m, u, log=True)
            else:
                raise ValueError(f"unknown oracle method {oracle_method!r}")
        except (ContractionError, QuadratureError) as exc:
            gaps.append(f"u={u!r}: oracle: {exc}")
        try:
            res = formula(m, u)
            if isinstance(res, ApproxResult):
                fid = res.formula_id
                la = res.log_value
            else:
                la = math.log(float(res))
        except ContractionError as exc:
            gaps.append(f"u={u!r}: formula: {exc}")
        ex = math.exp(lx) if math.isfinite(lx) else (0.0 if lx == -math.inf else math.nan)
        asy = math.exp(la) if math.isfinite(la) else math.nan
        if math.isfinite(la) and lx == -math.inf:
            rt = 0.0
        else:
            rt = math.exp(lx - la) if math.isfinite(lx) and math.isfinite(la) else math.nan
        exact.append(ex)
        asympt.append(asy)
        ratio.append(rt)
        hw.append(h / asy if h and asy > 0 else 0.0)
    ok = not gaps and _trend_ok(ratio, hw)
    meta = {"oracle": oracle_method}
    if oracle_method == "montecarlo":
        meta.update(seed=int(seed), n_samples=int(n_samples))
    return ConvergenceReport(grid, exact, asympt, ratio, oracle_method, ok, fid,
                             m.describe(), hw, gaps, meta)
