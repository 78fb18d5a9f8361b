"""Numerical evidence for subexponentiality and long tails.

Each diagnostic evaluates a limit criterion along a grid of thresholds and
labels the trend. The labels are evidence gathered on a finite grid, not a
proof of membership in a class.

Integrals of the form ``int F(u - y) dF(y)`` are split at ``u/2`` and the
upper half is reflected (``z = u - y``), so both pieces have their mass near
the small argument where the integrand is well resolved. All integrands are
normalised by ``P(X > u)`` in log space before exponentiation.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import List

import numpy as np

from ._quad import integrate_expanding
from .dist_model import DistributionSpec, Gumbel
from .errors import DomainError, PreconditionError, QuadratureError, UnreliableRegionError

__all__ = [
    "CriterionTrajectory",
    "trend_verdict",
    "mitra_resnick_trajectory",
    "tony_integral_trajectory",
    "goldie_resnick_check",
    "long_tail_trajectory",
    "conv_square_ratio",
    "dominated_variation_trajectory",
    "stieltjes_integral",
]

WINDOW = 4
ZERO_FACTOR = 0.05
DIVERGE_FACTOR = 20.0
VERDICTS = ("tends_to_zero", "diverges", "inconclusive")


@dataclass
class CriterionTrajectory:
    """Values of a criterion along a threshold grid, with a trend label.

    The verdict is computed on ``|value - target|``: ``target`` is 0 for the
    integral criteria, 1 for the long-tail ratio and 2 for the convolution
    square. Grid points where the criterion is undefined are listed in
    ``skipped`` and left out of ``u_grid``.
    """

    u_grid: List[float]
    values: List[float]
    log_values: List[float]
    verdict: str
    criterion_id: str
    target: float = 0.0
    two_sided: bool = False
    skipped: List[str] = field(default_factory=list)

    def __post_init__(self):
        if not (len(self.u_grid) == len(self.values) == len(self.log_values)):
            raise ValueError("trajectory lengths differ")
        if self.verdict not in VERDICTS:
            raise ValueError(f"unknown verdict {self.verdict!r}")

    @property
    def final(self):
        return self.values[-1] if self.values else math.nan

    def rows(self):
        return list(zip(self.u_grid, self.values, self.log_values))

    def to_csv(self, fh=None):
        own = fh is None
        buf = io.StringIO() if own else fh
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(("u", "value", "log_value"))
        for u, v, lv in self.rows():
            wr.writerow((repr(float(u)), repr(float(v)), repr(float(lv))))
        return buf.getvalue() if own else None


def trend_verdict(log_dev):
    """Classify a sequence of log-deviations from the limit.

    ``tends_to_zero`` if the last ``min(4, n)`` deviations strictly decrease
    and the final one is below 5% of the first; ``diverges`` if they strictly
    increase and the final one exceeds 20 times the first; otherwise
    ``inconclusive``. Working with logs keeps the rule usable when the
    deviations underflow.
    """
    ld = [float(x) for x in log_dev]
    if len(ld) < 2 or any(math.isnan(x) for x in ld):
        return "inconclusive"
    k = min(WINDOW, len(ld))
    tail = ld[-k:]
    first, last = ld[0], ld[-1]
    down = all(b < a for a, b in zip(tail, tail[1:]))
    up = all(b > a for a, b in zip(tail, tail[1:]))
    if down and (last == -math.inf or last < first + math.log(ZERO_FACTOR)):
        return "tends_to_zero"
    if up and last > first + math.log(DIVERGE_FACTOR):
        return "diverges"
    return "inconclusive"


def _log_dev(values, log_values, target):
    if target == 0:
        return list(log_values)
    out = []
    for v in values:
        d = abs(v - target)
        out.append(math.log(d) if d > 0 else -math.inf)
    return out


def _make(grid, values, log_values, cid, target=0.0, two_sided=False, skipped=()):
    verdict = trend_verdict(_log_dev(values, log_values, target))
    return CriterionTrajectory(list(grid), list(values), list(log_values), verdict, cid,
                               float(target), two_sided, list(skipped))


def _grid(u_grid):
    g = [float(u) for u in u_grid]
    if not g:
        raise ValueError("u_grid is empty")
    if any(b <= a for a, b in zip(g, g[1:])):
        raise ValueError("u_grid must be strictly increasing")
    return g


def _require_infinite(d):
    if math.isfinite(d.support_hi):
        raise DomainError(f"{d.name} has a finite endpoint {d.support_hi}; criterion needs an infinite one")


def _exp(x):
    return math.exp(x) if x > -745.0 else 0.0


def _logsf(d, u):
    v = float(d.logsf(u))
    if v == -math.inf and d.log_survival is None:
        raise UnreliableRegionError(f"P(X > {u:g}) underflows for {d.name} and no log survival is available")
    return v


def _gumbel_w(d, grid):
    """Auxiliary function on the grid, checking that it visibly decays to 0."""
    if not isinstance(d.tail, Gumbel):
        raise PreconditionError(f"criterion needs a Gumbel-class law with an auxiliary function, got {d.tail.name}")
    w = [float(d.tail.w(u)) for u in grid]
    if any(not (x > 0 and math.isfinite(x)) for x in w):
        raise DomainError("auxiliary function is not positive and finite on the grid")
    decays = all(b < a for a, b in zip(w, w[1:])) and (len(w) == 1 or w[-1] < 0.5 * w[0])
    if not decays:
        raise PreconditionError("w(u) does not decrease towards 0 on the grid (w must vanish at infinity)")
    return w


# ----------------------------------------------------------------------------
# integrals against dF


def stieltjes_integral(g, d, a, b, *, rtol=1e-4, n0=64, n_max=1 << 16):
    """``int_(a,b] g(y) dF(y)`` from survival differences.

    Midpoint Riemann-Stieltjes sums on a uniform partition are refined by
    doubling, with a Richardson step, until two successive estimates agree
    to ``rtol``. Works for laws without a density.
    """
    if b <= a:
        return 0.0
    prev = None
    n = n0
    while n <= n_max:
        y = np.linspace(a, b, n + 1)
        mass = -np.diff(np.asarray(d.sf(y), dtype=float))
        mid = 0.5 * (y[:-1] + y[1:])
        s = float(np.dot(np.asarray(g(mid), dtype=float), mass))
        if prev is not None:
            est = (4.0 * s - prev[0]) / 3.0
            if prev[1] is not None and abs(est - prev[1]) <= rtol * abs(est):
                return est
            prev = (s, est)
        else:
            prev = (s, None)
        n *= 2
    raise QuadratureError("Stieltjes sum did not settle", estimate=prev[1] if prev else math.nan)


def _scale(d, x0):
    """A natural step length for integrands concentrated near ``x0``."""
    if isinstance(d.tail, Gumbel):
        w = float(d.tail.w(max(x0, 1.0)))
        if w > 0 and math.isfinite(w):
            return 1.0 / w
    return max(abs(x0), 1.0)


def _split_integral(d, u, a, b, lsu, what):
    """``int_a^b P(X > u - y) dF(y) / P(X > u)`` for ``0 <= a <= b <= u``.

    The piece above ``u/2`` is rewritten with ``z = u - y`` so that both
    integrands peak at their lower limit.
    """
    if b <= a:
        return 0.0
    mid = 0.5 * u
    total = 0.0
    if d.has_density:
        def low(y):
            return _exp(float(d.logsf(u - y)) + float(d.logpdf(y)) - lsu)

        def high(z):
            return _exp(float(d.logsf(z)) + float(d.logpdf(u - z)) - lsu)

        if a < mid:
            hi = min(b, mid)
            total += integrate_expanding(low, a, min(_scale(d, a), hi - a), hi, rtol=1e-9, what=what)[0]
        if b > mid:
            z0, z1 = u - b, u - max(a, mid)
            total += integrate_expanding(high, z0, min(_scale(d, z0), z1 - z0), z1, rtol=1e-9, what=what)[0]
        return total
    return stieltjes_integral(lambda y: np.exp(np.asarray(d.logsf(u - y)) - lsu), d, a, b)


# ----------------------------------------------------------------------------
# criteria


def mitra_resnick_trajectory(d: DistributionSpec, lam, u_grid):
    """``P(X > lam/w(u))**2 / P(X > u)`` along the grid.

    Tending to zero is sufficient for subexponentiality of a law in the
    Gumbel class with ``w(u) -> 0``.
    """
    lam = float(lam)
    if not lam > 0:
        raise ValueError("lambda must be positive")
    _require_infinite(d)
    grid = _grid(u_grid)
    w = _gumbel_w(d, grid)
    vals, logs = [], []
    for u, wu in zip(grid, w):
        lv = 2.0 * _logsf(d, lam / wu) - _logsf(d, u)
        logs.append(lv)
        vals.append(_exp(lv))
    return _make(grid, vals, logs, "mitra-resnick", two_sided=d.support_lo < 0)


def tony_integral_trajectory(d: DistributionSpec, lam, u_grid):
    """``int_{lam/w(u)}^{u - lam/w(u)} P(X > u - y) dF(y) / P(X > u)`` along the grid.

    For a Gumbel-class law with ``w(u) -> 0`` this vanishing in the limit is
    equivalent to subexponentiality. Points where the integration range is
    empty are skipped and reported in ``skipped``.
    """
    lam = float(lam)
    if not lam > 0:
        raise ValueError("lambda must be positive")
    _require_infinite(d)
    grid = _grid(u_grid)
    w = _gumbel_w(d, grid)
    kept, vals, logs, skipped = [], [], [], []
    for u, wu in zip(grid, w):
        a = max(lam / wu, d.support_lo, 0.0)
        b = u - lam / wu
        if not b > a:
            skipped.append(f"u={u!r}: empty integration range [{a:.6g}, {b:.6g}]")
            continue
        v = _split_integral(d, u, a, b, _logsf(d, u), "tony integral")
        kept.append(u)
        vals.append(v)
        logs.append(math.log(v) if v > 0 else -math.inf)
    return _make(kept, vals, logs, "tony-integral", two_sided=d.support_lo < 0, skipped=skipped)


def goldie_resnick_check(w, t, u_grid, *, margin=0.05, drift=0.1):
    """Does ``w(u)/w(t u)`` settle above ``1 + margin``?

    Returns ``(holds, trajectory)`` with the ratios as trajectory values.
    ``holds`` requires every ratio in the last ``min(4, n)`` grid points to
    exceed ``1 + margin`` and the excess over 1 to shrink by no more than the
    fraction ``drift`` across that window (a ratio still sliding towards 1
    does not count).
    """
    t = float(t)
    if not t > 1:
        raise ValueError("t must exceed 1")
    grid = _grid(u_grid)
    wu = np.array([float(w(u)) for u in grid])
    if np.any(~(wu > 0)):
        raise DomainError("w must be positive on the grid")
    k = min(WINDOW, len(grid))
    if np.any(np.diff(wu[-k:]) > 1e-12 * wu[-k:-1]):
        raise PreconditionError("w is increasing on the tail of the grid")
    ratios = [float(a / float(w(t * u))) for a, u in zip(wu, grid)]
    logs = [math.log(r) for r in ratios]
    traj = _make(grid, ratios, logs, "goldie-resnick", target=1.0)
    window = ratios[-k:]
    excess_first, excess_last = window[0] - 1.0, window[-1] - 1.0
    holds = min(window) > 1.0 + margin and excess_last >= (1.0 - drift) * excess_first
    return holds, traj


def long_tail_trajectory(d: DistributionSpec, y, u_grid):
    """``P(X > u + y) / P(X > u)`` along the grid; long-tailed laws give 1."""
    _require_infinite(d)
    grid = _grid(u_grid)
    y = float(y)
    vals, logs = [], []
    for u in grid:
        lv = _logsf(d, u + y) - _logsf(d, u)
        logs.append(lv)
        vals.append(_exp(lv))
    return _make(grid, vals, logs, "long-tail", target=1.0, two_sided=d.support_lo < 0)


def conv_square_ratio(d: DistributionSpec, u_grid):
    """``P(X1 + X2 > u) / P(X > u)`` along the grid; subexponential laws give 2.

    Uses ``P(X1 + X2 > u) = P(X > u) + int_0^u P(X > u - y) dF(y)``, which
    holds for nonnegative laws. A two-sided input is evaluated on its
    positive part (mass below 0 moved to 0) and flagged: for such laws the
    ratio tending to 2 does not by itself imply subexponentiality.
    """
    _require_infinite(d)
    grid = _grid(u_grid)
    two_sided = d.support_lo < 0
    lo = max(d.support_lo, 0.0)
    atom = float(d.cdf(0.0)) if two_sided else float(d.params.get("atom", 0.0))
    vals, logs = [], []
    for u in grid:
        lsu = _logsf(d, u)
        if u < 2.0 * lo:
            # both summands exceed lo, so the sum exceeds u surely
            logs.append(-lsu)
            vals.append(_exp(-lsu))
            continue
        top = u - lo
        # y in (u - lo, u]: the other summand always exceeds u - y
        edge = _exp(_logsf(d, top) - lsu) - 1.0 if top > lo else 0.0
        point = atom * _exp(_logsf(d, top) - lsu) if atom > 0 else 0.0
        inner = _split_integral(d, u, lo, top, lsu, "convolution square") if top > lo else 0.0
        v = 1.0 + max(edge, 0.0) + point + inner
        vals.append(v)
        logs.append(math.log(v))
    return _make(grid, vals, logs, "convolution-square", target=2.0, two_sided=two_sided)


def dominated_variation_trajectory(d: DistributionSpec, lam, u_grid):
    """``P(X > u/2) / P(X > u) * P(X > lam/w(u))`` along the grid.

    The variant of the integral criterion that stays valid for two-sided
    laws; vanishing in the limit indicates subexponentiality.
    """
    lam = float(lam)
    if not lam > 0:
        raise ValueError("lambda must be positive")
    _require_infinite(d)
    grid = _grid(u_grid)
    w = _gumbel_w(d, grid)
    vals, logs = [], []
    for u, wu in zip(grid, w):
        lv = _logsf(d, 0.5 * u) - _logsf(d, u) + _logsf(d, lam / wu)
        logs.append(lv)
        vals.append(_exp(lv))
    return _make(grid, vals, logs, "dominated-variation", two_sided=d.support_lo < 0)
