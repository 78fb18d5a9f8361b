"""Discrete-time insurance model with a risky investment.

Wealth evolves as ``U_i = U_{i-1} / S_i - R_i`` where ``R_i`` is the net
loss of period ``i`` and

    S_i = 1 / ((1 - pi_i)(1 + delta_i) + pi_i / Y_i)

is the discount factor of a portfolio holding the fraction ``pi_i`` in a
stock with random discount factor ``Y_i = 1 / (1 + Delta_i)`` and the rest in
a bond paying ``delta_i``. Ruin by time ``n`` is ruin of the recursion, and
it is tail-equivalent to a sum of random-contraction tails.

Every ``S_i`` is bounded by ``s_i = 1 / ((1 - pi_i)(1 + delta_i))`` and
``S_i / s_i = Y_i / (Y_i + pi_i s_i)`` lives on ``(0, 1)``; that normalised
factor is what the oracle and the asymptotic formula work with.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import List, Sequence, Union

import numpy as np
from scipy.special import logsumexp

from . import _mc
from .asymptotics import ProductModel
from .dist_model import DistributionSpec, Frechet, Gumbel, MCEstimate, ScalingSpec, Weibull, make_builtin
from .errors import DomainError, ParameterError, PreAsymptoticError, RarityError
from .oracle import exact_tail_nfold, exact_tail_quadrature

__all__ = [
    "RiskModel",
    "RuinResult",
    "simulate_wealth_path",
    "ruin_prob_mc",
    "ruin_term_sum",
    "ruin_asymptotic",
    "discount_factor_law",
    "iff_ratio",
    "ruin_rows_csv",
]

MIN_PATHS = 10_000
RUIN_COLUMNS = ("u0", "n", "method", "value", "ci_lo", "ci_hi")


def _as_list(x, n, name):
    if isinstance(x, (list, tuple)):
        if len(x) != n:
            raise ParameterError(f"{name} has length {len(x)}, horizon is {n}")
        return list(x)
    return [x] * n


@dataclass(frozen=True)
class RiskModel:
    """Horizon-``n`` model; scalar ``upsilon``, ``pi`` or ``delta`` are broadcast.

    ``subexponential`` records the caller's assertion that the net-loss law
    is subexponential, which the asymptotic formula relies on (see
    :mod:`randcontract.subexp` for numerical evidence).
    """

    net_loss: DistributionSpec
    upsilon: Sequence[DistributionSpec]
    pi: Sequence[float]
    delta: Sequence[float]
    horizon: int = 1
    subexponential: bool = True

    def __post_init__(self):
        n = int(self.horizon)
        if n < 1:
            raise ParameterError("horizon must be at least 1")
        object.__setattr__(self, "horizon", n)
        ups = _as_list(self.upsilon, n, "upsilon")
        pis = [float(p) for p in _as_list(self.pi, n, "pi")]
        dels = [float(d) for d in _as_list(self.delta, n, "delta")]
        for p in pis:
            if not 0.0 <= p < 1.0:
                raise ParameterError(f"stock fraction must lie in [0, 1), got {p}")
        for d in dels:
            if not d > -1.0:
                raise ParameterError(f"bond rate must exceed -1, got {d}")
        for y in ups:
            if y.support_lo < 0:
                raise ParameterError(f"discount factor {y.name} must be positive")
        object.__setattr__(self, "upsilon", tuple(ups))
        object.__setattr__(self, "pi", tuple(pis))
        object.__setattr__(self, "delta", tuple(dels))

    @property
    def s_hat(self):
        return [1.0 / ((1.0 - p) * (1.0 + d)) for p, d in zip(self.pi, self.delta)]

    @property
    def alphas(self):
        out = []
        for y in self.upsilon:
            if not isinstance(y.tail, Frechet):
                raise DomainError(f"discount factor {y.name} is not regularly varying")
            out.append(y.tail.gamma)
        return out

    def thresholds(self, u0):
        """``u_k = u0 * prod_{i<=k} 1/s_i`` for ``k = 1..n``."""
        out, acc = [], float(u0)
        for s in self.s_hat:
            acc /= s
            out.append(acc)
        return out

    @classmethod
    def from_config(cls, cfg):
        """Build from a mapping such as ``{"net_loss": {"family": "kotz", ...},
        "upsilon": {"family": "pareto", "gamma": 1}, "pi": 0.5, "delta": 0.05,
        "horizon": 1}``."""

        def law(spec):
            if isinstance(spec, DistributionSpec):
                return spec
            spec = dict(spec)
            return make_builtin(spec.pop("family"), **spec)

        try:
            n = int(cfg.get("horizon", 1))
            ups = cfg["upsilon"]
            ups = [law(u) for u in ups] if isinstance(ups, list) else law(ups)
            return cls(net_loss=law(cfg["net_loss"]), upsilon=ups, pi=cfg.get("pi", 0.0),
                       delta=cfg.get("delta", 0.0), horizon=n,
                       subexponential=bool(cfg.get("subexponential", True)))
        except KeyError as exc:
            raise ParameterError(f"risk model config is missing {exc}") from None


@dataclass(frozen=True)
class RuinResult:
    u: float
    n: int
    estimate: Union[MCEstimate, float]
    method: str

    @property
    def value(self):
        return self.estimate.value if isinstance(self.estimate, MCEstimate) else float(self.estimate)

    def row(self):
        if isinstance(self.estimate, MCEstimate):
            lo, hi = self.estimate.ci_lo, self.estimate.ci_hi
        else:
            lo = hi = math.nan
        return (self.u, self.n, self.method, self.value, lo, hi)


def ruin_rows_csv(results, fh=None):
    own = fh is None
    buf = io.StringIO() if own else fh
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(RUIN_COLUMNS)
    for r in results:
        u, n, method, v, lo, hi = r.row()
        wr.writerow((repr(float(u)), n, method, repr(float(v)), repr(float(lo)), repr(float(hi))))
    return buf.getvalue() if own else None


# ----------------------------------------------------------------------------
# simulation


def _draw_step(model, i, rng, size):
    r = model.net_loss.sample(rng, size)
    y = model.upsilon[i].sample(rng, size)
    if np.any(~(y > 0)):
        raise DomainError(f"discount factor {model.upsilon[i].name} produced a nonpositive sample")
    growth = (1.0 - model.pi[i]) * (1.0 + model.delta[i]) + model.pi[i] / y
    return r, growth


def simulate_wealth_path(model: RiskModel, u0, seed):
    """One wealth path ``[U_0, ..., U_n]`` from a seeded generator."""
    u0 = float(u0)
    if u0 < 0:
        raise ParameterError("initial wealth must be nonnegative")
    rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
    path = [u0]
    for i in range(model.horizon):
        r, g = _draw_step(model, i, rng, 1)
        path.append(float(g[0] * path[-1] - r[0]))
    return path


def ruin_prob_mc(model: RiskModel, u0, n_paths, seed, *, workers=1):
    """Fraction of simulated paths that dip below zero by the horizon.

    Raises :class:`RarityError` when no path is ruined: the probability is
    then below what the sample can resolve, and the term sum or asymptotic
    formula should be used instead.
    """
    u0 = float(u0)
    n_paths = int(n_paths)
    if u0 < 0:
        raise ParameterError("initial wealth must be nonnegative")
    if n_paths < MIN_PATHS:
        raise ParameterError(f"n_paths must be at least {MIN_PATHS}")

    def count(rng, k):
        wealth = np.full(k, u0)
        ruined = np.zeros(k, dtype=bool)
        for i in range(model.horizon):
            r, g = _draw_step(model, i, rng, k)
            wealth = g * wealth - r
            ruined |= wealth < 0
        return int(np.count_nonzero(ruined))

    hits = sum(_mc.run_chunks(count, n_paths, seed, workers=workers))
    if hits == 0:
        raise RarityError(f"no ruined path among {n_paths} at u0={u0:g}; probability below MC resolution")
    return RuinResult(u0, model.horizon, _mc.binomial_estimate(hits, n_paths, seed), "montecarlo")


# ----------------------------------------------------------------------------
# term sum and asymptotics


def discount_factor_law(upsilon: DistributionSpec, c):
    """Law of ``V = Y / (Y + c)`` on ``(0, 1)`` as a :class:`ScalingSpec`.

    ``P(V > 1 - x) = P(Y > c (1 - x) / x)``; when ``Y`` is regularly varying
    with index ``alpha`` so is ``V`` at 1, with slowly varying part
    ``L(x) = P(V > 1 - 1/x) x**alpha`` evaluated exactly.
    """
    c = float(c)
    if c == 0.0:
        return ScalingSpec(make_builtin("degenerate", value=1.0), 0.0, lambda x: np.ones_like(np.asarray(x, dtype=float)),
                           False)
    if not isinstance(upsilon.tail, Frechet):
        raise DomainError(f"discount factor {upsilon.name} is not regularly varying")
    alpha = upsilon.tail.gamma

    def back(v):
        v = np.asarray(v, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return c * v / (1.0 - v)

    def gap(x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(x >= 1.0, 1.0, upsilon.sf(c * (1.0 - x) / x))

    def logsf(v):
        v = np.asarray(v, dtype=float)
        return np.where(v <= 0, 0.0, np.where(v >= 1, -np.inf, upsilon.logsf(back(np.clip(v, 0.0, 1.0)))))

    density = None
    if upsilon.has_density:
        def density(v):
            v = np.asarray(v, dtype=float)
            inside = (v > 0) & (v < 1)
            vv = np.where(inside, v, 0.5)
            return np.where(inside, upsilon.pdf(back(vv)) * c / (1.0 - vv) ** 2, 0.0)

    def from_y(y):
        return y / (y + c)

    lo = upsilon.support_lo / (upsilon.support_lo + c)
    law = DistributionSpec(
        name=f"DiscountFactor({upsilon.name},{c:g})",
        survival=lambda v: np.exp(logsf(v)),
        log_survival=logsf,
        density=density,
        quantile=lambda p: from_y(upsilon.ppf(p)),
        inverse_survival=lambda q: from_y(upsilon.isf(q)),
        gap_survival=gap,
        sampler=lambda rng, size: from_y(upsilon.sample(rng, size)),
        support_lo=lo,
        support_hi=1.0,
        tail=Weibull(alpha, 1.0),
        params={"c": c},
    )

    def slowly_varying(x):
        x = np.asarray(x, dtype=float)
        return gap(1.0 / x) * x ** alpha

    return ScalingSpec(law, alpha, slowly_varying, upsilon.has_density)


def ruin_term_sum(model: RiskModel, u0):
    """``sum_k P(R_k S_1 ... S_k > u0)`` evaluated by the exact oracles.

    Each term is rewritten as ``P(R V_1 ... V_k > u_k)`` with the normalised
    factors ``V_i = S_i / s_i`` and ``u_k = u0 / (s_1 ... s_k)``; one-factor
    terms use direct quadrature, longer products the iterated fold.
    """
    u0 = float(u0)
    factors = [discount_factor_law(y, p * s) for y, p, s in zip(model.upsilon, model.pi, model.s_hat)]
    logs = []
    for k, uk in enumerate(model.thresholds(u0), start=1):
        m = ProductModel(model.net_loss, factors[:k])
        if k == 1:
            logs.append(exact_tail_quadrature(m, uk, log=True))
        else:
            logs.append(exact_tail_nfold(m, uk, log=True))
    total = float(logsumexp(logs))
    return RuinResult(u0, model.horizon, math.exp(total), "term_sum")


def ruin_asymptotic(model: RiskModel, u0, *, log=False):
    """Closed-form approximation of the ruin probability.

    ``sum_k P(R > u_k) prod_{i<=k} Gamma(a_i + 1) (pi_i s_i)**(-a_i) P(Y_i > u_k w(u_k))``
    with ``w`` the auxiliary function of the net-loss law. Each term needs
    ``u_k w(u_k) > 1``; a zero stock fraction is only admissible with a
    tail index of 0.
    """
    tail = model.net_loss.tail
    if not isinstance(tail, Gumbel) or math.isfinite(tail.endpoint):
        raise DomainError("net loss must be in the Gumbel class with an infinite endpoint")
    alphas = model.alphas
    for p, a in zip(model.pi, alphas):
        if p == 0.0 and a > 0:
            raise DomainError("zero stock fraction with a positive tail index: the constant divides by zero")
    u0 = float(u0)
    const = 0.0
    terms = []
    for k, uk in enumerate(model.thresholds(u0)):
        eta = float(tail.eta(uk))
        if not eta > 1:
            raise PreAsymptoticError(f"u_k * w(u_k) = {eta:.6g} <= 1 at u_k={uk:g}")
        p, s, a = model.pi[k], model.s_hat[k], alphas[k]
        const += math.lgamma(a + 1.0) - (a * math.log(p * s) if a > 0 else 0.0)
        tails = math.fsum(float(model.upsilon[i].logsf(eta)) for i in range(k + 1))
        terms.append(float(model.net_loss.logsf(uk)) + const + tails)
    total = float(logsumexp(terms))
    if log:
        return total
    return RuinResult(u0, model.horizon, math.exp(total), "asymptotic")


def iff_ratio(model: RiskModel, i, u_grid):
    """``P(S_i > s_i - 1/u) / P(Y_i > pi_i s_i**2 u)`` along ``u_grid``; tends to 1."""
    p, s, y = model.pi[i], model.s_hat[i], model.upsilon[i]
    if p == 0.0:
        raise DomainError("ratio undefined for a zero stock fraction")
    out = []
    for u in u_grid:
        u = float(u)
        # S > s - 1/u  <=>  Y > pi s (s u - 1)
        num = float(y.logsf(p * s * (s * u - 1.0)))
        den = float(y.logsf(p * s * s * u))
        out.append(math.exp(num - den))
    return out
