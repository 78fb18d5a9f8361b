"""Closed-form tail approximations for random contractions.

Every formula returns an :class:`ApproxResult`, carrying the value together
with its logarithm so that deep tails (well below 1e-300) stay usable.
Constants are products of gamma functions; they are evaluated through
``math.lgamma`` and summed in log space.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

from .dist_model import DistributionSpec, Frechet, Gumbel, ScalingSpec, Weibull
from .errors import DomainError, ParameterError, PreAsymptoticError, PreconditionError

__all__ = [
    "ProductModel",
    "ApproxResult",
    "breiman_tail",
    "gumbel_product_tail",
    "weibull_product_tail",
    "frechet_density_ratio",
    "gumbel_density",
    "weibull_density_ratio",
    "vm_density_ratio_check",
    "cte_asymptotic",
    "cte_var_ratio",
    "FORMULAS",
]

ENDPOINT_TOL = 1e-12


@dataclass(frozen=True)
class ProductModel:
    """``X_n = R * S_1 * ... * S_n`` with independent factors."""

    r: DistributionSpec
    factors: Tuple[ScalingSpec, ...]

    def __init__(self, r, factors):
        if isinstance(factors, ScalingSpec):
            factors = (factors,)
        factors = tuple(factors)
        if not factors:
            raise ParameterError("a product model needs at least one scaling factor")
        for s in factors:
            if not isinstance(s, ScalingSpec):
                raise ParameterError(f"factor {s!r} is not a ScalingSpec")
        if r.support_lo < 0:
            raise DomainError(
                f"{r.name} is two-sided (support starts at {r.support_lo}); "
                "product formulas need a nonnegative risk")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "factors", factors)

    @property
    def n(self):
        return len(self.factors)

    @property
    def alphas(self):
        return [s.alpha for s in self.factors]

    @property
    def support_lo(self):
        lo = self.r.support_lo
        for s in self.factors:
            lo *= s.dist.support_lo
        return lo

    @property
    def support_hi(self):
        hi = self.r.support_hi
        for s in self.factors:
            hi *= s.dist.support_hi
        return hi

    def describe(self):
        return " x ".join([self.r.name] + [s.name for s in self.factors])


@dataclass(frozen=True)
class ApproxResult:
    value: float
    log_value: float
    regime: str
    formula_id: str

    @classmethod
    def from_log(cls, log_value, regime, formula_id):
        log_value = float(log_value)
        value = math.exp(log_value) if log_value > -745.2 else 0.0
        return cls(value, log_value, regime, formula_id)

    def __float__(self):
        return self.value


def _log(x):
    return math.log(x) if x > 0 else -math.inf


def _check_guard(eta, u):
    if not eta > 1:
        raise PreAsymptoticError(
            f"u * w(u) = {eta:.6g} <= 1 at u={u:g}: pre-asymptotic region, formula refused")


def breiman_tail(m, u):
    """``P(R > u) * prod E[S_i**gamma]`` for a regularly varying risk."""
    tail = m.r.tail
    if not isinstance(tail, Frechet):
        raise DomainError(f"Breiman approximation needs a Frechet-class risk, got {tail.name}")
    u = float(u)
    if u <= max(1.0, m.r.support_lo):
        raise DomainError(f"u={u} must exceed max(1, support_lo={m.r.support_lo})")
    g = tail.gamma
    terms = [float(m.r.logsf(u))] + [_log(s.moment(g)) for s in m.factors]
    return ApproxResult.from_log(_sum_sorted(terms), "frechet", "breiman")


def _gumbel_eta(m, u):
    tail = m.r.tail
    if not isinstance(tail, Gumbel):
        raise DomainError(f"formula needs a Gumbel-class risk, got {tail.name}")
    u = float(u)
    if u >= tail.endpoint:
        raise DomainError(f"u={u} is not below the endpoint {tail.endpoint}")
    eta = float(tail.eta(u))
    _check_guard(eta, u)
    return tail, u, eta


def _sum_sorted(terms):
    # sort so the result does not depend on the order of the factor list
    return math.fsum(sorted(terms))


def gumbel_product_tail(m, u):
    """``prod_i [Gamma(a_i + 1) P(S_i > 1 - 1/(u w(u)))] * P(R > u)``."""
    _, u, eta = _gumbel_eta(m, u)
    terms = [float(m.r.logsf(u))]
    for s in m.factors:
        terms.append(math.lgamma(s.alpha + 1.0) + _log(float(s.upper_tail(1.0 / eta))))
    return ApproxResult.from_log(_sum_sorted(terms), "gumbel", "gumbel-product-tail")


def _weibull_risk(m):
    tail = m.r.tail
    if not isinstance(tail, Weibull):
        raise DomainError(f"formula needs a Weibull-class risk, got {tail.name}")
    if abs(tail.endpoint - 1.0) > ENDPOINT_TOL or abs(m.r.support_hi - 1.0) > ENDPOINT_TOL:
        raise DomainError(
            f"risk endpoint is {m.r.support_hi}, not 1; rescale with normalize_endpoint first")
    return tail


def weibull_product_tail(m, u):
    """Finite-endpoint analogue with constant ``Gamma(g+1)/Gamma(g + sum a + 1)``."""
    tail = _weibull_risk(m)
    u = float(u)
    if not 0 < u < 1:
        raise DomainError(f"threshold must lie in (0, 1), got {u}")
    gap = 1.0 - u
    g = tail.gamma
    asum = math.fsum(sorted(m.alphas))
    terms = [math.lgamma(g + 1.0), -math.lgamma(g + asum + 1.0), _log(float(m.r.gap_sf(gap)))]
    for s in m.factors:
        terms.append(math.lgamma(s.alpha + 1.0) + _log(float(s.upper_tail(gap))))
    return ApproxResult.from_log(_sum_sorted(terms), "weibull", "weibull-product-tail")


def frechet_density_ratio(m, u=None, *, condition=None, eps_moment=False):
    """Limit of ``u h_n(u) / P(X_n > u)`` for a regularly varying risk: ``gamma``.

    ``condition`` is ``"a1"`` (some factor has ``y g(y)`` bounded) or ``"a2"``
    (the risk has a regularly varying density). With ``gamma == 0`` under
    ``"a2"`` the caller must also assert a negative moment of the factors
    through ``eps_moment``.
    """
    tail = m.r.tail
    if not isinstance(tail, Frechet):
        raise DomainError(f"needs a Frechet-class risk, got {tail.name}")
    if condition not in ("a1", "a2"):
        raise PreconditionError("assert condition='a1' or condition='a2'")
    if condition == "a2" and tail.gamma == 0 and not eps_moment:
        raise PreconditionError("gamma = 0 needs a finite negative moment of every factor (eps_moment=True)")
    return tail.gamma


def gumbel_density(m, u, *, conditions_asserted=False):
    """``w(u) * gumbel_product_tail(m, u)``, the density of ``X_n`` near the endpoint.

    Requires every factor to have ``alpha > 0`` and at least one factor with a
    density obeying the von Mises condition and bounded like ``y**-p`` near 0;
    the caller vouches for the latter with ``conditions_asserted``.
    """
    if not conditions_asserted:
        raise PreconditionError("density conditions on some factor must be asserted by the caller")
    if not any(s.density_alpha_valid and s.alpha > 0 for s in m.factors):
        raise PreconditionError("no factor has a density satisfying the von Mises condition")
    tail, u, _ = _gumbel_eta(m, u)
    base = gumbel_product_tail(m, u)
    logv = base.log_value + math.log(float(tail.w(u)))
    return ApproxResult.from_log(logv, "gumbel", "gumbel-density")


def weibull_density_ratio(m):
    """Limit of ``x h_n(1 - x) / P(X_n > 1 - x)`` as ``x -> 0``: ``gamma + sum alpha``."""
    tail = _weibull_risk(m)
    if not any(s.density_alpha_valid and s.alpha > 0 for s in m.factors):
        raise PreconditionError("needs some factor with a von Mises density and alpha > 0")
    return tail.gamma + math.fsum(sorted(m.alphas))


def vm_density_ratio_check(m, u, x, *, risk_density_vm=False, factors_stable=None):
    """Predicted limit ``exp(-x)`` of ``h_n(u + x/w(u)) / h_n(u)``.

    Returns ``(prediction, oracle_needed)``. The risk density's von Mises
    property must be asserted; factor stability defaults to true only for
    builtin factors whose density is regularly varying at 1.
    """
    if not isinstance(m.r.tail, Gumbel):
        raise DomainError("von Mises ratio needs a Gumbel-class risk")
    if not risk_density_vm:
        raise PreconditionError("assert risk_density_vm=True (von Mises condition on the risk density)")
    if factors_stable is None:
        factors_stable = all(s.density_alpha_valid and s.dist.has_density for s in m.factors)
    if not factors_stable:
        raise PreconditionError("factor densities are not certified stable; pass factors_stable=True")
    return math.exp(-float(x)), True


def _aux(d):
    r = d.r if isinstance(d, ProductModel) else d
    if not isinstance(r.tail, Gumbel):
        raise DomainError(f"CTE asymptotics need a Gumbel-class law, got {r.tail.name}")
    return r.tail


def cte_asymptotic(d, u):
    """``u + 1/w(u)``; for a product model ``w`` is the base risk's function."""
    tail = _aux(d)
    u = float(u)
    return u + 1.0 / float(tail.w(u))


def cte_var_ratio(d, p=None, *, tail_prob=None):
    """``cte_asymptotic(d, q) / q`` at the VaR ``q`` of level ``p``.

    Pass ``tail_prob = 1 - p`` instead of ``p`` when ``p`` is too close to 1
    to be represented.
    """
    _aux(d)
    if isinstance(d, ProductModel):
        raise DomainError("VaR of a product model has no closed form; pass its law")
    if (p is None) == (tail_prob is None):
        raise ValueError("give exactly one of p and tail_prob")
    if tail_prob is None:
        if not 0 < p < 1:
            raise DomainError(f"p must lie in (0, 1), got {p}")
        q = float(d.ppf(p))
    else:
        if not 0 < tail_prob < 1:
            raise DomainError(f"tail_prob must lie in (0, 1), got {tail_prob}")
        q = float(d.isf(tail_prob))
    if not (math.isfinite(q) and q > 0):
        raise DomainError(f"quantile evaluation failed (got {q})")
    return cte_asymptotic(d, q) / q


FORMULAS = {
    "breiman": breiman_tail,
    "breiman_tail": breiman_tail,
    "gumbel_product_tail": gumbel_product_tail,
    "gumbel": gumbel_product_tail,
    "weibull_product_tail": weibull_product_tail,
    "weibull": weibull_product_tail,
}
