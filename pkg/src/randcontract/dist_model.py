"""Distributions of risks and scaling factors, tagged with their max-domain class.

A :class:`DistributionSpec` bundles vectorised survival/density/quantile
callables, a sampler and the declared :data:`TailClass`. Scaling factors in
``(0, 1)`` are wrapped in :class:`ScalingSpec`, which adds the index of
regular variation at the upper endpoint 1 and the slowly varying factor.

Beta parametrisation
--------------------
``make_builtin("beta", alpha=a, beta=b)`` has density proportional to
``x**(b - 1) * (1 - x)**(a - 1)``. The first parameter is the exponent at the
*upper* endpoint, so that ``P(S > 1 - u) ~ C u**a`` with
``C = Gamma(a + b) / (Gamma(a + 1) Gamma(b))``. This is the mirror image of
the usual convention (``scipy.stats.beta(a, b)``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
from scipy import optimize, special, stats

from ._quad import integrate_expanding, quad
from .errors import DomainError, ParameterError, UnreliableRegionError

__all__ = [
    "Frechet",
    "Gumbel",
    "Weibull",
    "TailClass",
    "DistributionSpec",
    "ScalingSpec",
    "MCEstimate",
    "make_builtin",
    "as_scaling",
    "power_scale",
    "normalize_endpoint",
    "mean_excess",
    "aux_scale_from_mean_excess",
    "FAMILIES",
]

INF = math.inf


def _ret(x):
    """Return a Python float for 0-d results, the array otherwise."""
    x = np.asarray(x, dtype=float)
    return float(x) if x.ndim == 0 else x


# ---------------------------------------------------------------------------
# Tail classes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Frechet:
    """Regularly varying tail with index ``-gamma``; infinite endpoint.

    ``gamma == 0`` denotes a slowly varying tail (only meaningful for the
    density-ratio statement, which covers ``gamma = 0``).
    """

    gamma: float

    def __post_init__(self):
        if not (self.gamma >= 0 and math.isfinite(self.gamma)):
            raise ParameterError(f"Frechet index must be >= 0, got {self.gamma}")

    @property
    def endpoint(self):
        return INF

    @property
    def name(self):
        return "frechet"


@dataclass(frozen=True)
class Gumbel:
    """Gumbel max-domain with auxiliary scaling function ``aux_scale``."""

    aux_scale: Callable
    endpoint: float = INF

    def __post_init__(self):
        if not self.endpoint > 0:
            raise ParameterError(f"Gumbel endpoint must be in (0, inf], got {self.endpoint}")

    @property
    def name(self):
        return "gumbel"

    def w(self, u):
        return _ret(self.aux_scale(np.asarray(u, dtype=float)))

    def eta(self, u):
        """``u * w(u)``, which must diverge at the endpoint."""
        return _ret(np.asarray(u, dtype=float) * self.w(u))

    def check_eta_diverges(self, grid):
        """True if ``u * w(u)`` increases along ``grid`` and ends above 1."""
        eta = np.atleast_1d(self.eta(np.asarray(grid, dtype=float)))
        return bool(np.all(eta > 0) and np.all(np.diff(eta) > 0) and eta[-1] > 1)


@dataclass(frozen=True)
class Weibull:
    """Weibull max-domain: ``F(r - x/u) / F(r - 1/u) -> x**gamma`` with finite ``r``.

    Product formulas require ``endpoint == 1``; use :func:`normalize_endpoint`.
    """

    gamma: float
    endpoint: float = 1.0

    def __post_init__(self):
        if not (self.gamma >= 0 and math.isfinite(self.gamma)):
            raise ParameterError(f"Weibull index must be >= 0, got {self.gamma}")
        if not math.isfinite(self.endpoint):
            raise ParameterError("Weibull endpoint must be finite")

    @property
    def name(self):
        return "weibull"


TailClass = Union[Frechet, Gumbel, Weibull]


# ---------------------------------------------------------------------------
# Distribution container
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DistributionSpec:
    """A univariate law with everything the tail formulas need.

    All callables are vectorised over numpy arrays. The optional fields give
    numerically better routes when they are known in closed form:
    ``log_survival`` for deep tails, ``gap_survival(x) = P(X > hi - x)`` near
    a finite upper endpoint, ``inverse_survival(q)`` for tail quantiles that
    ``1 - q`` cannot represent.
    """

    name: str
    survival: Callable
    quantile: Callable
    sampler: Callable  # (rng, size) -> ndarray
    support_lo: float
    support_hi: float
    tail: TailClass
    density: Optional[Callable] = None
    log_survival: Optional[Callable] = None
    log_density: Optional[Callable] = None
    gap_survival: Optional[Callable] = None
    inverse_survival: Optional[Callable] = None
    params: dict = field(default_factory=dict)

    def sf(self, u):
        return _ret(self.survival(np.asarray(u, dtype=float)))

    def logsf(self, u):
        u = np.asarray(u, dtype=float)
        if self.log_survival is not None:
            return _ret(self.log_survival(u))
        with np.errstate(divide="ignore"):
            return _ret(np.log(self.survival(u)))

    def pdf(self, u):
        if self.density is None:
            raise DomainError(f"{self.name} has no density")
        return _ret(self.density(np.asarray(u, dtype=float)))

    def logpdf(self, u):
        u = np.asarray(u, dtype=float)
        if self.log_density is not None:
            return _ret(self.log_density(u))
        with np.errstate(divide="ignore"):
            return _ret(np.log(self.pdf(u)))

    def cdf(self, u):
        return _ret(1.0 - np.asarray(self.sf(u)))

    def ppf(self, p):
        return _ret(self.quantile(np.asarray(p, dtype=float)))

    def isf(self, q):
        """Inverse survival: the ``t`` with ``P(X > t) = q``."""
        q = np.asarray(q, dtype=float)
        if self.inverse_survival is not None:
            return _ret(self.inverse_survival(q))
        return _ret(self.quantile(1.0 - q))

    def gap_sf(self, x):
        """``P(X > support_hi - x)`` for small ``x > 0``."""
        if not math.isfinite(self.support_hi):
            raise DomainError(f"{self.name} has infinite upper endpoint")
        x = np.asarray(x, dtype=float)
        if self.gap_survival is not None:
            return _ret(self.gap_survival(x))
        return _ret(self.survival(self.support_hi - x))

    def sample(self, rng, size):
        return np.asarray(self.sampler(rng, size), dtype=float)

    @property
    def has_density(self):
        return self.density is not None

    @property
    def is_degenerate(self):
        return self.support_lo == self.support_hi

    @property
    def endpoint(self):
        return self.support_hi


@dataclass(frozen=True)
class ScalingSpec:
    """A contraction factor ``S`` in ``(0, 1)``.

    ``P(S > 1 - 1/x) = x**(-alpha) * slowly_varying(x)``; ``density_alpha_valid``
    records whether the density satisfies the matching von Mises condition.
    """

    dist: DistributionSpec
    alpha: float
    slowly_varying: Callable
    density_alpha_valid: bool = False

    def __post_init__(self):
        if self.dist.support_lo < 0 or self.dist.support_hi > 1:
            raise ParameterError(
                f"scaling factor {self.dist.name} must live in (0, 1), "
                f"got support [{self.dist.support_lo}, {self.dist.support_hi}]")
        if not (self.alpha >= 0 and math.isfinite(self.alpha)):
            raise ParameterError(f"alpha must be >= 0, got {self.alpha}")

    @property
    def name(self):
        return self.dist.name

    def upper_tail(self, x):
        """``P(S > 1 - x)``, accurate for tiny ``x``."""
        x = np.asarray(x, dtype=float)
        if self.dist.support_hi < 1:
            return _ret(np.where(x > 1 - self.dist.support_hi,
                                 self.dist.sf(1 - x), 0.0))
        return self.dist.gap_sf(x)

    def rv_ratio(self, x):
        """``P(S > 1 - 1/x) / (x**-alpha * L(x))``; tends to 1 as ``x`` grows."""
        x = np.asarray(x, dtype=float)
        return _ret(self.upper_tail(1.0 / x) / (x ** (-self.alpha) * self.slowly_varying(x)))

    def check_regular_variation(self, xs, tol=0.05):
        """True when ``rv_ratio`` is within ``tol`` of 1 at every ``x`` in ``xs``."""
        r = np.atleast_1d(self.rv_ratio(np.asarray(xs, dtype=float)))
        return bool(np.all(np.abs(r - 1) <= tol))

    def moment(self, p):
        """``E[S**p]`` for ``p >= 0`` by quadrature of the survival function."""
        if p == 0:
            return 1.0
        d = self.dist
        if d.is_degenerate:
            return d.support_lo ** p
        hi = d.support_hi
        lo = max(d.support_lo, 0.0)
        # E[S^p] = lo^p + int_lo^hi p s^(p-1) P(S > s) ds
        fn = lambda s: p * s ** (p - 1) * float(d.sf(s))
        val, _ = quad(fn, lo, hi, rtol=1e-13, what=f"E[S^{p}] for {d.name}")
        return lo ** p + val


@dataclass(frozen=True)
class MCEstimate:
    """Monte Carlo estimate with a normal-approximation 95% half width."""

    value: float
    half_width_95: float
    n_samples: int
    seed: int
    hits: Optional[int] = None
    probability: bool = True

    def __post_init__(self):
        if self.half_width_95 < 0:
            raise ValueError("half width must be nonnegative")
        if self.n_samples <= 0:
            raise ValueError("n_samples must be positive")

    @property
    def ci_lo(self):
        lo = self.value - self.half_width_95
        return max(lo, 0.0) if self.probability else lo

    @property
    def ci_hi(self):
        hi = self.value + self.half_width_95
        return min(hi, 1.0) if self.probability else hi

    def contains(self, x):
        return self.ci_lo <= x <= self.ci_hi


# ---------------------------------------------------------------------------
# Builtin families
# ---------------------------------------------------------------------------


def _positive(name, value):
    value = float(value)
    if not (value > 0 and math.isfinite(value)):
        raise ParameterError(f"{name} must be a positive finite number, got {value}")
    return value


def _exponential(rate=1.0):
    rate = _positive("rate", rate)

    def logsf(u):
        return -rate * np.maximum(u, 0.0)

    def pdf(u):
        return np.where(u >= 0, rate * np.exp(-rate * np.maximum(u, 0.0)), 0.0)

    def logpdf(u):
        with np.errstate(divide="ignore"):
            return np.where(u >= 0, math.log(rate) - rate * u, -np.inf)

    return DistributionSpec(
        name=f"Exponential({rate:g})",
        survival=lambda u: np.exp(logsf(u)),
        log_survival=logsf,
        density=pdf,
        log_density=logpdf,
        quantile=lambda p: -np.log1p(-p) / rate,
        inverse_survival=lambda q: -np.log(q) / rate,
        sampler=lambda rng, size: rng.exponential(1.0 / rate, size),
        support_lo=0.0,
        support_hi=INF,
        tail=Gumbel(lambda u: np.full_like(np.asarray(u, dtype=float), rate)),
        params={"rate": rate},
    )


def _pareto(gamma=1.0, scale=1.0):
    gamma = _positive("gamma", gamma)
    scale = _positive("scale", scale)

    def logsf(u):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(u > scale, -gamma * np.log(np.maximum(u, scale) / scale), 0.0)

    def pdf(u):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(u > scale, gamma / scale * (np.maximum(u, scale) / scale) ** (-gamma - 1), 0.0)

    return DistributionSpec(
        name=f"Pareto({gamma:g},{scale:g})",
        survival=lambda u: np.exp(logsf(u)),
        log_survival=logsf,
        density=pdf,
        quantile=lambda p: scale * (1.0 - p) ** (-1.0 / gamma),
        inverse_survival=lambda q: scale * q ** (-1.0 / gamma),
        sampler=lambda rng, size: scale * (1.0 - rng.random(size)) ** (-1.0 / gamma),
        support_lo=scale,
        support_hi=INF,
        tail=Frechet(gamma),
        params={"gamma": gamma, "scale": scale},
    )


def _uniform_logsf(u):
    with np.errstate(divide="ignore"):
        return np.log1p(-np.clip(u, 0.0, 1.0))


def _uniform01():
    def pdf(u):
        return np.where((u >= 0) & (u <= 1), 1.0, 0.0)

    return DistributionSpec(
        name="Uniform01",
        survival=lambda u: np.clip(1.0 - u, 0.0, 1.0),
        log_survival=_uniform_logsf,
        density=pdf,
        quantile=lambda p: p,
        inverse_survival=lambda q: 1.0 - q,
        gap_survival=lambda x: np.clip(x, 0.0, 1.0),
        sampler=lambda rng, size: rng.random(size),
        support_lo=0.0,
        support_hi=1.0,
        tail=Weibull(1.0, 1.0),
    )


def _beta(alpha=1.0, beta=1.0):
    # alpha is the exponent at the upper endpoint: density ~ x^(beta-1) (1-x)^(alpha-1)
    a = _positive("alpha", alpha)
    b = _positive("beta", beta)
    law = stats.beta(b, a)
    mirrored = stats.beta(a, b)  # law of 1 - S
    return DistributionSpec(
        name=f"Beta({a:g},{b:g})",
        survival=lambda u: law.sf(u),
        log_survival=lambda u: law.logsf(u),
        density=lambda u: law.pdf(u),
        log_density=lambda u: law.logpdf(u),
        quantile=lambda p: law.ppf(p),
        inverse_survival=lambda q: 1.0 - mirrored.ppf(q),
        gap_survival=lambda x: mirrored.cdf(x),
        sampler=lambda rng, size: rng.beta(b, a, size),
        support_lo=0.0,
        support_hi=1.0,
        tail=Weibull(a, 1.0),
        params={"alpha": a, "beta": b},
    )


def _solve_decreasing(logf, target, lo, hi_guess):
    """Find t >= lo with logf(t) = target for a decreasing logf (scalar)."""
    hi = max(hi_guess, lo + 1.0)
    while logf(hi) > target:
        hi *= 2.0
    a = lo if lo > 0 else 1e-300
    if logf(a) <= target:
        return lo
    return optimize.brentq(lambda t: logf(t) - target, a, hi, xtol=1e-300, rtol=1e-15, maxiter=500)


def _kotz(K=1.0, q=0.0, r=1.0, gamma=1.0):
    K = _positive("K", K)
    r = _positive("r", r)
    gamma = _positive("gamma", gamma)
    q = float(q)
    logK = math.log(K)

    def logf(u):
        u = np.asarray(u, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = logK - r * u ** gamma
            if q != 0.0:
                out = out + q * np.log(u)
        return out

    # the tail expression is monotone beyond the mode of u^q exp(-r u^gamma)
    mode = (q / (r * gamma)) ** (1.0 / gamma) if q > 0 else 0.0
    if q < 0 or (q == 0 and K > 1) or (q > 0 and float(logf(mode)) > 0):
        lo = _solve_decreasing(lambda t: float(logf(t)), 0.0, max(mode, 1e-12), 1.0 + mode)
    else:
        lo = mode
    atom = 1.0 - min(1.0, math.exp(float(logf(lo)))) if lo > 0 or q == 0 else 0.0

    def logsf(u):
        u = np.asarray(u, dtype=float)
        with np.errstate(invalid="ignore"):
            return np.where(u < lo, 0.0, np.minimum(0.0, logf(np.maximum(u, lo))))

    def hazard(u):
        with np.errstate(divide="ignore", invalid="ignore"):
            h = r * gamma * u ** (gamma - 1.0)
            if q != 0.0:
                h = h - q / u
        return h

    def logpdf(u):
        u = np.asarray(u, dtype=float)
        uu = np.maximum(u, lo)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(u > lo, logf(uu) + np.log(hazard(uu)), -np.inf)

    def isf(qq):
        qq = np.asarray(qq, dtype=float)
        with np.errstate(divide="ignore"):
            lq = np.log(qq)
        if q == 0.0:
            with np.errstate(invalid="ignore"):
                t = np.maximum((logK - lq) / r, 0.0) ** (1.0 / gamma)
            return np.where(lq >= float(logf(lo)), lo, t)
        return _vector_isf(logf, lq, lo)

    return DistributionSpec(
        name=f"Kotz({K:g},{q:g},{r:g},{gamma:g})",
        survival=lambda u: np.exp(logsf(u)),
        log_survival=logsf,
        density=lambda u: np.exp(logpdf(u)),
        log_density=logpdf,
        quantile=lambda p: isf(1.0 - np.asarray(p, dtype=float)),
        inverse_survival=isf,
        sampler=lambda rng, size: isf(1.0 - rng.random(size)),
        support_lo=lo,
        support_hi=INF,
        tail=Gumbel(lambda u: r * gamma * np.asarray(u, dtype=float) ** (gamma - 1.0)),
        params={"K": K, "q": q, "r": r, "gamma": gamma, "atom": atom},
    )


def _vector_isf(logf, lq, lo):
    """Vectorised inverse of a decreasing log-survival by bisection in log t."""
    lq = np.asarray(lq, dtype=float)
    out = np.full(lq.shape, float(lo))
    need = lq < float(logf(lo))
    if not np.any(need):
        return out
    target = lq[need]
    a = np.full(target.shape, math.log(max(lo, 1e-300)))
    hi = max(lo, 1.0)
    while float(logf(hi)) > target.min():
        hi *= 2.0
    b = np.full(target.shape, math.log(hi))
    for _ in range(200):
        m = 0.5 * (a + b)
        above = logf(np.exp(m)) > target
        a = np.where(above, m, a)
        b = np.where(above, b, m)
        if np.all(b - a < 1e-15 * np.maximum(1.0, np.abs(b))):
            break
    out[need] = np.exp(0.5 * (a + b))
    return out


def _near_one_exp(c1=1.0, c2=1.0):
    c1 = _positive("c1", c1)
    c2 = _positive("c2", c2)
    logc1 = math.log(c1)
    lo = 1.0 - c2 / logc1 if logc1 > c2 else 0.0

    def logf(u):
        with np.errstate(divide="ignore"):
            return logc1 - c2 / (1.0 - u)

    def logsf(u):
        u = np.asarray(u, dtype=float)
        inside = np.clip(u, lo, 1.0 - 1e-300)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.minimum(0.0, logf(inside))
        return np.where(u < lo, 0.0, np.where(u >= 1.0, -np.inf, out))

    def logpdf(u):
        u = np.asarray(u, dtype=float)
        inside = np.clip(u, lo, 1.0 - 1e-300)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = logf(inside) + math.log(c2) - 2.0 * np.log1p(-inside)
        return np.where((u > lo) & (u < 1.0), out, -np.inf)

    def gap(x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", over="ignore"):
            return np.where(x >= 1.0 - lo, 1.0, np.minimum(1.0, c1 * np.exp(-c2 / x)))

    def isf(q):
        q = np.asarray(q, dtype=float)
        with np.errstate(divide="ignore"):
            t = 1.0 - c2 / (logc1 - np.log(q))
        return np.where(t < lo, lo, t)

    return DistributionSpec(
        name=f"NearOneExp({c1:g},{c2:g})",
        survival=lambda u: np.exp(logsf(u)),
        log_survival=logsf,
        density=lambda u: np.exp(logpdf(u)),
        log_density=logpdf,
        quantile=lambda p: isf(1.0 - np.asarray(p, dtype=float)),
        inverse_survival=isf,
        gap_survival=gap,
        sampler=lambda rng, size: isf(1.0 - rng.random(size)),
        support_lo=lo,
        support_hi=1.0,
        tail=Gumbel(lambda u: c2 / (1.0 - np.asarray(u, dtype=float)) ** 2, endpoint=1.0),
        params={"c1": c1, "c2": c2, "atom": 1.0 - min(1.0, math.exp(float(logf(lo))))},
    )


def _lognormal(mu=0.0, sigma=1.0):
    mu = float(mu)
    sigma = _positive("sigma", sigma)
    law = stats.lognorm(s=sigma, scale=math.exp(mu))

    def hazard(u):
        u = np.asarray(u, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return np.exp(law.logpdf(u) - law.logsf(u))

    return DistributionSpec(
        name=f"Lognormal({mu:g},{sigma:g})",
        survival=lambda u: law.sf(u),
        log_survival=lambda u: law.logsf(u),
        density=lambda u: law.pdf(u),
        log_density=lambda u: law.logpdf(u),
        quantile=lambda p: law.ppf(p),
        inverse_survival=lambda q: law.isf(q),
        sampler=lambda rng, size: rng.lognormal(mu, sigma, size),
        support_lo=0.0,
        support_hi=INF,
        tail=Gumbel(hazard),
        params={"mu": mu, "sigma": sigma},
    )


def _spherical_angle():
    """``S = cos(theta)``, theta uniform on (0, pi/2), so that S^2 ~ arcsine law."""

    def sf(u):
        u = np.clip(u, 0.0, 1.0)
        return 2.0 / math.pi * np.arccos(u)

    def gap(x):
        x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
        return 4.0 / math.pi * np.arcsin(np.sqrt(x / 2.0))

    def pdf(u):
        u = np.asarray(u, dtype=float)
        inside = (u > 0) & (u < 1)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(inside, 2.0 / (math.pi * np.sqrt(1.0 - np.where(inside, u, 0.0) ** 2)), 0.0)

    return DistributionSpec(
        name="SphericalAngle",
        survival=sf,
        density=pdf,
        quantile=lambda p: np.sin(0.5 * math.pi * np.asarray(p, dtype=float)),
        inverse_survival=lambda q: np.cos(0.5 * math.pi * np.asarray(q, dtype=float)),
        gap_survival=gap,
        sampler=lambda rng, size: np.cos(0.5 * math.pi * rng.random(size)),
        support_lo=0.0,
        support_hi=1.0,
        tail=Weibull(0.5, 1.0),
    )


def _degenerate(value=1.0):
    v = float(value)

    def sf(u):
        return np.where(np.asarray(u, dtype=float) < v, 1.0, 0.0)

    return DistributionSpec(
        name=f"Degenerate({v:g})",
        survival=sf,
        quantile=lambda p: np.full_like(np.asarray(p, dtype=float), v),
        inverse_survival=lambda q: np.full_like(np.asarray(q, dtype=float), v),
        gap_survival=lambda x: np.where(np.asarray(x, dtype=float) > 0, 1.0, 0.0),
        sampler=lambda rng, size: np.full(size, v),
        support_lo=v,
        support_hi=v,
        tail=Weibull(0.0, v),
        params={"value": v},
    )


FAMILIES = {
    "exponential": _exponential,
    "pareto": _pareto,
    "uniform01": _uniform01,
    "beta": _beta,
    "kotztype": _kotz,
    "kotz": _kotz,
    "nearoneexp": _near_one_exp,
    "lognormal": _lognormal,
    "sphericalangle": _spherical_angle,
    "spherical": _spherical_angle,
    "degenerate": _degenerate,
}


def _family_key(name):
    return name.replace("_", "").replace("-", "").replace(" ", "").lower()


def make_builtin(family, **params):
    """Build a builtin family by name.

    Names are case-insensitive and ignore underscores, so ``"KotzType"``,
    ``"kotz_type"`` and ``"kotz"`` all work.

    >>> make_builtin("exponential", rate=1.0).sf(2.0)  # doctest: +ELLIPSIS
    0.1353352832...
    """
    try:
        ctor = FAMILIES[_family_key(family)]
    except KeyError:
        raise ParameterError(f"unknown family {family!r}; known: {sorted(set(FAMILIES))}") from None
    try:
        return ctor(**params)
    except TypeError as exc:
        raise ParameterError(f"bad parameters for {family}: {exc}") from None


def as_scaling(d, alpha=None, slowly_varying=None, density_alpha_valid=None):
    """Wrap a law on ``(0, 1)`` as a :class:`ScalingSpec`.

    Builtin families get their regular-variation data filled in; anything
    else needs ``alpha`` and ``slowly_varying`` from the caller.
    """
    if isinstance(d, str):
        d = make_builtin(d)
    known = _known_scaling(d)
    if known is not None and alpha is None:
        alpha, slowly_varying, dav = known
        if density_alpha_valid is None:
            density_alpha_valid = dav
    if alpha is None or slowly_varying is None:
        raise ParameterError(f"no regular-variation data known for {d.name}; pass alpha and slowly_varying")
    return ScalingSpec(d, float(alpha), slowly_varying, bool(density_alpha_valid))


def _const(c):
    return lambda x: np.full_like(np.asarray(x, dtype=float), c)


def _known_scaling(d):
    name = d.name
    if name == "Uniform01":
        return 1.0, _const(1.0), True
    if name.startswith("Beta("):
        a, b = d.params["alpha"], d.params["beta"]
        c = math.exp(math.lgamma(a + b) - math.lgamma(a + 1) - math.lgamma(b))
        return a, _const(c), True
    if name == "SphericalAngle":
        return 0.5, _const(2.0 * math.sqrt(2.0) / math.pi), True
    if name.startswith("Degenerate(") and d.support_lo == 1.0:
        return 0.0, _const(1.0), False
    return None


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def power_scale(d, c, p):
    """Law of ``c * W**p`` for ``W ~ d``; the max-domain family is preserved."""
    c = float(c)
    p = float(p)
    if not (c > 0 and p > 0):
        raise ParameterError(f"power_scale needs c > 0 and p > 0, got c={c}, p={p}")
    if c == 1.0 and p == 1.0:
        return d
    if d.support_lo < 0:
        raise DomainError("power_scale requires a nonnegative variable")

    def back(u):
        u = np.asarray(u, dtype=float)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(u > 0, (np.maximum(u, 0.0) / c) ** (1.0 / p), 0.0)

    def sf(u):
        u = np.asarray(u, dtype=float)
        return np.where(u > 0, d.sf(back(u)), 1.0)

    def logsf(u):
        u = np.asarray(u, dtype=float)
        return np.where(u > 0, d.logsf(back(u)), 0.0)

    density = log_density = None
    if d.has_density:
        def density(u):
            u = np.asarray(u, dtype=float)
            v = back(u)
            with np.errstate(invalid="ignore", divide="ignore"):
                jac = np.where(u > 0, v / (p * np.where(u > 0, u, 1.0)), 0.0)
            return np.where(u > 0, d.pdf(v) * jac, 0.0)

    tail = d.tail
    if isinstance(tail, Frechet):
        new_tail = Frechet(tail.gamma / p)
    elif isinstance(tail, Weibull):
        new_tail = Weibull(tail.gamma, c * tail.endpoint ** p)
    else:
        w0 = tail.aux_scale

        def w_new(u):
            v = back(u)
            return w0(v) * v / (p * np.asarray(u, dtype=float))

        new_tail = Gumbel(w_new, c * tail.endpoint ** p if math.isfinite(tail.endpoint) else INF)

    gap = None
    if math.isfinite(d.support_hi) and d.support_hi > 0:
        r = d.support_hi
        top = c * r ** p

        def gap(x):
            x = np.asarray(x, dtype=float)
            # r - ((top - x)/c)^(1/p), written to keep digits for tiny x
            with np.errstate(invalid="ignore"):
                dx = -r * np.expm1(np.log1p(-np.minimum(x / top, 1.0)) / p)
            return d.gap_sf(dx)

    return DistributionSpec(
        name=f"{c:g}*{d.name}^{p:g}",
        survival=sf,
        log_survival=logsf,
        density=density,
        log_density=log_density,
        quantile=lambda q: c * np.asarray(d.ppf(q)) ** p,
        inverse_survival=lambda q: c * np.asarray(d.isf(q)) ** p,
        gap_survival=gap,
        sampler=lambda rng, size: c * d.sample(rng, size) ** p,
        support_lo=c * d.support_lo ** p,
        support_hi=c * d.support_hi ** p if math.isfinite(d.support_hi) else INF,
        tail=new_tail,
        params={"base": d.name, "c": c, "p": p},
    )


def normalize_endpoint(d):
    """Rescale a finite-endpoint law so its upper endpoint is 1."""
    if not math.isfinite(d.support_hi) or d.support_hi <= 0:
        raise DomainError(f"{d.name} has no finite positive endpoint")
    return power_scale(d, 1.0 / d.support_hi, 1.0)


def _natural_scale(d, u):
    tail = d.tail
    if isinstance(tail, Gumbel):
        w = float(tail.w(u))
        if w > 0 and math.isfinite(w):
            return 1.0 / w
    if math.isfinite(d.support_hi):
        return max(d.support_hi - u, 1e-300)
    return max(abs(u), 1.0)


def mean_excess(d, u):
    """``E[R - u | R > u]`` by quadrature of the survival function."""
    u = float(u)
    if u >= d.support_hi:
        raise DomainError(f"u={u} is not below the upper endpoint {d.support_hi}")
    lsu = float(d.logsf(u))
    if not math.isfinite(lsu):
        raise UnreliableRegionError(f"survival of {d.name} underflows at u={u}")
    start = max(u, d.support_lo)
    head = start - u  # R > u surely on [u, support_lo)

    def ratio(y):
        return math.exp(min(float(d.logsf(y)) - lsu, 700.0))

    h0 = _natural_scale(d, start)
    if math.isfinite(d.support_hi):
        val, _ = quad(ratio, start, d.support_hi, rtol=1e-12, what="mean excess")
    else:
        try:
            val, _ = integrate_expanding(ratio, start, h0, rtol=1e-12, what="mean excess")
        except Exception as exc:
            raise DomainError(f"mean excess of {d.name} at u={u} does not converge ({exc})") from None
    return head + val


def aux_scale_from_mean_excess(d):
    """Auxiliary function estimate ``u -> 1 / mean_excess(d, u)``."""

    def w(u):
        u = np.asarray(u, dtype=float)
        if u.ndim == 0:
            return 1.0 / mean_excess(d, float(u))
        return np.array([1.0 / mean_excess(d, float(x)) for x in u.ravel()]).reshape(u.shape)

    return w
