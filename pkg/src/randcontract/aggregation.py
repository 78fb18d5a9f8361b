"""Bivariate scale mixtures ``(U1, U2) = R (I1 S, I2 sqrt(1 - S^2))``.

``R`` is a nonnegative radius, ``S`` a factor on ``(0, 1)`` and ``(I1, I2)``
random signs independent of both. The aggregated risk of interest is

    U(rho) = rho U1 + sqrt(1 - rho^2) U2 = R S(rho),
    S(rho) = rho I1 S + sqrt(1 - rho^2) I2 sqrt(1 - S^2),

whose upper tail is driven by the local behaviour of the law of ``S`` at
``rho`` (captured by :class:`LocalGSpec`). For the spherical law,
``S^2 ~ Beta(1/2, 1/2)`` with fair signs, ``U(rho)`` has the law of ``U1``
for every ``rho``; the formulas below collapse accordingly.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy import stats

from . import _mc
from ._quad import quad
from .asymptotics import ApproxResult
from .dist_model import DistributionSpec, Frechet, Gumbel, ScalingSpec, Weibull, as_scaling, make_builtin, power_scale
from .errors import DomainError, ParameterError, PreAsymptoticError
from .subexp import CriterionTrajectory, trend_verdict

__all__ = [
    "ScaleMixture",
    "LocalGSpec",
    "spherical_mixture",
    "dirichlet_mixture",
    "local_spec_from_density",
    "sample_pair",
    "sample_s_rho",
    "s_rho_tail",
    "u_rho_tail_gumbel",
    "u_rho_tail_weibull",
    "u_rho_tail_frechet",
    "composite_factor_moment",
    "BermanResult",
    "berman_identity_check",
    "IndependenceDiagnostic",
    "asymptotic_independence_diagnostic",
    "tail_equivalence_ratio",
]

SIGNS = ((1, 1), (1, -1), (-1, 1), (-1, -1))
KS_COEF = {0.10: 1.224, 0.05: 1.358, 0.01: 1.628, 0.001: 1.949}


@dataclass(frozen=True)
class ScaleMixture:
    """Radius ``r``, factor ``s`` and the joint law of the signs.

    ``sign_law`` lists the probabilities of ``(I1, I2)`` equal to
    ``(1, 1), (1, -1), (-1, 1), (-1, -1)``.
    """

    r: DistributionSpec
    s: ScalingSpec
    sign_law: Tuple[float, float, float, float] = (0.25, 0.25, 0.25, 0.25)
    kind: str = "custom"

    def __post_init__(self):
        p = tuple(float(x) for x in self.sign_law)
        if len(p) != 4 or any(x < 0 for x in p):
            raise ParameterError("sign_law needs four nonnegative probabilities")
        if abs(math.fsum(p) - 1.0) > 1e-12:
            raise ParameterError(f"sign probabilities sum to {math.fsum(p)!r}, not 1")
        if not p[0] > 0:
            raise ParameterError("P(I1 = 1, I2 = 1) must be positive")
        if self.r.support_lo < 0:
            raise ParameterError("the radius must be nonnegative")
        object.__setattr__(self, "sign_law", p)

    @property
    def q11(self):
        return self.sign_law[0]

    @property
    def is_spherical(self):
        return self.kind == "spherical" and all(abs(p - 0.25) <= 1e-12 for p in self.sign_law)


def spherical_mixture(r: DistributionSpec):
    """``S^2 ~ Beta(1/2, 1/2)`` with independent fair signs."""
    return ScaleMixture(r, as_scaling(make_builtin("spherical")), kind="spherical")


def dirichlet_mixture(r: DistributionSpec, alpha, beta, sign_law=(0.25, 0.25, 0.25, 0.25)):
    """``S = sqrt(B)`` with ``B`` the library ``Beta(alpha, beta)`` law.

    ``B`` has density proportional to ``x**(beta-1) (1-x)**(alpha-1)``, so
    ``P(S > 1 - x)`` is regularly varying at 0 with index ``alpha``.
    """
    base = make_builtin("beta", alpha=alpha, beta=beta)
    law = power_scale(base, 1.0, 0.5)
    a = base.params["alpha"]

    def slowly_varying(x):
        x = np.asarray(x, dtype=float)
        return law.gap_sf(1.0 / x) * x ** a

    s = ScalingSpec(law, a, slowly_varying, True)
    return ScaleMixture(r, s, sign_law, kind="dirichlet")


@dataclass(frozen=True)
class LocalGSpec:
    """``P(rho < S <= rho + t) ~ t**alpha_rho * L_rho(t)``-type local data of ``S`` at ``rho``.

    ``epsilon`` sets the local window of the formulas: ``s_rho_tail``
    accepts ``u < epsilon`` and the radius formulas need
    ``u w(u) > epsilon**-2`` (Gumbel) or a distance to the endpoint below
    ``epsilon**2`` (Weibull).
    """

    alpha_rho: float
    L_rho: Callable
    rho: float
    epsilon: float = 0.5

    def __post_init__(self):
        if not 0 < self.rho < 1:
            raise ParameterError(f"rho must lie in (0, 1), got {self.rho}")
        if not self.alpha_rho >= 0:
            raise ParameterError("alpha_rho must be nonnegative")
        if not 0 < self.epsilon < 1:
            raise ParameterError("epsilon must lie in (0, 1)")
        if self.alpha_rho == 0:
            ts = 10.0 ** -np.arange(2, 301, 2, dtype=float)
            vals = np.array([float(self.L_rho(t)) for t in ts])
            if not (np.all(np.diff(vals) < 0) and vals[-1] < 0.5 * vals[0]):
                raise ParameterError("alpha_rho = 0 requires L_rho(t) -> 0 as t -> 0")


def local_spec_from_density(mix: ScaleMixture, rho, epsilon=0.5):
    """``alpha_rho = 1`` and ``L_rho = 2 g(rho)`` for a density ``g`` continuous at ``rho``."""
    d = mix.s.dist
    if not d.has_density:
        raise ParameterError(f"{d.name} has no density")
    g = float(d.pdf(float(rho)))
    if not (g > 0 and math.isfinite(g)):
        raise DomainError(f"density of S at rho={rho} is {g}")
    return LocalGSpec(1.0, lambda t, c=2.0 * g: c, float(rho), epsilon)


# ----------------------------------------------------------------------------
# sampling


def _draw(mix, rng, k):
    r = mix.r.sample(rng, k)
    s = mix.s.dist.sample(rng, k)
    idx = rng.choice(4, size=k, p=mix.sign_law)
    signs = np.array(SIGNS, dtype=float)[idx]
    c = np.sqrt(np.maximum(1.0 - s * s, 0.0))
    return r, s, signs[:, 0], signs[:, 1], c


def _check_rho(rho):
    rho = float(rho)
    if not 0 < rho < 1:
        raise ParameterError(f"rho must lie in (0, 1), got {rho}")
    return rho


def sample_pair(mix: ScaleMixture, rho, n, seed, *, workers=1, stream=0):
    """``n`` seeded draws of ``(U1, U(rho))``."""
    rho = _check_rho(rho)
    rc = math.sqrt(1.0 - rho * rho)

    def chunk(rng, k):
        r, s, i1, i2, c = _draw(mix, rng, k)
        u1 = r * i1 * s
        return u1, rho * u1 + rc * r * i2 * c

    parts = _mc.run_chunks(chunk, n, seed, workers=workers, stream=stream)
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def sample_s_rho(mix: ScaleMixture, rho, n, seed, *, workers=1, stream=0):
    """``n`` seeded draws of ``S(rho) = rho I1 S + sqrt(1 - rho^2) I2 sqrt(1 - S^2)``."""
    rho = _check_rho(rho)
    rc = math.sqrt(1.0 - rho * rho)

    def chunk(rng, k):
        _, s, i1, i2, c = _draw(mix, rng, k)
        return rho * i1 * s + rc * i2 * c

    return np.concatenate(_mc.run_chunks(chunk, n, seed, workers=workers, stream=stream))


# ----------------------------------------------------------------------------
# tail formulas


def s_rho_tail(spec: LocalGSpec, q11, u):
    """``P(S(rho) > 1 - u) ~ q L_rho(sqrt(u)) (2 u (1 - rho^2))**(alpha_rho/2)``."""
    u = float(u)
    if not 0 < u < spec.epsilon:
        raise DomainError(f"u={u} is outside the local window (0, {spec.epsilon})")
    a = spec.alpha_rho
    return float(q11) * float(spec.L_rho(math.sqrt(u))) * (2.0 * u * (1.0 - spec.rho ** 2)) ** (a / 2.0)


def _log_local(spec, t):
    """``log L_rho(sqrt(t)) + (alpha/2) log(2 t (1 - rho^2))`` for a small scale ``t``."""
    a = spec.alpha_rho
    lv = math.log(float(spec.L_rho(math.sqrt(t))))
    if a > 0:
        lv += 0.5 * a * math.log(2.0 * t * (1.0 - spec.rho ** 2))
    return lv


def u_rho_tail_gumbel(mix: ScaleMixture, spec: LocalGSpec, u):
    """``P(U(rho) > u)`` for a Gumbel-class radius.

    ``q Gamma(a/2 + 1) L_rho(eta^-1/2) (2 (1 - rho^2) / eta)**(a/2) P(R > u)``
    with ``eta = u w(u)`` and ``a = alpha_rho``.
    """
    tail = mix.r.tail
    if not isinstance(tail, Gumbel):
        raise DomainError(f"radius must be in the Gumbel class, got {tail.name}")
    u = float(u)
    eta = float(tail.eta(u))
    if not eta > spec.epsilon ** -2:
        raise PreAsymptoticError(
            f"u w(u) = {eta:.6g} does not exceed epsilon^-2 = {spec.epsilon ** -2:g} at u={u:g}")
    a = spec.alpha_rho
    lv = (math.log(mix.q11) + math.lgamma(a / 2.0 + 1.0) + _log_local(spec, 1.0 / eta)
          + float(mix.r.logsf(u)))
    return ApproxResult.from_log(lv, "gumbel", "mixture-gumbel-tail")


def u_rho_tail_weibull(mix: ScaleMixture, spec: LocalGSpec, x):
    """``P(U(rho) > 1 - x)`` for a radius with endpoint 1 in the Weibull class.

    ``q Gamma(a/2+1) Gamma(g+1) / Gamma(a/2+g+1) L_rho(x**1/2) (2 x (1 - rho^2))**(a/2) P(R > 1 - x)``.
    """
    tail = mix.r.tail
    if not isinstance(tail, Weibull):
        raise DomainError(f"radius must be in the Weibull class, got {tail.name}")
    if abs(mix.r.support_hi - 1.0) > 1e-12:
        raise DomainError(f"radius endpoint is {mix.r.support_hi}, not 1")
    if not tail.gamma > 0:
        raise DomainError("radius tail index must be positive")
    x = float(x)
    if not 0 < x < spec.epsilon ** 2:
        raise PreAsymptoticError(f"distance to the endpoint {x:g} is not below epsilon^2 = {spec.epsilon ** 2:g}")
    a, g = spec.alpha_rho, tail.gamma
    const = math.lgamma(a / 2.0 + 1.0) + math.lgamma(g + 1.0) - math.lgamma(a / 2.0 + g + 1.0)
    lv = math.log(mix.q11) + const + _log_local(spec, x) + math.log(float(mix.r.gap_sf(x)))
    return ApproxResult.from_log(lv, "weibull", "mixture-weibull-tail")


def composite_factor_moment(mix: ScaleMixture, rho, gamma):
    """``(E[max(S(rho), 0)**gamma], P(S(rho) <= 0))`` by quadrature over the law of ``S``.

    Integrates in the probability scale ``S = Q(p)`` so no density is needed.
    """
    rho = _check_rho(rho)
    rc = math.sqrt(1.0 - rho * rho)
    d = mix.s.dist
    moment, neg = 0.0, 0.0
    for prob, (i1, i2) in zip(mix.sign_law, SIGNS):
        if prob == 0:
            continue

        def h(p):
            s = float(d.ppf(p))
            v = rho * i1 * s + rc * i2 * math.sqrt(max(1.0 - s * s, 0.0))
            return v

        m, _ = quad(lambda p: max(h(p), 0.0) ** gamma, 0.0, 1.0, rtol=1e-10, what="composite factor moment")
        z, _ = quad(lambda p: 1.0 if h(p) <= 0 else 0.0, 0.0, 1.0, rtol=1e-8, what="negative mass")
        moment += prob * m
        neg += prob * z
    return moment, neg


def u_rho_tail_frechet(mix: ScaleMixture, rho, u):
    """Breiman route for a regularly varying radius: ``P(R > u) E[max(S(rho), 0)**gamma]``.

    Only the positive part of ``S(rho)`` contributes to the upper tail; its
    complementary mass is available from :func:`composite_factor_moment`.
    """
    tail = mix.r.tail
    if not isinstance(tail, Frechet):
        raise DomainError(f"radius must be in the Frechet class, got {tail.name}")
    u = float(u)
    if u <= max(1.0, mix.r.support_lo):
        raise DomainError(f"u={u} must exceed max(1, support_lo={mix.r.support_lo})")
    moment, _ = composite_factor_moment(mix, rho, tail.gamma)
    return ApproxResult.from_log(float(mix.r.logsf(u)) + math.log(moment), "frechet", "breiman")


# ----------------------------------------------------------------------------
# checks and diagnostics


@dataclass(frozen=True)
class BermanResult:
    distance: float
    critical_value: float
    level: float
    n: int
    passed: Optional[bool]  # None when the mixture is not spherical


def berman_identity_check(mix: ScaleMixture, c1, c2, n, seed, *, level=0.01, workers=1):
    """Compare ``c1 U1 + c2 U2`` with ``sqrt(c1^2 + c2^2) U1`` by a two-sample KS distance.

    The two samples come from independent streams of the same seed. For a
    spherical mixture the laws coincide and the check passes when the
    distance is below the critical value at ``level``; for other mixtures
    the distance is reported without a verdict.
    """
    if level not in KS_COEF:
        raise ParameterError(f"level must be one of {sorted(KS_COEF)}")
    c1, c2, n = float(c1), float(c2), int(n)
    norm = math.hypot(c1, c2)

    def lin(rng, k):
        r, s, i1, i2, c = _draw(mix, rng, k)
        return r * (c1 * i1 * s + c2 * i2 * c)

    def scaled(rng, k):
        r, s, i1, _, _ = _draw(mix, rng, k)
        return norm * r * i1 * s

    a = np.concatenate(_mc.run_chunks(lin, n, seed, workers=workers, stream=1))
    b = np.concatenate(_mc.run_chunks(scaled, n, seed, workers=workers, stream=2))
    dist = float(stats.ks_2samp(a, b).statistic)
    crit = KS_COEF[level] * math.sqrt(2.0 / n)
    passed = dist < crit if mix.is_spherical else None
    return BermanResult(dist, crit, level, n, passed)


@dataclass
class IndependenceDiagnostic:
    trajectory: CriterionTrajectory
    b1: List[float]
    b2: List[float]
    gap: List[float]
    gap_increasing: bool
    joint_hits: List[int] = field(default_factory=list)

    def to_csv(self, fh=None):
        own = fh is None
        buf = io.StringIO() if own else fh
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(("n", "value", "log_value", "b1", "b2", "gap", "joint_hits"))
        t = self.trajectory
        for j, n in enumerate(t.u_grid):
            wr.writerow((repr(float(n)), repr(float(t.values[j])), repr(float(t.log_values[j])),
                         repr(self.b1[j]), repr(self.b2[j]), repr(self.gap[j]), self.joint_hits[j]))
        return buf.getvalue() if own else None


def asymptotic_independence_diagnostic(mix: ScaleMixture, rho, n_grid, seed, *,
                                       n_samples=10**7, workers=1):
    """``n P(U1 > b1(n), U(rho) > b2(n))`` along ``n_grid``.

    ``b1(n)`` and ``b2(n)`` are empirical ``1 - 1/n`` quantiles from a single
    shared sample. Vanishing values point to asymptotic independence; the
    gap ``b2(n) - rho b1(n)`` is reported alongside, since its growth is what
    drives the joint exceedances to zero.
    """
    rho = _check_rho(rho)
    grid = [float(n) for n in n_grid]
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("n_grid must be strictly increasing")
    if grid[-1] * 100 > n_samples:
        raise ParameterError("n_grid exceeds what the sample can resolve (need n_samples >= 100 n)")
    u1, ur = sample_pair(mix, rho, n_samples, seed, workers=workers)
    b1, b2, vals, logs, hits, gaps = [], [], [], [], [], []
    for n in grid:
        q = 1.0 - 1.0 / n
        x1 = float(np.quantile(u1, q))
        x2 = float(np.quantile(ur, q))
        h = int(np.count_nonzero((u1 > x1) & (ur > x2)))
        v = n * h / n_samples
        b1.append(x1)
        b2.append(x2)
        gaps.append(x2 - rho * x1)
        hits.append(h)
        vals.append(v)
        logs.append(math.log(v) if v > 0 else -math.inf)
    verdict = trend_verdict(logs)
    traj = CriterionTrajectory(grid, vals, logs, verdict, "joint-exceedance")
    increasing = all(b > a for a, b in zip(gaps, gaps[1:]))
    return IndependenceDiagnostic(traj, b1, b2, gaps, increasing, hits)


def tail_equivalence_ratio(mix: ScaleMixture, rho, u, n, seed, *, workers=1):
    """``P(U(rho) > u) / P(U1 > u)`` from one sample, with a 95% interval.

    Returns ``(ratio, lo, hi)``. The interval uses the delta method on the
    log ratio of two correlated counts: ``Var ~ 1/A + 1/B - 2C/(AB)`` with
    ``A``, ``B`` the marginal and ``C`` the joint exceedance counts.
    """
    u1, ur = sample_pair(mix, rho, n, seed, workers=workers)
    a = int(np.count_nonzero(ur > u))
    b = int(np.count_nonzero(u1 > u))
    if a == 0 or b == 0:
        raise DomainError("no exceedances; choose a smaller threshold or more samples")
    c = int(np.count_nonzero((ur > u) & (u1 > u)))
    ratio = a / b
    var = max(1.0 / a + 1.0 / b - 2.0 * c / (a * b), 0.0)
    hw = _mc.Z95 * math.sqrt(var)
    return ratio, ratio * math.exp(-hw), ratio * math.exp(hw)
