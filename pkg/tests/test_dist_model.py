import math

import numpy as np
import pytest
from scipy import integrate

from randcontract import (
    Frechet,
    Gumbel,
    MCEstimate,
    ParameterError,
    Weibull,
    as_scaling,
    aux_scale_from_mean_excess,
    make_builtin,
    mean_excess,
    normalize_endpoint,
    power_scale,
)
from randcontract.errors import DomainError

BUILTINS = [
    ("exponential", {"rate": 1.5}),
    ("pareto", {"gamma": 2.0, "scale": 1.0}),
    ("uniform01", {}),
    ("beta", {"alpha": 2.0, "beta": 3.0}),
    ("kotz", {"K": 1.0, "q": 0.0, "r": 1.0, "gamma": 0.5}),
    ("kotz", {"K": 2.0, "q": 1.0, "r": 1.0, "gamma": 1.0}),
    ("nearoneexp", {"c1": 1.0, "c2": 5.0}),
    ("lognormal", {"mu": 0.0, "sigma": 1.0}),
    ("spherical", {}),
]


def _grid(d, n=1000):
    lo = d.support_lo
    hi = d.support_hi if math.isfinite(d.support_hi) else float(d.isf(1e-8))
    return np.linspace(lo, hi, n)


@pytest.mark.parametrize("family,params", BUILTINS)
def test_survival_monotone_and_boundaries(family, params):
    d = make_builtin(family, **params)
    s = np.asarray(d.sf(_grid(d)))
    assert np.all(np.diff(s) <= 1e-15)
    atom = d.params.get("atom", 0.0)
    assert float(d.sf(d.support_lo)) == pytest.approx(1.0 - atom, abs=1e-12)
    top = d.support_hi if math.isfinite(d.support_hi) else 1e12
    assert float(d.sf(top)) < 1e-6


@pytest.mark.parametrize("family,params", BUILTINS)
def test_density_integrates_to_one(family, params):
    d = make_builtin(family, **params)
    if not d.has_density:
        pytest.skip("no density")
    if math.isfinite(d.support_hi):
        val, _ = integrate.quad(lambda x: float(d.pdf(x)), d.support_lo, d.support_hi, limit=500)
    else:
        cuts = [d.support_lo] + [float(d.isf(q)) for q in (0.5, 1e-3, 1e-6)]
        val = sum(integrate.quad(lambda x: float(d.pdf(x)), a, b, limit=500)[0] for a, b in zip(cuts, cuts[1:]))
        val += integrate.quad(lambda x: float(d.pdf(x)), cuts[-1], math.inf, limit=500)[0]
    assert val + d.params.get("atom", 0.0) == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("family,params", BUILTINS)
def test_quantile_round_trip(family, params):
    d = make_builtin(family, **params)
    atom = d.params.get("atom", 0.0)
    for p in (0.1, 0.5, 0.9, 0.999):
        if p <= atom:
            assert float(d.ppf(p)) == d.support_lo
            continue
        x = float(d.ppf(p))
        assert float(d.cdf(x)) == pytest.approx(p, rel=1e-7)


@pytest.mark.parametrize("family,params", BUILTINS)
def test_sampler_matches_survival(family, params):
    d = make_builtin(family, **params)
    rng = np.random.default_rng(2024)
    x = d.sample(rng, 100_000)
    for q in (0.9, 0.5, 0.2, 0.05, 0.01):
        t = float(d.isf(q))
        emp = np.mean(x > t)
        se = math.sqrt(q * (1 - q) / x.size)
        assert abs(emp - float(d.sf(t))) <= 3 * se + 1e-12


def test_exponential_survival_value():
    assert make_builtin("exponential", rate=1.0).sf(2.0) == pytest.approx(0.1353352832366127, rel=1e-12)


def test_kotz_aux_function():
    d = make_builtin("KotzType", K=1, q=0, r=1, gamma=0.5)
    assert isinstance(d.tail, Gumbel)
    assert float(d.tail.w(100.0)) == pytest.approx(0.05, rel=1e-12)


def test_tail_classes():
    assert isinstance(make_builtin("pareto", gamma=3).tail, Frechet)
    assert isinstance(make_builtin("lognormal").tail, Gumbel)
    assert isinstance(make_builtin("beta", alpha=2, beta=3).tail, Weibull)
    t = make_builtin("nearoneexp", c1=1, c2=2).tail
    assert isinstance(t, Gumbel) and t.endpoint == 1.0
    assert float(t.w(0.9)) == pytest.approx(200.0, rel=1e-12)


def test_beta_scaling_uses_upper_endpoint_exponent():
    s = as_scaling(make_builtin("beta", alpha=2, beta=3))
    assert s.alpha == 2
    u = 1e-4
    assert float(s.upper_tail(u)) / u ** 2 == pytest.approx(6.0, rel=1e-3)
    assert s.check_regular_variation([1e2, 1e3, 1e4])
    assert as_scaling("uniform01").check_regular_variation([1e2, 1e3, 1e4])


def test_unknown_family_and_bad_params():
    with pytest.raises(ParameterError):
        make_builtin("gamma_distribution")
    with pytest.raises(ParameterError):
        make_builtin("exponential", rate=-1)
    with pytest.raises(ParameterError):
        make_builtin("pareto", shape=2)


def test_power_scale_examples():
    d = make_builtin("pareto", gamma=2, scale=1)
    sq = power_scale(d, 1, 2)
    assert sq.tail.gamma == 1
    assert float(sq.sf(10.0)) == pytest.approx(0.1, rel=1e-12)
    assert power_scale(d, 1, 1) is d
    u2 = power_scale(make_builtin("uniform01"), 2, 1)
    assert isinstance(u2.tail, Weibull) and u2.tail.endpoint == 2
    back = normalize_endpoint(u2)
    assert back.support_hi == 1.0
    assert float(back.sf(0.3)) == pytest.approx(0.7, rel=1e-12)
    with pytest.raises(ParameterError):
        power_scale(d, 0, 1)


@pytest.mark.parametrize("family,params", [("exponential", {}), ("pareto", {"gamma": 2}), ("uniform01", {})])
def test_power_scale_round_trip(family, params):
    d = make_builtin(family, **params)
    c, p = 3.0, 1.7
    e = power_scale(power_scale(d, c, p), c ** (-1 / p), 1 / p)
    xs = _grid(d, 50)[1:-1]
    assert np.allclose(e.sf(xs), d.sf(xs), rtol=1e-9, atol=0)


def test_mean_excess_examples():
    assert mean_excess(make_builtin("exponential"), 5.0) == pytest.approx(1.0, rel=1e-9)
    assert mean_excess(make_builtin("uniform01"), 0.9) == pytest.approx(0.05, rel=1e-9)
    me = mean_excess(make_builtin("kotz", K=1, q=0, r=1, gamma=0.5), 100.0)
    assert me == pytest.approx(22.0, rel=1e-9)  # exact: 2(sqrt(u)+1)
    assert abs(me / 20 - 1) < 0.15


def test_mean_excess_infinite_mean_raises():
    with pytest.raises(DomainError):
        mean_excess(make_builtin("pareto", gamma=1), 10.0)


def test_aux_scale_from_mean_excess():
    w = aux_scale_from_mean_excess(make_builtin("exponential"))
    assert [w(u) for u in (1, 5, 20)] == pytest.approx([1, 1, 1], rel=1e-9)
    w = aux_scale_from_mean_excess(make_builtin("nearoneexp", c1=1, c2=5))
    assert abs(w(0.9) / 500 - 1) < 0.10
    w = aux_scale_from_mean_excess(make_builtin("lognormal"))
    vals = [w(u) for u in (20, 40, 80)]
    assert all(v > 0 for v in vals) and vals[0] > vals[1] > vals[2]


def test_mc_estimate_clipping():
    e = MCEstimate(0.01, 0.05, 1000, 1)
    assert e.ci_lo == 0.0 and e.ci_hi == pytest.approx(0.06)
    with pytest.raises(ValueError):
        MCEstimate(0.1, -1, 10, 1)
