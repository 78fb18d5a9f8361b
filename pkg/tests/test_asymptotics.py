import math
import itertools

import pytest

from randcontract import (
    DomainError,
    PreAsymptoticError,
    PreconditionError,
    ProductModel,
    as_scaling,
    breiman_tail,
    cte_asymptotic,
    cte_var_ratio,
    frechet_density_ratio,
    gumbel_density,
    gumbel_product_tail,
    make_builtin,
    vm_density_ratio_check,
    weibull_density_ratio,
    weibull_product_tail,
)
from randcontract.dist_model import ScalingSpec

U = as_scaling("uniform01")


def model(r, *factors):
    return ProductModel(r, list(factors) or [U])


def test_breiman_pareto_uniform():
    m = model(make_builtin("pareto", gamma=2))
    for u in (1.5, 10.0, 1e3):
        assert breiman_tail(m, u).value == pytest.approx(u ** -2 / 3, rel=1e-12)
    assert breiman_tail(m, 10).value == pytest.approx(3.3333333e-3, rel=1e-7)


def test_breiman_degenerate_factors_and_beta():
    one = as_scaling(make_builtin("degenerate", value=1.0))
    m = model(make_builtin("pareto", gamma=2), one, one)
    assert breiman_tail(m, 7.0).value == pytest.approx(7.0 ** -2, rel=1e-12)
    m = model(make_builtin("pareto", gamma=1), as_scaling(make_builtin("beta", alpha=1, beta=1)))
    assert breiman_tail(m, 100.0).value == pytest.approx(5e-3, rel=1e-10)


def test_breiman_rejects_non_frechet_and_small_u():
    with pytest.raises(DomainError):
        breiman_tail(model(make_builtin("exponential")), 10)
    with pytest.raises(DomainError):
        breiman_tail(model(make_builtin("pareto", gamma=2)), 0.5)


def test_gumbel_product_tail_values():
    m = model(make_builtin("exponential"))
    assert gumbel_product_tail(m, 20).value == pytest.approx(math.exp(-20) / 20, rel=1e-12)
    assert gumbel_product_tail(m, 20).value == pytest.approx(1.0306e-10, rel=1e-4)


def test_gumbel_product_tail_beta_example():
    a, b = 2.0, 3.0
    m = model(make_builtin("exponential"), as_scaling(make_builtin("beta", alpha=a, beta=b)))
    u = 200.0
    ref = math.gamma(a + b) / math.gamma(b) * u ** -a * math.exp(-u)
    assert gumbel_product_tail(m, u).value == pytest.approx(ref, rel=2e-2)


def test_gumbel_product_tail_kotz_example():
    K, q, r, g, a, b = 1.0, 0.0, 1.0, 0.5, 2.0, 3.0
    m = model(make_builtin("kotz", K=K, q=q, r=r, gamma=g), as_scaling(make_builtin("beta", alpha=a, beta=b)))
    u = 1e6
    log_ref = (math.log(K) - a * math.log(r * g) + math.lgamma(a + b) - math.lgamma(b)
               + (q - a * g) * math.log(u) - r * u ** g)
    res = gumbel_product_tail(m, u)
    assert math.exp(res.log_value - log_ref) == pytest.approx(1.0, rel=1e-2)


def test_gumbel_guard():
    m = model(make_builtin("exponential"))
    with pytest.raises(PreAsymptoticError):
        gumbel_product_tail(m, 0.9)
    with pytest.raises(DomainError):
        gumbel_product_tail(model(make_builtin("pareto", gamma=2)), 10)


def test_gumbel_reduction_with_uniform_factor():
    r = make_builtin("kotz", K=1, q=0, r=1, gamma=0.5)
    m = model(r, as_scaling(make_builtin("beta", alpha=1, beta=1)))
    for u in (100.0, 1e4):
        eta = u * float(r.tail.w(u))
        assert gumbel_product_tail(m, u).value == pytest.approx(float(r.sf(u)) / eta, rel=1e-12)


def test_weibull_product_tail_values():
    m = model(make_builtin("uniform01"))
    assert weibull_product_tail(m, 0.99).value == pytest.approx(5e-5, rel=1e-12)
    m = model(make_builtin("uniform01"), as_scaling(make_builtin("beta", alpha=2, beta=3)))
    assert weibull_product_tail(m, 0.999).value == pytest.approx(2e-9, rel=2e-3)


def test_weibull_requires_unit_endpoint():
    from randcontract import power_scale
    r = power_scale(make_builtin("uniform01"), 2, 1)
    with pytest.raises(DomainError):
        weibull_product_tail(model(r), 0.99)


def test_log_space_consistency_and_deep_tail():
    m = model(make_builtin("exponential"))
    res = gumbel_product_tail(m, 50)
    assert abs(math.exp(res.log_value) - res.value) <= 1e-12 * res.value
    deep = gumbel_product_tail(m, 1000)
    assert deep.value == 0.0
    assert deep.log_value == pytest.approx(-1000 - math.log(1000), rel=1e-14)


def test_factor_order_invariance():
    r = make_builtin("exponential")
    fs = [U, as_scaling(make_builtin("beta", alpha=2, beta=3)), as_scaling("spherical")]
    logs = {gumbel_product_tail(ProductModel(r, list(p)), 30).log_value for p in itertools.permutations(fs)}
    assert len(logs) == 1
    r = make_builtin("uniform01")
    logs = {weibull_product_tail(ProductModel(r, list(p)), 0.99).log_value for p in itertools.permutations(fs)}
    assert len(logs) == 1


def test_two_sided_risk_rejected():
    from randcontract.dist_model import DistributionSpec, Gumbel
    import numpy as np
    from scipy import stats
    n = stats.norm()
    d = DistributionSpec("Normal", n.sf, n.ppf, lambda rng, k: rng.standard_normal(k), -math.inf, math.inf,
                         Gumbel(lambda u: np.asarray(u)))
    with pytest.raises(DomainError):
        ProductModel(d, [U])


def test_density_ratio_predictions():
    m = model(make_builtin("pareto", gamma=2))
    assert frechet_density_ratio(m, condition="a1") == 2
    with pytest.raises(PreconditionError):
        frechet_density_ratio(m)
    assert weibull_density_ratio(model(make_builtin("uniform01"))) == 2
    half = ScalingSpec(make_builtin("spherical"), 0.5, lambda x: 1.0, True)
    assert weibull_density_ratio(model(make_builtin("uniform01"), half)) == 1.5
    assert weibull_density_ratio(model(make_builtin("uniform01"), as_scaling(make_builtin("beta", alpha=2, beta=3)))) == 3


def test_gumbel_density_needs_assertion():
    m = model(make_builtin("exponential"))
    with pytest.raises(PreconditionError):
        gumbel_density(m, 20)
    assert gumbel_density(m, 20, conditions_asserted=True).value == pytest.approx(1.0306e-10, rel=1e-4)


def test_vm_ratio_predictions():
    m = model(make_builtin("exponential"))
    assert vm_density_ratio_check(m, 30, 0, risk_density_vm=True)[0] == 1.0
    assert vm_density_ratio_check(m, 30, 1, risk_density_vm=True)[0] == pytest.approx(0.367879441, rel=1e-9)
    assert vm_density_ratio_check(m, 30, -0.5, risk_density_vm=True)[0] == pytest.approx(1.6487212707, rel=1e-9)
    with pytest.raises(PreconditionError):
        vm_density_ratio_check(m, 30, 1)


def test_cte_examples():
    e = make_builtin("exponential")
    assert cte_asymptotic(e, 10) == 11
    assert cte_asymptotic(model(e), 10) == 11
    assert cte_asymptotic(make_builtin("kotz", K=1, q=0, r=1, gamma=1), 50) == pytest.approx(51)
    assert cte_var_ratio(e, 1 - math.exp(-20)) == pytest.approx(1.05, rel=1e-9)
    assert cte_var_ratio(e, tail_prob=math.exp(-100)) == pytest.approx(1.01, rel=1e-12)
    trend = [cte_var_ratio(e, tail_prob=math.exp(-u)) for u in (10, 20, 50, 100)]
    assert all(b < a for a, b in zip(trend, trend[1:])) and trend[-1] > 1
    with pytest.raises(DomainError):
        cte_asymptotic(make_builtin("pareto", gamma=2), 10)
