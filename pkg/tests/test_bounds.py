import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import approximation_error_mp, delta_basic_mp, delta_refined_mp, variance_bound_mp

from localdml import FunctionPredictor, UndefinedScaleError
from localdml.bounds import (
    BERRY_ESSEEN_CONSTANT,
    BoundInputs,
    approximation_error,
    berry_esseen_term,
    bound_report,
    corollary_checklist,
    delta_basic,
    delta_refined,
    empirical_rates,
    plugin_moments,
    sigma_h_scaling_probe,
    variance_bound,
)
from localdml.learners import DictionaryLasso
from localdml.simlab import alpha0, dgp_sample, gamma0

EXAMPLE = BoundInputs(Q_bar=1, alpha_bar=1, sigma_bar=1, sigma=1, q=1, L=5, eps=0.1, n=100,
                      R_gamma=0.01, R_alpha=0.01)


def _random_inputs(rng) -> BoundInputs:
    return BoundInputs(
        Q_bar=rng.uniform(0, 5), q=rng.uniform(0.05, 1), sigma_bar=rng.uniform(0, 3),
        alpha_bar=rng.uniform(0, 10), alpha_trim=rng.uniform(0, 10), eps=rng.uniform(0.01, 0.99),
        eps_prime=rng.uniform(0.01, 0.99), L=int(rng.integers(2, 11)), n=int(rng.integers(10, 10**6)),
        R_gamma=rng.uniform(0, 0.5), R_alpha=rng.uniform(0, 0.5), P_gamma=rng.uniform(0, 0.5),
        P_alpha=rng.uniform(0, 0.5), sigma=rng.uniform(0.1, 5), kappa=rng.uniform(0.1, 5),
        zeta=rng.uniform(0.1, 5), theta_error=rng.normal(scale=0.3),
    )


# ---- examples ------------------------------------------------------------------------------


def test_delta_basic_worked_example():
    # 3*5/(0.1*1) * ((1 + 1)*0.1 + 0.1 + sqrt(100*0.0001)) = 150 * 0.4
    assert delta_basic(EXAMPLE) == pytest.approx(60.0, rel=1e-14)
    assert delta_basic_mp(EXAMPLE.as_dict()) == pytest.approx(60.0, rel=1e-14)


def test_zero_rates_give_zero():
    b = EXAMPLE.replace(R_gamma=0.0, R_alpha=0.0, P_gamma=0.0, P_alpha=0.0)
    assert delta_basic(b) == 0.0 and delta_refined(b) == 0.0


def test_doubling_eps_halves_delta_basic():
    assert delta_basic(EXAMPLE.replace(eps=0.2)) == pytest.approx(delta_basic(EXAMPLE) / 2, rel=1e-14)


def test_zero_scale_rejected():
    with pytest.raises(UndefinedScaleError):
        delta_basic(EXAMPLE.replace(sigma=0.0))
    with pytest.raises(UndefinedScaleError):
        berry_esseen_term(1.0, 0.0, 10)


def test_refined_product_term_cases():
    base = EXAMPLE.replace(alpha_trim=0.0, Q_bar=0.0, alpha_bar=0.0, sigma_bar=0.0)
    # with the other terms zeroed only the product term remains
    assert delta_refined(base) == pytest.approx(math.sqrt(100 * 0.01 * 0.01), rel=1e-14)
    assert delta_refined(base.replace(P_gamma=0.0)) == 0.0


def test_refined_min_term_symmetric():
    rng = np.random.default_rng(3)
    for _ in range(50):
        rg, pg, ra, pa = rng.uniform(0, 1, 4)
        b = EXAMPLE.replace(Q_bar=0.0, alpha_bar=0.0, alpha_trim=0.0, sigma_bar=0.0,
                            R_gamma=rg, P_gamma=pg, R_alpha=ra, P_alpha=pa)
        s = b.replace(R_gamma=ra, P_gamma=pa, R_alpha=rg, P_alpha=pg)
        assert delta_refined(b) == pytest.approx(delta_refined(s), rel=1e-14)


def test_berry_esseen_examples():
    assert berry_esseen_term(1.0, 1.0, 1) == BERRY_ESSEEN_CONSTANT == 0.4748
    assert berry_esseen_term(2.0, 1.0, 64) == pytest.approx(0.4748, rel=1e-15)
    assert berry_esseen_term(1.0, 1.0, 400) == pytest.approx(berry_esseen_term(1.0, 1.0, 100) / 2)


def test_variance_bound_examples():
    b = EXAMPLE.replace(R_gamma=0.0, R_alpha=0.0, zeta=0.0, theta_error=0.0)
    assert variance_bound(b).total == 0.0
    d1 = variance_bound(EXAMPLE).delta_double_prime
    d4 = variance_bound(EXAMPLE.replace(n=400)).delta_double_prime
    assert d4 == pytest.approx(d1 / 2, rel=1e-14)


def test_approximation_error_examples():
    full = approximation_error(1.0, 0.2, 2, 100, 0.2 ** -0.5)
    half = approximation_error(1.0, 0.1, 2, 100, 0.1 ** -0.5)
    assert half / full == pytest.approx(2 ** -2.5, rel=1e-13)
    assert approximation_error(1.0, 1e-8, 2, 100, 1.0) < 1e-14
    with pytest.raises(ValueError):
        approximation_error(1.0, 0.1, 0.5, 100, 1.0)


def test_input_validation():
    with pytest.raises(ValueError):
        BoundInputs(eps=1.0)
    with pytest.raises(ValueError):
        BoundInputs(q=1.5)
    with pytest.raises(ValueError):
        BoundInputs(R_gamma=-0.1)


# ---- dual implementation -------------------------------------------------------------------------


def test_dual_implementation_on_random_inputs():
    rng = np.random.default_rng(2024)
    for _ in range(100):
        b = _random_inputs(rng)
        d = b.as_dict()
        assert delta_basic(b) == pytest.approx(delta_basic_mp(d), rel=1e-12, abs=1e-12)
        assert delta_refined(b) == pytest.approx(delta_refined_mp(d), rel=1e-12, abs=1e-12)
        vb = variance_bound(b)
        ref = variance_bound_mp(d)
        np.testing.assert_allclose([vb.delta_prime, vb.delta_double_prime, vb.total], ref, rtol=1e-12, atol=1e-12)
        C, h, v = rng.uniform(0.1, 3), rng.uniform(0.01, 1), rng.uniform(1, 4)
        assert approximation_error(C, h, v, b.n, b.sigma) == pytest.approx(
            approximation_error_mp(C, h, v, b.n, b.sigma), rel=1e-12)


# ---- monotonicity ---------------------------------------------------------------------------------

INCREASING = ("R_gamma", "R_alpha", "P_gamma", "P_alpha", "Q_bar", "alpha_bar", "alpha_trim", "sigma_bar")


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), field=st.sampled_from(INCREASING + ("eps", "sigma")),
       step=st.floats(1e-6, 1.0))
def test_deltas_monotone_under_directional_perturbation(seed, field, step):
    b = _random_inputs(np.random.default_rng(seed))
    value = getattr(b, field)
    if field == "eps":
        moved = b.replace(eps=value + (1 - value) * step / 2)
    else:
        moved = b.replace(**{field: value + step})
    for fn in (delta_basic, delta_refined):
        before, after = fn(b), fn(moved)
        tol = 1e-12 * max(abs(before), 1.0)
        if field in INCREASING:
            assert after >= before - tol
        else:
            assert after <= before + tol


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_variance_total_zero_iff_parts_zero(seed):
    rng = np.random.default_rng(seed)
    b = _random_inputs(rng)
    if rng.uniform() < 0.5:
        b = b.replace(theta_error=0.0, R_gamma=0.0, R_alpha=0.0, zeta=0.0)
    vb = variance_bound(b)
    assert (vb.total == 0) == (vb.delta_prime == 0 and vb.delta_double_prime == 0)


# ---- checklist --------------------------------------------------------------------------------------


def test_checklist_zero_rates_all_flags_true():
    seq = [BoundInputs(n=n) for n in (100, 1000, 10000)]
    report = corollary_checklist(seq)
    assert all(report.flags.values())
    assert report.condition_1 == [0.0] * 3 and report.condition_3 == [0.0] * 3


def test_checklist_constant_rates_fail_product_condition():
    seq = [BoundInputs(n=n, R_gamma=0.01, R_alpha=0.01) for n in (100, 1000, 10000)]
    report = corollary_checklist(seq)
    assert not report.flags["condition_3"]
    assert report.condition_3[0] < report.condition_3[-1]


def test_checklist_shrinking_rates_pass():
    ns = (100, 1000, 10000, 100000)
    seq = [BoundInputs(n=n, R_gamma=n ** -0.6, R_alpha=n ** -0.6) for n in ns]
    report = corollary_checklist(seq)
    assert report.flags["condition_3"]
    np.testing.assert_allclose(report.condition_3, [n ** -0.1 for n in ns], rtol=1e-12)


def test_checklist_requires_increasing_n():
    with pytest.raises(ValueError):
        corollary_checklist([BoundInputs(n=100), BoundInputs(n=100)])


# ---- empirical helpers ---------------------------------------------------------------------------


def test_empirical_rates_examples():
    Z = dgp_sample(1000, 1).features()
    a0 = alpha0()
    shifted = FunctionPredictor(lambda Z: gamma0.predict(Z) + 1.0)
    rates = empirical_rates([gamma0, shifted], [a0, a0], gamma0, a0, Z)
    assert rates.per_fold_gamma == [0.0, 1.0]
    assert rates.R_alpha == 0.0


def test_lasso_rate_non_increasing_in_n():
    Z_eval = dgp_sample(20_000, 99).features()
    rates = []
    for n in (250, 1000, 4000):
        data = dgp_sample(n, n)
        fit = DictionaryLasso(dictionary="low").fit(data.features(), data.y)
        rates.append(empirical_rates([fit], [], gamma0, alpha0(), Z_eval).R_gamma)
    assert rates[0] >= rates[1] >= rates[2]


def test_plugin_moments():
    psi = np.array([1.0, -1.0, 1.0, -1.0])
    pm = plugin_moments(psi)
    assert pm.sigma == 1.0 and pm.kappa == pytest.approx(1.0) and pm.zeta == 1.0
    assert pm.berry_esseen == pytest.approx(0.4748 / 2)
    assert pm.as_dict()["source"] == "plug-in"


def test_bound_report_includes_approximation_term_when_possible():
    rep = bound_report(EXAMPLE.replace(h=0.1, v_order=2, approx_constant=1.0), sigma_h=2.0)
    assert rep["delta_basic"] == pytest.approx(60.0)
    assert rep["approximation_error"] == pytest.approx(math.sqrt(100) * 0.01 / 2)
    assert "approximation_error" not in bound_report(EXAMPLE)


# ---- scaling probe ------------------------------------------------------------------------------


@pytest.fixture(scope="module")
def big_sample():
    return dgp_sample(100_000, 2025)


def test_scaling_probe_global_is_flat(big_sample):
    probe = sigma_h_scaling_probe([0.4, 0.2, 0.1, 0.05], big_sample, gamma0, alpha0, point=None)
    assert abs(probe.slope) < 1e-12


def test_scaling_probe_local_slope_band(big_sample):
    probe = sigma_h_scaling_probe([0.4, 0.2, 0.1, 0.05], big_sample, gamma0, alpha0)
    assert -0.65 <= probe.slope <= -0.35


def test_scaling_probe_stable_when_n_doubles(big_sample):
    hs = [0.4, 0.2, 0.1, 0.05]
    a = sigma_h_scaling_probe(hs, big_sample, gamma0, alpha0).slope
    b = sigma_h_scaling_probe(hs, dgp_sample(200_000, 7), gamma0, alpha0).slope
    assert abs(a - b) < 0.05


def test_scaling_probe_needs_four_points(big_sample):
    with pytest.raises(ValueError):
        sigma_h_scaling_probe([0.4, 0.2, 0.1], big_sample, gamma0, alpha0)

