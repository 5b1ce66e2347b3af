"""Accountant checks against closed forms, quadrature, and bound regressions."""

import math

import numpy as np
import pytest
from scipy import integrate, optimize

from miabench import (
    DEFAULT_ORDERS,
    AccountantConfig,
    PrivacyParams,
    advantage,
    check_fpr_fnr_bounds,
    epsilon_from_rdp,
    epsilon_schedule,
    error_bound,
    rdp_subsampled_gaussian,
)


def quadrature_rdp(q, sigma, alpha):
    """Renyi divergence of the subsampled Gaussian by direct integration.

    The moment is E_{x~N(0,s^2)}[((1-q) + q * e^{(2x-1)/(2s^2)})^alpha];
    evaluated in log space so the tails cannot overflow.
    """

    def integrand(x):
        log_ratio = np.logaddexp(math.log(1 - q),
                                 math.log(q) + (2 * x - 1) / (2 * sigma ** 2))
        log_phi = -x * x / (2 * sigma ** 2) - 0.5 * math.log(2 * math.pi * sigma ** 2)
        return math.exp(log_phi + alpha * log_ratio)

    hi = 60 * sigma * max(1.0, alpha)
    val, _ = integrate.quad(integrand, -50 * sigma, hi, limit=400)
    return math.log(val) / (alpha - 1)


def test_rdp_full_sampling_closed_form():
    for sigma in (0.5, 1.0, 2.0):
        for alpha in (1.5, 2.0, 7.0, 32.0):
            got = rdp_subsampled_gaussian(1.0, sigma, alpha)
            assert got == pytest.approx(alpha / (2 * sigma ** 2), rel=1e-14)


def test_rdp_rejects_bad_inputs():
    with pytest.raises(ValueError):
        rdp_subsampled_gaussian(0.0, 1.0, 2.0)
    with pytest.raises(ValueError):
        rdp_subsampled_gaussian(1.5, 1.0, 2.0)
    with pytest.raises(ValueError):
        rdp_subsampled_gaussian(0.5, 0.0, 2.0)
    with pytest.raises(ValueError):
        rdp_subsampled_gaussian(0.5, 1.0, 1.0)


def test_rdp_vanishes_as_q_shrinks():
    values = [rdp_subsampled_gaussian(10.0 ** -k, 1.0, 4.0)
              for k in range(1, 7)]
    assert all(b < a for a, b in zip(values, values[1:]))
    assert values[-1] < 1e-8
    assert all(v >= 0.0 for v in values)


def test_rdp_nondecreasing_in_alpha():
    values = [rdp_subsampled_gaussian(0.01, 1.0, a)
              for a in (1.5, 2.0, 3.0, 4.5, 8.0, 16.0, 64.0)]
    assert all(b >= a for a, b in zip(values, values[1:]))


def test_rdp_integer_alpha_matches_quadrature():
    for q, sigma in ((0.01, 1.0), (0.3, 0.8)):
        for alpha in (2, 3, 4):
            want = quadrature_rdp(q, sigma, alpha)
            got = rdp_subsampled_gaussian(q, sigma, float(alpha))
            assert got == pytest.approx(want, abs=1e-6)


def test_rdp_fractional_alpha_upper_bounds_quadrature():
    for q, sigma in ((0.01, 1.0), (0.1, 1.5)):
        for alpha in (2.5, 3.5, 6.5):
            exact = quadrature_rdp(q, sigma, alpha)
            got = rdp_subsampled_gaussian(q, sigma, alpha)
            assert got >= exact - 1e-9
            assert got <= exact * 1.1 + 1e-9


def test_epsilon_sigma_zero_is_infinite():
    cfg = AccountantConfig(0.01, 0.0, 100, 1e-5)
    assert epsilon_from_rdp(cfg) == math.inf


def test_epsilon_conversion_single_gaussian_release():
    # With q=1 the per-step RDP is alpha/2, so the whole conversion reduces to
    # a one-dimensional minimization checkable with a generic optimizer.
    cfg = AccountantConfig(1.0, 1.0, 1, 1e-5)
    got = epsilon_from_rdp(cfg)

    def objective(alpha):
        return (alpha / 2 + math.log1p(-1 / alpha)
                - (math.log(1e-5) + math.log(alpha)) / (alpha - 1))

    res = optimize.minimize_scalar(objective, bounds=(1.0001, 300.0),
                                   method="bounded")
    assert got >= res.fun - 1e-9
    assert got - res.fun < 0.05
    assert got == pytest.approx(4.75273, abs=1e-3)


def test_epsilon_monotonicity():
    base = dict(sampling_rate=0.01, noise_multiplier=1.0, steps=100, delta=1e-5)
    eps = epsilon_from_rdp(AccountantConfig(**base))
    assert epsilon_from_rdp(AccountantConfig(**{**base, "steps": 200})) >= eps
    assert epsilon_from_rdp(
        AccountantConfig(**{**base, "sampling_rate": 0.02})) >= eps
    assert epsilon_from_rdp(
        AccountantConfig(**{**base, "noise_multiplier": 2.0})) <= eps
    assert epsilon_from_rdp(AccountantConfig(**{**base, "delta": 1e-3})) <= eps


def test_epsilon_extreme_noise_regimes_stay_finite():
    tiny = epsilon_from_rdp(AccountantConfig(0.01, 0.005, 10 ** 6, 1e-5))
    assert math.isfinite(tiny) and tiny > 0
    huge = epsilon_from_rdp(AccountantConfig(0.01, 100.0, 100, 1e-5))
    assert math.isfinite(huge) and huge >= 0


def test_epsilon_schedule_matches_pointwise_accounting():
    schedule = epsilon_schedule(0.05, 1.1, 20, 5, 1e-5)
    assert len(schedule) == 5
    for epoch, eps in enumerate(schedule, 1):
        cfg = AccountantConfig(0.05, 1.1, 20 * epoch, 1e-5)
        assert eps == pytest.approx(epsilon_from_rdp(cfg), rel=1e-12)
    assert all(b >= a for a, b in zip(schedule, schedule[1:]))


def test_epsilon_schedule_sigma_zero():
    assert epsilon_schedule(0.05, 0.0, 20, 3, 1e-5) == [math.inf] * 3


def test_error_bound_reference_values():
    assert error_bound(0.1, 0.0) == pytest.approx(0.4750, abs=1e-4)
    assert error_bound(1.0, 0.0) == pytest.approx(0.2689, abs=1e-4)
    assert error_bound(5.0, 0.0) == pytest.approx(0.0067, abs=1e-4)
    assert error_bound(0.0, 0.0) == 0.5
    assert error_bound(1.0, 0.5) == pytest.approx(0.5 / (1 + math.e), rel=1e-12)


def test_error_bound_monotone_and_bounded():
    grid = [0.0, 0.1, 0.5, 1.0, 2.0, 5.0, 20.0, 500.0]
    values = [error_bound(e, 0.0) for e in grid]
    assert all(b < a for a, b in zip(values, values[1:]))
    assert all(0.0 <= v <= 0.5 for v in values)
    assert error_bound(1000.0, 0.0) == pytest.approx(0.0, abs=1e-300)
    assert error_bound(1.0, 0.2) < error_bound(1.0, 0.1)


def test_error_bound_rejects_bad_inputs():
    with pytest.raises(ValueError):
        error_bound(-0.1, 0.0)
    with pytest.raises(ValueError):
        error_bound(1.0, 1.0)


def test_check_fpr_fnr_bounds_cases():
    assert check_fpr_fnr_bounds(0.6, 0.4, 0.0)
    assert not check_fpr_fnr_bounds(0.6, 0.39, 0.0)
    assert check_fpr_fnr_bounds(0.2, 0.4, math.log(2)) is False  # 0.4+2*0.2<1
    assert check_fpr_fnr_bounds(0.4, 0.4, math.log(2))  # 0.4+0.8=1.2 both ways
    assert not check_fpr_fnr_bounds(0.0, 0.0, 5.0)  # perfect attack
    assert check_fpr_fnr_bounds(1.0, 0.0, 1e6)
    assert not check_fpr_fnr_bounds(0.5, 0.0, 1e6)
    assert check_fpr_fnr_bounds(0.15, 0.0, 1.0, delta=0.9)
    assert not check_fpr_fnr_bounds(0.05, 0.0, 1.0, delta=0.9)


def test_check_fpr_fnr_bounds_symmetric():
    for eps in (0.0, 0.5, 1.0, 3.0, 800.0):
        for fpr in np.linspace(0, 1, 5):
            for fnr in np.linspace(0, 1, 5):
                assert (check_fpr_fnr_bounds(fpr, fnr, eps)
                        == check_fpr_fnr_bounds(fnr, fpr, eps))


def test_check_fpr_fnr_rejects_bad_inputs():
    with pytest.raises(ValueError):
        check_fpr_fnr_bounds(-0.1, 0.5, 1.0)
    with pytest.raises(ValueError):
        check_fpr_fnr_bounds(0.5, 1.1, 1.0)
    with pytest.raises(ValueError):
        check_fpr_fnr_bounds(0.5, 0.5, -1.0)


def test_rate_bounds_imply_error_bound():
    # Adding the two rate constraints gives (fpr+fnr)(1+e^eps) >= 2, i.e. the
    # error lower bound; every passing grid point must therefore respect it.
    for eps in (0.0, 0.3, 1.0, 2.5):
        for fpr in np.linspace(0, 1, 9):
            for fnr in np.linspace(0, 1, 9):
                if check_fpr_fnr_bounds(fpr, fnr, eps):
                    assert (fpr + fnr) / 2 >= error_bound(eps, 0.0) - 1e-12


def test_advantage_values():
    assert advantage(0.5) == 0.0
    assert advantage(0.0) == 1.0
    assert advantage(0.26) == pytest.approx(0.48, rel=1e-12)
    with pytest.raises(ValueError):
        advantage(-0.1)
    with pytest.raises(ValueError):
        advantage(0.6)


def test_privacy_params_validation():
    PrivacyParams(math.inf, 1e-5)
    with pytest.raises(ValueError):
        PrivacyParams(-1.0, 1e-5)
    with pytest.raises(ValueError):
        PrivacyParams(1.0, 1.0)


def test_accountant_config_validation():
    with pytest.raises(ValueError):
        AccountantConfig(0.0, 1.0, 10, 1e-5)
    with pytest.raises(ValueError):
        AccountantConfig(0.5, -1.0, 10, 1e-5)
    with pytest.raises(ValueError):
        AccountantConfig(0.5, 1.0, 0, 1e-5)
    with pytest.raises(ValueError):
        AccountantConfig(0.5, 1.0, 10, 0.0)
    with pytest.raises(ValueError):
        AccountantConfig(0.5, 1.0, 10, 1e-5, order_grid=(0.5, 2.0))
    with pytest.raises(ValueError):
        AccountantConfig(0.5, 1.0, 10, 1e-5, order_grid=())


def test_default_order_grid_shape():
    assert all(a > 1.0 for a in DEFAULT_ORDERS)
    assert list(DEFAULT_ORDERS) == sorted(set(DEFAULT_ORDERS))
    assert min(DEFAULT_ORDERS) < 1.0001  # near-1 orders for tiny-sigma regimes
    assert {float(a) for a in range(2, 65)} <= set(DEFAULT_ORDERS)
    assert 256.0 in DEFAULT_ORDERS
