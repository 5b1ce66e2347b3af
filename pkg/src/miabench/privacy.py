"""Renyi-DP accounting for the subsampled Gaussian mechanism and adversary-error bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

# Near-1 orders matter when sigma is tiny and epsilon huge; the optimum then
# sits at alpha - 1 ~ 1e-4, far below the classic integer grid.
DEFAULT_ORDERS = tuple(sorted(
    {1.0 + 10.0 ** (k / 4.0) for k in range(-20, 0)}
    | {1.25, 1.5, 1.75, 2.25, 2.5, 3.5, 4.5}
    | {float(a) for a in range(2, 65)}
    | {128.0, 256.0}
))


@dataclass(frozen=True)
class PrivacyParams:
    """An (epsilon, delta) guarantee; epsilon may be infinite (sigma = 0)."""

    epsilon: float
    delta: float

    def __post_init__(self):
        if self.epsilon < 0.0 or math.isnan(self.epsilon):
            raise ValueError("epsilon must be >= 0")
        if not 0.0 <= self.delta < 1.0:
            raise ValueError("delta must lie in [0, 1)")


@dataclass(frozen=True)
class AccountantConfig:
    """Inputs of the accountant: sampling rate q, noise multiplier, steps, delta."""

    sampling_rate: float
    noise_multiplier: float
    steps: int
    delta: float
    order_grid: tuple = field(default=DEFAULT_ORDERS)

    def __post_init__(self):
        if not 0.0 < self.sampling_rate <= 1.0:
            raise ValueError("sampling_rate must lie in (0, 1]")
        if self.noise_multiplier < 0.0:
            raise ValueError("noise_multiplier must be >= 0")
        if self.steps < 1:
            raise ValueError("steps must be positive")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        grid = tuple(float(a) for a in self.order_grid)
        if not grid or any(a <= 1.0 for a in grid):
            raise ValueError("order grid must be non-empty with every order > 1")
        object.__setattr__(self, "order_grid", grid)


def _log_add(a, b):
    if a == -math.inf:
        return b
    if b == -math.inf:
        return a
    lo, hi = min(a, b), max(a, b)
    return math.log1p(math.exp(lo - hi)) + hi


def _log_sub(a, b):
    # log(exp(a) - exp(b)); the running sums this supports stay positive.
    if b == -math.inf:
        return a
    if a == b:
        return -math.inf
    if a < b:
        raise ValueError("log_sub needs a >= b")
    return math.log(math.expm1(a - b)) + b


def _log_erfc(x):
    return math.log(2.0) + special.log_ndtr(-x * 2.0 ** 0.5)


def _log_a_int(q, sigma, alpha):
    # Binomial expansion of the subsampled-Gaussian moment at integer alpha.
    log_a = -math.inf
    for i in range(alpha + 1):
        log_coef = (special.gammaln(alpha + 1) - special.gammaln(i + 1)
                    - special.gammaln(alpha - i + 1))
        s = (log_coef + i * math.log(q) + (alpha - i) * math.log1p(-q)
             + (i * i - i) / (2.0 * sigma ** 2))
        log_a = _log_add(log_a, s)
    return log_a


def _log_a_frac(q, sigma, alpha):
    # Two-series upper bound at fractional alpha, split at z0 where the
    # mixture and base densities cross; converges once terms fall below e^-30.
    log_a0, log_a1 = -math.inf, -math.inf
    z0 = sigma ** 2 * math.log(1.0 / q - 1.0) + 0.5
    i = 0
    while True:
        coef = special.binom(alpha, i)
        log_coef = math.log(abs(coef))
        j = alpha - i
        log_t0 = log_coef + i * math.log(q) + j * math.log1p(-q)
        log_t1 = log_coef + j * math.log(q) + i * math.log1p(-q)
        log_e0 = math.log(0.5) + _log_erfc((i - z0) / (math.sqrt(2.0) * sigma))
        log_e1 = math.log(0.5) + _log_erfc((z0 - j) / (math.sqrt(2.0) * sigma))
        log_s0 = log_t0 + (i * i - i) / (2.0 * sigma ** 2) + log_e0
        log_s1 = log_t1 + (j * j - j) / (2.0 * sigma ** 2) + log_e1
        if coef > 0:
            log_a0 = _log_add(log_a0, log_s0)
            log_a1 = _log_add(log_a1, log_s1)
        else:
            log_a0 = _log_sub(log_a0, log_s0)
            log_a1 = _log_sub(log_a1, log_s1)
        i += 1
        if i > alpha and max(log_s0, log_s1) < -30.0:
            break
    return _log_add(log_a0, log_a1)


def rdp_subsampled_gaussian(q, sigma, alpha):
    """Per-step Renyi divergence bound at order alpha for sampling rate q."""
    if not 0.0 < q <= 1.0:
        raise ValueError("q must lie in (0, 1]")
    if sigma <= 0.0:
        raise ValueError("sigma must be positive")
    if alpha <= 1.0:
        raise ValueError("alpha must exceed 1")
    if q == 1.0:
        return alpha / (2.0 * sigma ** 2)
    if float(alpha).is_integer():
        log_a = _log_a_int(q, sigma, int(alpha))
    else:
        log_a = _log_a_frac(q, sigma, alpha)
    return max(log_a / (alpha - 1.0), 0.0)


def _epsilon_at_order(rdp_total, alpha, delta):
    # Conversion from an RDP point to (epsilon, delta), tight form.
    return (rdp_total + math.log1p(-1.0 / alpha)
            - (math.log(delta) + math.log(alpha)) / (alpha - 1.0))


def epsilon_from_rdp(config):
    """Best epsilon over the order grid after composing `steps` releases."""
    if config.noise_multiplier == 0.0:
        return math.inf
    best = math.inf
    for alpha in config.order_grid:
        rdp = rdp_subsampled_gaussian(config.sampling_rate,
                                      config.noise_multiplier, alpha)
        best = min(best, _epsilon_at_order(config.steps * rdp, alpha, config.delta))
    return max(best, 0.0)


def epsilon_schedule(q, sigma, steps_per_epoch, epochs, delta,
                     order_grid=DEFAULT_ORDERS):
    """Accounted epsilon after each of 1..epochs epochs; one RDP pass, reused."""
    if sigma == 0.0:
        return [math.inf] * epochs
    rdp = [rdp_subsampled_gaussian(q, sigma, a) for a in order_grid]
    out = []
    for epoch in range(1, epochs + 1):
        steps = epoch * steps_per_epoch
        best = min(_epsilon_at_order(steps * r, a, delta)
                   for r, a in zip(rdp, order_grid))
        out.append(max(best, 0.0))
    return out


def error_bound(epsilon, delta=0.0):
    """Lower bound (1 - delta) / (1 + e^epsilon) on any attacker's P_err."""
    if epsilon < 0.0:
        raise ValueError("epsilon must be >= 0")
    if not 0.0 <= delta < 1.0:
        raise ValueError("delta must lie in [0, 1)")
    return float((1.0 - delta) * special.expit(-epsilon))


def check_fpr_fnr_bounds(fpr, fnr, epsilon, delta=0.0):
    """True iff FPR + e^eps * FNR >= 1 - delta and FNR + e^eps * FPR >= 1 - delta."""
    for rate in (fpr, fnr):
        if not 0.0 <= rate <= 1.0:
            raise ValueError("rates must lie in [0, 1]")
    if epsilon < 0.0:
        raise ValueError("epsilon must be >= 0")
    # Cap the exponent below the float overflow point; rates are bounded by 1
    # so anything past e^709 already dwarfs 1 - delta unless the rate is 0.
    e = math.exp(min(epsilon, 709.0))
    return bool(fpr + e * fnr >= 1.0 - delta and fnr + e * fpr >= 1.0 - delta)


def advantage(p_err):
    """Membership advantage 1 - 2 * P_err."""
    if not 0.0 <= p_err <= 0.5:
        raise ValueError("p_err must lie in [0, 0.5]")
    return 1.0 - 2.0 * p_err
