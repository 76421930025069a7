"""
Triggering kernels of the exponential and power-law families.

Powers are evaluated in log space, exp(-theta * log(t + c)), so a shift c near
its lower bound cannot overflow. Powers beyond e**600 saturate, which keeps n*
finite at the theta = 100, c = 1e-4 corner of the default box. Every function
accepts scalars or numpy arrays and returns the same shape.
"""

from typing import TypeVar

import numpy as np

from schema.models import KernelFamily
from schema.schema import KernelParams
from utils.custom_exception import KernelDomainError

ArrayOrFloat = TypeVar("ArrayOrFloat", float, np.ndarray)


def _unwrap(result: np.ndarray):
    return float(result) if np.ndim(result) == 0 else result


# times kappa / theta stays finite for any point of the default box
_LOG_POWER_CAP = 600.0


def _log_power(base: np.ndarray, exponent: float) -> np.ndarray:
    # base ** -exponent
    return np.exp(np.minimum(-exponent * np.log(base), _LOG_POWER_CAP))


def kernel_value(p: KernelParams, t: ArrayOrFloat) -> ArrayOrFloat:
    """Intensity contribution after elapsed time t (events/hour)."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise KernelDomainError("kernel evaluated at negative elapsed time")
    if p.family is KernelFamily.EXP:
        out = p.kappa * p.theta * np.exp(-p.theta * t)
    else:
        out = p.kappa * _log_power(t + p.c, 1.0 + p.theta)
    return _unwrap(out)


def log_kernel_value(p: KernelParams, lags: np.ndarray) -> np.ndarray:
    """log phi(lags); -inf when kappa is 0. Lags are assumed non-negative."""
    lags = np.asarray(lags, dtype=float)
    with np.errstate(divide="ignore"):
        log_kappa = np.log(p.kappa)
    if p.family is KernelFamily.EXP:
        return log_kappa + np.log(p.theta) - p.theta * lags
    return log_kappa - (1.0 + p.theta) * np.log(lags + p.c)


def kernel_integral(p: KernelParams, a: ArrayOrFloat, b: ArrayOrFloat) -> ArrayOrFloat:
    """
    Expected offspring of one event falling in [a, b] after it.

    b may be infinite. Raises KernelDomainError when a < 0 or a > b.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(a < 0) or np.any(a > b):
        raise KernelDomainError("kernel integral needs 0 <= a <= b")
    if p.family is KernelFamily.EXP:
        out = p.kappa * np.exp(-p.theta * a) * -np.expm1(-p.theta * (b - a))
    else:
        shifted = a + p.c
        with np.errstate(invalid="ignore"):
            ratio = np.where(b == a, 0.0, (b - a) / shifted)
        tail = -np.expm1(-p.theta * np.log1p(ratio))
        out = (p.kappa / p.theta) * _log_power(shifted, p.theta) * tail
    return _unwrap(out)


def branching_factor(p: KernelParams) -> float:
    """n*, the expected number of direct offspring per event."""
    if p.family is KernelFamily.EXP:
        return float(p.kappa)
    return float(p.kappa * _log_power(np.float64(p.c), p.theta) / p.theta)


def log_kernel_gradient(p: KernelParams, lags: np.ndarray) -> np.ndarray:
    """
    Partial derivatives of log phi(lag) with respect to (kappa, theta[, c]).

    Returns an array of shape (n_params, len(lags)).
    """
    lags = np.asarray(lags, dtype=float)
    d_kappa = np.full_like(lags, 1.0 / p.kappa)
    if p.family is KernelFamily.EXP:
        return np.vstack([d_kappa, 1.0 / p.theta - lags])
    shifted = lags + p.c
    return np.vstack([d_kappa, -np.log(shifted), -(1.0 + p.theta) / shifted])


def kernel_integral_gradient(p: KernelParams, x: np.ndarray) -> np.ndarray:
    """
    Partial derivatives of kernel_integral(p, 0, x) with respect to (kappa, theta[, c]).

    Returns an array of shape (n_params, len(x)).
    """
    x = np.asarray(x, dtype=float)
    if p.family is KernelFamily.EXP:
        decay = np.exp(-p.theta * x)
        return np.vstack([-np.expm1(-p.theta * x), p.kappa * x * decay])

    c, theta, kappa = p.c, p.theta, p.kappa
    log_ratio = np.log1p(x / c)
    c_pow = _log_power(np.float64(c), theta)
    tail_pow = _log_power(x + c, theta)
    # c^-theta - (x+c)^-theta without cancellation
    mass = c_pow * -np.expm1(-theta * log_ratio)
    integral = (kappa / theta) * mass
    d_kappa = mass / theta
    d_theta = -integral / theta + (kappa / theta) * (-np.log(c) * mass + log_ratio * tail_pow)
    d_c = kappa * (_log_power(x + c, theta + 1.0) - _log_power(np.float64(c), theta + 1.0))
    return np.vstack([d_kappa, d_theta, d_c])


def truncated_delay(p: KernelParams, u: ArrayOrFloat, horizon: float) -> ArrayOrFloat:
    """
    Inverse CDF of the kernel normalised on [0, horizon]; u in [0, 1).

    horizon may be infinite, giving draws from the full normalised kernel.
    """
    u = np.asarray(u, dtype=float)
    if p.family is KernelFamily.EXP:
        mass = -np.expm1(-p.theta * horizon)
        out = -np.log1p(-u * mass) / p.theta
    else:
        mass = -np.expm1(-p.theta * np.log1p(horizon / p.c))
        out = p.c * np.expm1(-np.log1p(-u * mass) / p.theta)
    return _unwrap(out)
