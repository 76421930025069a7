"""
Log-likelihood of a Hawkes process with zero background rate.

The process is conditioned on the first event: log-intensities are summed from
the second event on, while the compensator counts offspring mass from every
event, the first included. Evaluation is quadratic in the event count; the
pairwise lags of a series are computed once in a LagTable and reused.
"""

import logging
from collections.abc import Sequence

import numpy as np
from scipy.special import logsumexp

from core.kernels import (
    kernel_integral,
    kernel_integral_gradient,
    kernel_value,
    log_kernel_gradient,
    log_kernel_value,
)
from schema.schema import EventSeries, KernelParams
from utils.custom_exception import KernelDomainError, LikelihoodError

logger = logging.getLogger(__name__)

TINY = np.finfo(float).tiny


class LagTable:
    """
    All lags t_j - t_i (i < j) of one series, flattened row by row.

    Row j (j >= 1) holds the lags from every earlier event to t_j and starts at
    offset j(j-1)/2.
    """

    def __init__(self, times: np.ndarray, observation_end: float):
        self.times = np.asarray(times, dtype=float)
        self.observation_end = float(observation_end)
        n = self.times.size
        rows, cols = np.tril_indices(n, k=-1)
        self.lags = self.times[rows] - self.times[cols]
        self.row_starts = (np.arange(1, n) * np.arange(0, n - 1)) // 2
        self.remaining = self.observation_end - self.times

    @classmethod
    def from_series(cls, series: EventSeries) -> "LagTable":
        return cls(series.as_array(), series.observation_end)

    @property
    def n_events(self) -> int:
        return int(self.times.size)


def _table(series: EventSeries, table: LagTable | None) -> LagTable:
    return table if table is not None else LagTable.from_series(series)


def _log_intensities(log_phi: np.ndarray, table: LagTable) -> np.ndarray:
    """log lambda(t_j) for j >= 1, summing directly and falling back to logsumexp on underflow."""
    sums = np.add.reduceat(np.exp(log_phi), table.row_starts)
    with np.errstate(divide="ignore"):
        out = np.log(sums)
    low = np.flatnonzero(sums < TINY)
    if low.size:
        ends = np.append(table.row_starts[1:], log_phi.size)
        for j in low:
            out[j] = logsumexp(log_phi[table.row_starts[j] : ends[j]])
    return out


def intensity(p: KernelParams, series: EventSeries, t: float) -> float:
    """lambda(t): kernel contributions of events strictly before t."""
    if t < 0:
        raise KernelDomainError("intensity evaluated at negative time")
    times = series.as_array()
    prior = times[times < t]
    if prior.size == 0:
        return 0.0
    return float(np.sum(kernel_value(p, t - prior)))


def compensator(p: KernelParams, series: EventSeries, table: LagTable | None = None) -> float:
    """Integral of the intensity over [0, T]."""
    table = _table(series, table)
    return float(np.sum(kernel_integral(p, 0.0, table.remaining)))


def log_likelihood(p: KernelParams, series: EventSeries, table: LagTable | None = None) -> float:
    """
    Log-likelihood in nats; -inf when the intensity vanishes at an included event.
    """
    table = _table(series, table)
    penalty = float(np.sum(kernel_integral(p, 0.0, table.remaining)))
    if table.n_events < 2:
        return -penalty
    if p.kappa == 0:
        return float("-inf")
    log_lambda = _log_intensities(log_kernel_value(p, table.lags), table)
    return float(np.sum(log_lambda)) - penalty


def value_and_gradient(
    p: KernelParams, series: EventSeries, table: LagTable | None = None
) -> tuple[float, np.ndarray]:
    """Log-likelihood and its gradient with respect to (kappa, theta[, c])."""
    if p.kappa <= 0:
        raise LikelihoodError("gradient is undefined at kappa = 0")
    table = _table(series, table)
    penalty = float(np.sum(kernel_integral(p, 0.0, table.remaining)))
    grad = -np.sum(kernel_integral_gradient(p, table.remaining), axis=1)
    if table.n_events < 2:
        return -penalty, grad

    log_phi = log_kernel_value(p, table.lags)
    log_lambda = _log_intensities(log_phi, table)
    row_lengths = np.arange(1, table.n_events)
    # share of lambda(t_j) contributed by each earlier event
    weights = np.exp(log_phi - np.repeat(log_lambda, row_lengths))
    grad = grad + log_kernel_gradient(p, table.lags) @ weights
    return float(np.sum(log_lambda)) - penalty, grad


def log_likelihood_gradient(
    p: KernelParams, series: EventSeries, table: LagTable | None = None
) -> np.ndarray:
    return value_and_gradient(p, series, table)[1]


def member_log_likelihoods(
    p: KernelParams,
    group: Sequence[EventSeries],
    tables: Sequence[LagTable] | None = None,
) -> np.ndarray:
    if not group:
        raise LikelihoodError("joint likelihood needs a non-empty group")
    tables = tables or [None] * len(group)
    return np.array([log_likelihood(p, s, t) for s, t in zip(group, tables)])


def joint_log_likelihood(
    p: KernelParams,
    group: Sequence[EventSeries],
    tables: Sequence[LagTable] | None = None,
) -> float:
    """
    Sum of member log-likelihoods, added in group order.

    A member at -inf makes the joint value -inf; the offending indices are
    logged as a warning. member_log_likelihoods gives the per-member values.
    """
    values = member_log_likelihoods(p, group, tables)
    degenerate = np.flatnonzero(np.isneginf(values))
    if degenerate.size:
        logger.warning(f"Joint likelihood is -inf at members {degenerate.tolist()}")
        return float("-inf")
    total = 0.0
    for value in values:
        total += float(value)
    return total


def rescaled_times(p: KernelParams, series: EventSeries, table: LagTable | None = None) -> np.ndarray:
    """
    Compensator increments between consecutive events.

    Under a correctly specified model these are unit-rate exponential draws.
    """
    table = _table(series, table)
    if table.n_events < 2:
        return np.empty(0)
    cumulative = np.add.reduceat(kernel_integral(p, 0.0, table.lags), table.row_starts)
    return np.diff(np.concatenate([[0.0], cumulative]))
