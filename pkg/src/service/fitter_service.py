import logging
import math
from collections.abc import Sequence

import numpy as np
from scipy.optimize import OptimizeResult, minimize

from core.kernels import branching_factor
from core.likelihood import LagTable, value_and_gradient
from models.configs import FitConfig
from schema.reports import FitFailure
from schema.schema import EventSeries, FittedModel, KernelParams
from service.utils import make_rng, parallel_map
from utils.custom_exception import FitError, HawkesCallsError, InsufficientEventsError

logger = logging.getLogger(__name__)

# relative objective change at which L-BFGS-B may stop; small enough that the
# gradient test decides in practice
FTOL = 1e-13


class _Objective:
    """Negative joint log-likelihood over log-parameters, with its gradient."""

    def __init__(self, tables: Sequence[LagTable], cfg: FitConfig):
        self.tables = tables
        self.family = cfg.family
        self.evaluations = 0

    def __call__(self, z: np.ndarray) -> tuple[float, np.ndarray]:
        self.evaluations += 1
        values = np.exp(z)
        p = KernelParams.from_vector(self.family, values)
        total = 0.0
        grad = np.zeros_like(values)
        for table in self.tables:
            ll, g = value_and_gradient(p, None, table)
            total += ll
            grad += g
        if not math.isfinite(total):
            return math.inf, np.zeros_like(values)
        # chain rule for the log parametrisation
        return -total, -grad * values


def _projected_max(z: np.ndarray, grad: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> float:
    pinned = ((z <= lo) & (grad > 0)) | ((z >= hi) & (grad < 0))
    return float(np.max(np.abs(np.where(pinned, 0.0, grad))))


def _starts(cfg: FitConfig, initial: KernelParams | None, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Log-uniform draws in the box; a given initial point replaces the first draw."""
    rng = make_rng(cfg.seed)
    z = lo + rng.random((cfg.n_starts, lo.size)) * (hi - lo)
    if initial is not None:
        if initial.family is not cfg.family:
            raise FitError("initial point belongs to another kernel family")
        z[0] = np.clip(np.log(initial.as_vector()), lo, hi)
    return z


class FitterService:
    """Maximum-likelihood fitting of kernel parameters in a box, with multi-start."""

    @staticmethod
    def _fit(
        tables: Sequence[LagTable],
        cfg: FitConfig,
        initial: KernelParams | None,
    ) -> tuple[KernelParams, OptimizeResult, float, int, bool]:
        n_events = sum(t.n_events for t in tables)
        lo = np.log(cfg.lower())
        hi = np.log(cfg.upper())
        objective = _Objective(tables, cfg)
        best: OptimizeResult | None = None
        used = 0
        for index, z0 in enumerate(_starts(cfg, initial, lo, hi)):
            start_value, _ = objective(z0)
            if not math.isfinite(start_value):
                logger.warning(f"Discarding start {index}: likelihood is -inf there")
                continue
            try:
                result = minimize(
                    objective,
                    z0,
                    jac=True,
                    method="L-BFGS-B",
                    bounds=list(zip(lo, hi)),
                    options={
                        "maxiter": cfg.max_iterations,
                        "gtol": cfg.tolerance * n_events,
                        "ftol": FTOL,
                    },
                )
            except (FloatingPointError, ValueError, HawkesCallsError) as e:
                logger.warning(f"Discarding start {index}: {str(e)}")
                continue
            used += 1
            if not math.isfinite(result.fun):
                continue
            if best is None or result.fun < best.fun:
                best = result

        if best is None:
            raise FitError("no start produced a finite likelihood")
        z = np.clip(best.x, lo, hi)
        grad_norm = _projected_max(z, best.jac, lo, hi) / n_events
        converged = bool(best.success) or grad_norm < cfg.tolerance
        params = KernelParams.from_vector(cfg.family, np.exp(z))
        return params, best, grad_norm, used, converged

    @classmethod
    def fit_joint(
        cls,
        group: Sequence[EventSeries],
        cfg: FitConfig,
        initial: KernelParams | None = None,
    ) -> FittedModel:
        """
        Fit one parameter set shared by every series of a group.

        Args:
            group: Series modelled by the same kernel
            cfg: Family, box, number of starts and stopping rule
            initial: Optional point used as the first start

        Returns:
            FittedModel: Lowest-NLL result across starts; converged=False when
            that result neither met the stopping rule nor a small gradient

        Raises:
            InsufficientEventsError: If the group holds fewer than 2 events
            FitError: If no start yields a finite likelihood
        """
        if not group:
            raise InsufficientEventsError("train", 2, 0)
        n_events = sum(s.n_events for s in group)
        if n_events < 2:
            raise InsufficientEventsError("train", 2, n_events)
        tables = [LagTable.from_series(s) for s in group]
        params, result, grad_norm, used, converged = cls._fit(tables, cfg, initial)
        nll = float(result.fun)
        if not converged:
            logger.warning(f"Fit of {len(group)} series did not converge: {result.message}")
        single = group[0] if len(group) == 1 else None
        return FittedModel(
            family=cfg.family,
            params=params,
            nll=nll,
            n_star=branching_factor(params),
            converged=converged,
            n_events=n_events,
            n_series=len(group),
            train_window=(0.0, max(s.observation_end for s in group)),
            sender=single.sender if single else None,
            receiver=single.receiver if single else None,
            grad_norm_per_event=grad_norm,
            iterations=int(result.nit),
            starts_used=used,
        )

    @classmethod
    def fit_series(
        cls,
        series: EventSeries,
        cfg: FitConfig,
        initial: KernelParams | None = None,
    ) -> FittedModel:
        return cls.fit_joint([series], cfg, initial)

    @classmethod
    def fit_batch(
        cls,
        series: Sequence[EventSeries],
        cfg: FitConfig,
        jobs: int = 1,
    ) -> tuple[list[FittedModel], list[FitFailure]]:
        """Fit every series; failures are recorded and the batch carries on."""
        outcomes = parallel_map(
            _fit_one, [(i, s, cfg) for i, s in enumerate(series)], jobs, desc=f"fit {cfg.family}"
        )
        models = [o for o in outcomes if isinstance(o, FittedModel)]
        failures = [o for o in outcomes if isinstance(o, FitFailure)]
        unconverged = sum(not m.converged for m in models)
        logger.info(
            f"Fitted {len(models)} series ({unconverged} unconverged), {len(failures)} failed"
        )
        return models, failures


def _fit_one(item: tuple[int, EventSeries, FitConfig]) -> FittedModel | FitFailure:
    index, series, cfg = item
    try:
        return FitterService.fit_series(series, cfg)
    except HawkesCallsError as e:
        return FitFailure(index=index, sender=series.sender, receiver=series.receiver, reason=e.message)
