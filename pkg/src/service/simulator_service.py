import logging
import math
from collections.abc import Sequence
from functools import partial

import numpy as np
import pandas as pd

from core.kernels import branching_factor, kernel_integral, kernel_value, truncated_delay
from models.configs import SimConfig
from schema.models import KernelFamily, SimulationMethod
from schema.schema import EventSeries, KernelParams
from service.utils import make_rng, parallel_map
from utils.constants.constant import BIG5_TRAITS
from utils.custom_exception import SimulationError

logger = logging.getLogger(__name__)

# trait = 3 + loading_kappa * z(log kappa) + loading_theta * z(log theta) + noise
TRAIT_LOADINGS: dict[str, tuple[float, float]] = {
    "openness": (0.2, -0.1),
    "conscientiousness": (-0.3, 0.2),
    "extraversion": (0.6, 0.1),
    "agreeableness": (0.3, 0.4),
    "neuroticism": (-0.2, -0.5),
}
TRAIT_NOISE = 0.25
COHORT_MAX_ATTEMPTS = 1000


def _thinning(
    kernel: KernelParams,
    horizon: float,
    rng: np.random.Generator,
    max_events: int,
    after: KernelParams | None = None,
    switch: float | None = None,
) -> tuple[np.ndarray, bool]:
    """
    Ogata thinning from an immigrant at 0.

    The dominating rate is the intensity just after the current time, which
    bounds the intensity until the next event since both kernels decay. When a
    switch time is given, every history term uses `after` from then on and the
    bound is refreshed at the switch.
    """
    history = np.empty(max_events)
    history[0] = 0.0
    n = 1
    t = 0.0

    def rate(at: float) -> float:
        p = after if switch is not None and at >= switch else kernel
        lags = at - history[:n]
        return float(np.sum(kernel_value(p, lags[lags >= 0])))

    while n < max_events:
        bound = rate(t)
        if bound <= 0:
            if switch is not None and t < switch:
                t = switch
                continue
            break
        candidate = t + rng.exponential(1.0 / bound)
        if switch is not None and t < switch <= candidate:
            t = switch
            continue
        if candidate >= horizon:
            break
        if rng.uniform() * bound <= rate(candidate):
            history[n] = candidate
            n += 1
        t = candidate
    else:
        return history[:n].copy(), True
    return history[:n].copy(), False


def _branching(
    kernel: KernelParams, horizon: float, rng: np.random.Generator, max_events: int
) -> tuple[np.ndarray, bool]:
    """Cluster construction, one generation at a time."""
    generation = np.zeros(1)
    found = [generation]
    total = 1
    while generation.size and total < max_events:
        remaining = horizon - generation
        counts = rng.poisson(kernel_integral(kernel, 0.0, remaining))
        n_children = int(counts.sum())
        if n_children == 0:
            break
        u = rng.random(n_children)
        delays = truncated_delay(kernel, u, np.repeat(remaining, counts))
        generation = np.repeat(generation, counts) + delays
        generation = generation[generation < horizon]
        found.append(generation)
        total += generation.size
    times = np.unique(np.concatenate(found))
    truncated = total >= max_events and generation.size > 0
    if times.size > max_events:
        times = times[:max_events]
    return times, truncated


def _as_series(cfg: SimConfig, times: np.ndarray, truncated: bool) -> EventSeries:
    if truncated:
        logger.warning(f"Simulation with seed {cfg.seed} stopped at the cap of {cfg.max_events} events")
    end = cfg.horizon - cfg.immigrant_time
    if not math.isfinite(end):
        end = float(times[-1])
    return EventSeries(
        sender=cfg.sender,
        receiver=cfg.receiver,
        times=times.tolist(),
        observation_end=end,
        origin=cfg.immigrant_time * 3600.0,
        truncated=truncated,
    )


class SimulatorService:
    """Synthetic event series with known generating parameters."""

    @staticmethod
    def simulate_thinning(cfg: SimConfig) -> EventSeries:
        """
        Exact simulation by thinning. The immigrant sits at immigrant_time and the
        output is rebased so it is at 0, observed until horizon - immigrant_time.
        """
        if not math.isfinite(cfg.horizon):
            raise SimulationError("thinning needs a finite horizon")
        rng = make_rng(cfg.seed)
        times, truncated = _thinning(cfg.params, cfg.horizon - cfg.immigrant_time, rng, cfg.max_events)
        return _as_series(cfg, times, truncated)

    @staticmethod
    def simulate_branching(cfg: SimConfig) -> EventSeries:
        """
        Simulation by cluster construction; each event has Poisson(kernel mass in
        the remaining horizon) children at delays drawn from the normalised kernel.
        The horizon may be infinite.
        """
        rng = make_rng(cfg.seed)
        times, truncated = _branching(cfg.params, cfg.horizon - cfg.immigrant_time, rng, cfg.max_events)
        return _as_series(cfg, times, truncated)

    @staticmethod
    def simulate_regime_change(
        before: KernelParams,
        after: KernelParams,
        S2: float,
        T: float,
        seed: int,
        max_events: int = 100_000,
    ) -> EventSeries:
        """Thinning where the kernel applied to all history switches from before to after at S2."""
        if not 0 < S2 < T or not math.isfinite(T):
            raise SimulationError("regime change needs 0 < S2 < T < inf")
        rng = make_rng(seed)
        times, truncated = _thinning(before, T, rng, max_events, after=after, switch=S2)
        cfg = SimConfig(params=before, horizon=T, seed=seed, max_events=max_events)
        return _as_series(cfg, times, truncated)

    @classmethod
    def simulate(cls, cfg: SimConfig, method: SimulationMethod = SimulationMethod.THINNING) -> EventSeries:
        if method is SimulationMethod.BRANCHING:
            return cls.simulate_branching(cfg)
        return cls.simulate_thinning(cfg)

    @classmethod
    def simulate_batch(
        cls,
        cfgs: Sequence[SimConfig],
        method: SimulationMethod = SimulationMethod.THINNING,
        jobs: int = 1,
    ) -> list[EventSeries]:
        return parallel_map(partial(cls.simulate, method=method), cfgs, jobs, desc="simulate")

    @classmethod
    def synthetic_cohort(
        cls,
        base: KernelParams,
        n_users: int,
        series_per_user: int,
        horizon: float,
        seed: int,
        spread: float = 0.2,
        min_events: int = 2,
        max_events: int = 3000,
        with_traits: bool = False,
        method: SimulationMethod = SimulationMethod.THINNING,
    ) -> tuple[list[EventSeries], pd.DataFrame | None]:
        """
        Users with their own kernel parameters drawn log-normally around `base`.

        Each user gets `series_per_user` outbound series. A series shorter than
        min_events is redrawn with the next seed in its stream. Optional Big5
        traits in [1, 5] are a noisy linear function of the user's log parameters.
        """
        if n_users < 1 or series_per_user < 1:
            raise SimulationError("cohort needs at least one user and one series per user")
        series: list[EventSeries] = []
        shifts = np.zeros((n_users, 2))
        for u in range(n_users):
            rng = make_rng(seed, 0, u)
            z = rng.standard_normal(3)
            shifts[u] = z[:2]
            values = {
                "kappa": base.kappa * math.exp(spread * z[0]),
                "theta": base.theta * math.exp(spread * z[1]),
            }
            if base.family is KernelFamily.PL:
                values["c"] = base.c * math.exp(spread * z[2])
            params = KernelParams(family=base.family, **values)
            for j in range(series_per_user):
                for attempt in range(COHORT_MAX_ATTEMPTS):
                    state = np.random.SeedSequence([seed, 1, u, j, attempt]).generate_state(1, np.uint64)
                    cfg = SimConfig(
                        params=params,
                        horizon=horizon,
                        seed=int(state[0]),
                        max_events=max_events,
                        sender=f"u{u:03d}",
                        receiver=f"p{u:03d}-{j:02d}",
                    )
                    s = cls.simulate(cfg, method)
                    if s.n_events >= min_events:
                        series.append(s)
                        break
                else:
                    raise SimulationError(
                        f"user u{u:03d} produced no series with {min_events} events "
                        f"(n* = {branching_factor(params):.3f})"
                    )
        logger.info(f"Simulated cohort of {n_users} users, {len(series)} series")

        if not with_traits:
            return series, None
        noise = make_rng(seed, 2).standard_normal((n_users, len(BIG5_TRAITS)))
        traits = pd.DataFrame({"user": [f"u{u:03d}" for u in range(n_users)]})
        for k, trait in enumerate(BIG5_TRAITS):
            a, b = TRAIT_LOADINGS[trait]
            raw = 3.0 + a * shifts[:, 0] + b * shifts[:, 1] + TRAIT_NOISE * noise[:, k]
            traits[trait] = np.clip(raw, 1.0, 5.0)
        return series, traits
