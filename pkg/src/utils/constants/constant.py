SECONDS_PER_HOUR = 3600.0

# de-tie step for equal timestamps within a dyad, in hours
TIE_EPSILON_HOURS = 1e-6

# ingested event times sit on a grid of 1 / HOUR_TICKS hours
HOUR_TICKS = 10**9

# default fitting box, per parameter (lo, hi)
DEFAULT_BOUNDS: dict[str, tuple[float, float]] = {
    "kappa": (1e-6, 1e4),
    "theta": (1e-3, 1e2),
    "c": (1e-4, 1e3),
}

EMBEDDING_DIMENSION = 50
SIX_POINT_SUMMARY = ("min", "q25", "median", "mean", "q75", "max")

BIG5_TRAITS = (
    "openness",
    "conscientiousness",
    "extraversion",
    "agreeableness",
    "neuroticism",
)
