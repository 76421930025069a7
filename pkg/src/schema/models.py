from enum import Enum, StrEnum, auto


class KernelFamily(StrEnum):
    """Triggering-kernel families supported by the fitter."""

    EXP = "exp"
    PL = "pl"

    @property
    def param_names(self) -> tuple[str, ...]:
        # order used by gradients and by the optimizer's parameter vector
        if self is KernelFamily.EXP:
            return ("kappa", "theta")
        return ("kappa", "theta", "c")


class Channel(StrEnum):
    CALL = auto()
    TEXT = auto()


class RelationshipCategory(StrEnum):
    FAMILY_RELAXING = "family-relaxing"
    FAMILY_STABLE = "family-stable"
    FRIENDSHIP_RELAXING = "friendship-relaxing"
    FRIENDSHIP_STABLE = "friendship-stable"
    FRIENDSHIP_STRENGTHENING = "friendship-strengthening"
    ROMANTIC_RELAXING = "romantic-relaxing"
    EXCLUDED = "excluded"

    @property
    def is_dynamic(self) -> bool:
        return self not in (
            RelationshipCategory.FAMILY_STABLE,
            RelationshipCategory.FRIENDSHIP_STABLE,
            RelationshipCategory.EXCLUDED,
        )


class Task(StrEnum):
    CLASSIFY = auto()
    REGRESS = auto()


class SplitMode(StrEnum):
    """How a temporal holdout split is placed."""

    EVENTS = auto()
    TIME = auto()


class SimulationMethod(StrEnum):
    THINNING = auto()
    BRANCHING = auto()


class WilcoxonMethod(StrEnum):
    EXACT = "exact"
    NORMAL_APPROX = "normal_approx"


class SurveyLabel(str, Enum):
    FRIEND = "friend"
    SIBLING = "sibling"
    PARENT = "parent"
    OTHER_FAMILY = "other family"
    FAMILY = "family"
    COWORKER = "coworker"
    ACQUAINTANCE = "acquaintance"
    SIGNIFICANT_OTHER = "significant other"
    OTHER = "other"

    @classmethod
    def parse(cls, raw: str) -> "SurveyLabel | None":
        """
        Normalise a survey answer; None when the string is not a known label
        """
        key = " ".join(raw.strip().lower().replace("-", "").split())
        aliases = {"co worker": "coworker", "significantother": "significant other"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            return None

    @property
    def stable_category(self) -> RelationshipCategory:
        """
        Category of a relationship labelled with this value in every wave
        """
        mapping = {
            SurveyLabel.FRIEND: RelationshipCategory.FRIENDSHIP_STABLE,
            SurveyLabel.PARENT: RelationshipCategory.FAMILY_STABLE,
            SurveyLabel.SIBLING: RelationshipCategory.FAMILY_STABLE,
        }
        return mapping.get(self, RelationshipCategory.EXCLUDED)

    def __str__(self) -> str:
        return self.value


# (previous label, new label) -> category, for exactly one transition
TRANSITION_RULES: dict[tuple[SurveyLabel, SurveyLabel], RelationshipCategory] = {
    (SurveyLabel.FRIEND, SurveyLabel.SIBLING): RelationshipCategory.FAMILY_RELAXING,
    (SurveyLabel.FRIEND, SurveyLabel.PARENT): RelationshipCategory.FAMILY_RELAXING,
    (SurveyLabel.FRIEND, SurveyLabel.OTHER_FAMILY): RelationshipCategory.FAMILY_RELAXING,
    (SurveyLabel.FRIEND, SurveyLabel.COWORKER): RelationshipCategory.FRIENDSHIP_RELAXING,
    (SurveyLabel.FRIEND, SurveyLabel.OTHER): RelationshipCategory.FRIENDSHIP_RELAXING,
    (SurveyLabel.FRIEND, SurveyLabel.ACQUAINTANCE): RelationshipCategory.FRIENDSHIP_RELAXING,
    (SurveyLabel.OTHER, SurveyLabel.FRIEND): RelationshipCategory.FRIENDSHIP_STRENGTHENING,
    (SurveyLabel.COWORKER, SurveyLabel.FRIEND): RelationshipCategory.FRIENDSHIP_STRENGTHENING,
    (SurveyLabel.ACQUAINTANCE, SurveyLabel.FRIEND): RelationshipCategory.FRIENDSHIP_STRENGTHENING,
    (SurveyLabel.SIGNIFICANT_OTHER, SurveyLabel.OTHER): RelationshipCategory.ROMANTIC_RELAXING,
    (SurveyLabel.SIGNIFICANT_OTHER, SurveyLabel.FRIEND): RelationshipCategory.ROMANTIC_RELAXING,
}
