"""Exception and warning types shared across the engine."""


class PersumError(Exception):
    """Base class for all engine errors."""


# -- corpus ------------------------------------------------------------
class MalformedInput(PersumError):
    """Input file violates the documented corpus format."""


class DuplicateDocId(PersumError):
    pass


class EmptyConceptSet(PersumError):
    pass


class EmptyInput(PersumError):
    pass


class DimTooLarge(PersumError):
    pass


class DegenerateFeatureWarning(UserWarning):
    """A feature is constant corpus-wide and was scaled to zero."""


# -- exdos -------------------------------------------------------------
class DimensionMismatch(PersumError):
    pass


class NonFiniteObjective(PersumError):
    pass


class UntrainedModel(PersumError):
    pass


class InfeasibleBudget(PersumError):
    pass


class LonelyLabelWarning(UserWarning):
    """A cluster lacks one of the labels; affected terms are skipped."""


# -- adaptive ----------------------------------------------------------
class SessionConverged(PersumError):
    pass


class UnknownConcept(PersumError):
    pass


class UnknownSentence(PersumError):
    pass


# -- prefs -------------------------------------------------------------
class BudgetExhausted(PersumError):
    pass


class NotEnoughConcepts(PersumError):
    pass


class UnknownStrategy(PersumError):
    pass


class NonFinite(PersumError):
    """Optimisation produced a non-finite value (learning rate too high)."""


# -- summarizer --------------------------------------------------------
class PoolTooSmallWarning(UserWarning):
    """Fewer distinct feasible summaries exist than the requested pool size."""


class EmptyPool(PersumError):
    pass


# -- eval --------------------------------------------------------------
class EmptyReference(PersumError):
    pass


class UnknownTarget(PersumError):
    pass
