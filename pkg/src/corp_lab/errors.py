"""Exception types shared across the package."""


class CorpLabError(Exception):
    """Base class for errors raised by corp_lab."""


class ScenarioError(CorpLabError):
    """Scenario file or run configuration is malformed."""


class AssumptionError(CorpLabError):
    """A structural condition required by the design does not hold."""


class RankDeficiencyError(CorpLabError):
    """A least-squares / regressor matrix failed its full-column-rank requirement."""

    def __init__(self, message, achieved=None, required=None):
        super().__init__(message)
        self.achieved = achieved
        self.required = required


class DivergenceError(CorpLabError):
    """A trajectory or iteration exceeded its blow-up guard."""
