class BudgetExceeded(RuntimeError):
    """A computation would exceed a configured size or memory limit."""

    def __init__(self, where: str, needed, limit):
        self.where = where
        self.needed = needed
        self.limit = limit
        super().__init__(f"{where}: needs {needed}, limit is {limit}")


class PrecisionBudgetError(ArithmeticError):
    """Exact rational arithmetic grew beyond the configured bit budget."""


class ConditionError(ValueError):
    """A construction's hypotheses fail; ``condition`` names the one that broke."""

    def __init__(self, condition: str, detail: str = ""):
        self.condition = condition
        super().__init__(f"{condition}: {detail}" if detail else condition)
