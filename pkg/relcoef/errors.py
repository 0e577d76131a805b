class RelcoefError(Exception):
    "Base class for everything relcoef raises on purpose."


class DomainError(RelcoefError, ValueError):
    pass


class EventLimitError(DomainError):
    pass


class DimensionError(RelcoefError, ValueError):
    pass


class UnknownEventError(RelcoefError, ValueError):
    def __init__(self, name, msg=None):
        self.name = name
        super().__init__(msg or f"unknown event {name!r}")


class DefinitionCycleError(RelcoefError, ValueError):
    pass


class NumericalError(RelcoefError, RuntimeError):
    pass


class FeasibilityUnknownError(RelcoefError, RuntimeError):
    """
    The multi-start search never found a point satisfying the constraints.
    This is not a proof of infeasibility.
    """


class ParseError(RelcoefError, ValueError):
    "A problem with program text, at a 1-based line and column."

    def __init__(self, line, column, message, token=None):
        self.line = line
        self.column = column
        self.message = message
        self.token = token
        super().__init__(f"{line}:{column}: {message}")
