"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Inputs violate a documented precondition (bad model, event, query...)."""


class SizeGuardError(RuntimeError):
    """The requested exact computation exceeds the desk-scale size guard."""
