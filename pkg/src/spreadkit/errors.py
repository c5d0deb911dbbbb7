"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Inputs violate a documented invariant (bad matrix, weights, times...)."""


class SchemaError(ValidationError):
    """A JSON pricing problem does not conform to the input schema."""


class InfeasibleError(RuntimeError):
    """A numerical construction has no solution for these inputs."""
