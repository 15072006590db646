"""Exception types shared across the workbench."""


class AknsdError(Exception):
    """Base class for all workbench errors."""


class ModeError(AknsdError):
    """Scalar modes of the operands disagree, or a value does not fit its mode."""


class DimensionError(AknsdError):
    """Matrix or series dimensions of the operands disagree."""


class ValidityError(AknsdError):
    """A series coefficient outside the guaranteed-valid band was requested."""


class SingularError(AknsdError):
    """A matrix inverse does not exist."""


class SupportError(AknsdError):
    """A lattice operation needs compact effective support and did not get it."""


class InstanceError(AknsdError):
    """Input data violates an invariant (diagonal entries of A, potential shape, ...)."""


class ConsistencyError(AknsdError):
    """A solved state failed an internal identity check (wrong dressing, depth, ...)."""


class ConfigError(AknsdError):
    """Configuration text is malformed or violates an invariant."""


class SchemaError(AknsdError):
    """A persisted document does not match the expected schema or version."""
