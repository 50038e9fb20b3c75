"""Exception types shared across the library."""


class DimensionError(ValueError):
    """Raised when tensor shapes violate an operation's contract."""


class ContractError(ValueError):
    """Raised when an argument violates a non-shape precondition."""


class EmptySequenceError(ContractError):
    """Raised when a sequence operation receives zero time steps."""


def require_shapes_match(a_shape, b_shape, op: str) -> None:
    if tuple(a_shape) != tuple(b_shape):
        raise DimensionError(f"{op}: shapes {tuple(a_shape)} and {tuple(b_shape)} differ")
