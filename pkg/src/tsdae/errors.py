"""Exception types shared across the package."""


class TsdaeError(Exception):
    """Base class for all package errors."""


class GridIndexError(TsdaeError, IndexError):
    """Jump operator or derivative requested outside the working interval."""


class ShapeError(TsdaeError, ValueError):
    """Matrix operands are not conformable or do not match declared dims."""


class TransversalityError(TsdaeError):
    """ker A^sigma and im B do not span the full space at some index."""

    def __init__(self, index, dim_kernel, rank_b, ambient):
        self.index = index
        self.dim_kernel = dim_kernel
        self.rank_b = rank_b
        self.ambient = ambient
        super().__init__(
            f"transversality fails at index {index}: "
            f"dim ker A^sigma = {dim_kernel}, rank B = {rank_b}, ambient = {ambient}"
        )


class ProjectorError(TsdaeError):
    """A supplied or constructed projector violates its contract."""


class NotADirectSumError(TsdaeError):
    """Requested image and kernel do not split the ambient space."""


class SubspaceIntersectionError(TsdaeError):
    """(A2) failure: a new kernel meets the span of the previous ones."""

    def __init__(self, level, message=None):
        self.level = level
        super().__init__(message or f"(A2) intersection nontrivial at level {level}")


class IrregularSystemError(TsdaeError):
    """Chain construction ended in an irregular verdict."""

    def __init__(self, reason, level):
        self.reason = reason
        self.level = level
        super().__init__(f"irregular at level {level}: {reason}")


class NonRegressiveStepError(TsdaeError):
    """I - mu*K is singular at a step of the inherent equation."""

    def __init__(self, index, message=None):
        self.index = index
        super().__init__(message or f"non-regressive step at index {index}")


class InconsistentStateError(TsdaeError):
    """Direct stepping hit a singular step matrix with a large defect."""

    def __init__(self, index, defect):
        self.index = index
        self.defect = defect
        super().__init__(
            f"inconsistent state at index {index}: consistency defect {defect:.3e}"
        )


class ExpressionError(TsdaeError, ValueError):
    """Syntax or evaluation failure in an entry expression."""

    def __init__(self, message, position=None):
        self.position = position
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)


class SystemFileError(TsdaeError, ValueError):
    """Malformed system-description or trajectory file."""
