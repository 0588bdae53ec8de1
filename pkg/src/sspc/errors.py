"""Exception hierarchy shared by all modules."""


class SSPCError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(SSPCError, ValueError):
    """Input violates a documented precondition."""


class DomainError(ValidationError):
    """A scalar map was evaluated outside its domain."""

    def __init__(self, message, offending=()):
        super().__init__(message)
        self.offending = tuple(offending)


class PoleProximityError(SSPCError):
    """The spectral parameter sits inside an exclusion window around a pole."""

    def __init__(self, lam, chi, distance, radius):
        super().__init__(
            f"lambda={lam:.12g} is within {radius:.3g} of pole chi={chi:.12g} "
            f"(distance {distance:.3g})"
        )
        self.lam = lam
        self.chi = chi
        self.distance = distance
        self.radius = radius


class DeflationEmptyError(SSPCError):
    """Every P-space direction couples to the pole; nothing survives deflation."""


class ConstructionError(SSPCError):
    """A constructed object failed its own post-condition checks."""


class NonConvergenceError(SSPCError):
    def __init__(self, message, bracket):
        super().__init__(message)
        self.bracket = tuple(bracket)


class BranchLostError(SSPCError):
    """Eigenvector tracking could not match the followed branch."""


class GramSingularError(SSPCError):
    def __init__(self, message, eigenvalues):
        super().__init__(message)
        self.eigenvalues = tuple(eigenvalues)


class ParseError(SSPCError, ValueError):
    def __init__(self, message, line=None, offset=None):
        self.line = line
        self.offset = offset
        where = []
        if line is not None:
            where.append(f"line {line}")
        if offset is not None:
            where.append(f"offset {offset}")
        suffix = f" ({', '.join(where)})" if where else ""
        super().__init__(message + suffix)
        self.line = line
        self.offset = offset
