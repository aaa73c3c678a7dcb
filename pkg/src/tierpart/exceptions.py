"""Exception hierarchy. Every error raised by the package derives from TierpartError."""


class TierpartError(Exception):
    """Base class for all package errors."""


class DomainError(TierpartError, ValueError):
    """An argument lies outside the domain of the operation."""


class IntegrityError(TierpartError, ValueError):
    """Cross-references inside a netlist are inconsistent (dangling pin, duplicate name, cycle)."""


class ShapeError(TierpartError, ValueError):
    """A cell is wired in a way the operation cannot handle."""


class ParseError(TierpartError, ValueError):
    """Malformed input file."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:"
            if line is not None:
                where += f"{line}:"
            where += " "
        super().__init__(where + message)


class InfeasibleError(TierpartError):
    """No assignment satisfies the balance constraint."""

    def __init__(self, message, vertex=None, fraction=None):
        self.vertex = vertex
        self.fraction = fraction
        super().__init__(message)


class GuardError(TierpartError, ValueError):
    """Instance too large for an exhaustive routine."""
