"""Exception types raised across the package."""


class DegenlocError(Exception):
    """Base class for all package errors."""


class MalformedFile(DegenlocError, ValueError):
    pass


class UnsupportedFormat(DegenlocError, ValueError):
    pass


class EmptyCloud(DegenlocError, ValueError):
    pass


class InvalidEigenvalues(DegenlocError, ValueError):
    pass


class MissingNormals(DegenlocError, ValueError):
    pass


class LengthMismatch(DegenlocError, ValueError):
    pass


class InsufficientCorrespondences(DegenlocError, RuntimeError):
    """Fewer than six usable point-to-plane pairs; the pose is not solvable."""

    def __init__(self, found: int, required: int = 6):
        super().__init__(f"{found} correspondences found, at least {required} required")
        self.found = found
        self.required = required


class NoConstraints(DegenlocError, ValueError):
    pass


class NoAssociations(DegenlocError, ValueError):
    pass
