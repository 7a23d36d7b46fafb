"""Exception types raised across the package."""


class GuidedRegError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(GuidedRegError, ValueError):
    pass


class DegenerateMaskError(GuidedRegError, ValueError):
    """Mask is all foreground or all background."""


class EmptyResponseError(GuidedRegError, ValueError):
    """Vesselness map has no strictly positive voxel to rank."""


class DivergenceError(GuidedRegError, RuntimeError):
    def __init__(self, iteration, message=None):
        self.iteration = iteration
        super().__init__(message or f"non-finite loss at iteration {iteration}")


class NrrdError(GuidedRegError, ValueError):
    """Base class for volume file problems."""


class MalformedHeaderError(NrrdError):
    pass


class TypeMismatchError(NrrdError):
    pass


class TruncatedDataError(NrrdError):
    pass


class UnsupportedChannelCountError(NrrdError):
    pass


class ManifestMismatchError(GuidedRegError, ValueError):
    """An input file no longer matches the hash stored in a run manifest."""
