"""Exception and warning types shared across the package."""


class SvregError(Exception):
    """Base class for all svreg errors."""


class DegenerateInputError(SvregError):
    """A geometric input cannot be orthonormalized (zero or parallel vectors)."""


class EmptyImageError(SvregError):
    """An image is too small to operate on (any dimension < 2)."""


class NoOverlapError(SvregError):
    """The joint valid region of two images is below the minimum-overlap threshold."""

    def __init__(self, overlap_count, min_overlap):
        self.overlap_count = int(overlap_count)
        self.min_overlap = int(min_overlap)
        super().__init__(
            f"valid overlap of {overlap_count} px is below the minimum of {min_overlap} px"
        )


class ZeroVarianceError(SvregError):
    """A masked image is constant, so its normalized correlation is undefined."""


class EmptyInputError(SvregError):
    """A feature grid or list argument is empty."""


class NonFiniteError(SvregError):
    """An objective evaluation returned a non-finite value."""


class LostOverlapError(SvregError):
    """The initial pose does not produce enough overlap to start optimizing."""


class GeometryOutOfBoundsError(SvregError):
    """A phantom structure lies outside the volume extent."""


class NoPairsError(SvregError):
    """No matched landmark pairs were supplied."""


class ConstantImageWarning(UserWarning):
    """Intensity normalization hit a constant image; the 0.5 fallback was used."""
