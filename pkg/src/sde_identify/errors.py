"""Typed errors raised across the library.

Most of these signal either a caller bug (DimensionMismatch, InvalidParam)
or a numerically degenerate draw (RankDeficient, DegenerateSpectrum,
AlphaDegenerate).  Degenerate draws are measure-zero events for generic
instances; the intended response is to resample, not to regularize.
"""


class SdeIdentifyError(Exception):
    """Base class for all library errors."""


class DimensionMismatch(SdeIdentifyError):
    pass


class InvalidParam(SdeIdentifyError):
    pass


class NotHurwitz(SdeIdentifyError):
    """The drift matrix has an eigenvalue with nonnegative real part."""


class NoConvergence(SdeIdentifyError):
    """An iterative procedure failed to meet its residual target."""


class RankDeficient(SdeIdentifyError):
    """A numerical-rank decision failed (bad draw or too-large noise)."""


class DegenerateSpectrum(SdeIdentifyError):
    """Joint diagonalization could not separate eigenvalues after retries."""


class AlphaDegenerate(SdeIdentifyError):
    """The null-vector constraint alpha^T 1 != 0 failed numerically."""


class Diverged(SdeIdentifyError):
    """A simulated trajectory left the admissible region (|x| > 1e8)."""


class Singular(SdeIdentifyError):
    """A matrix that must be inverted is numerically singular."""


class NonFinite(SdeIdentifyError):
    """A loss or gradient evaluated to NaN/inf during optimization."""


class DegenerateColumn(SdeIdentifyError):
    """A column with ~zero norm where a direction was required."""


class ConfigError(SdeIdentifyError):
    pass


class IoError(SdeIdentifyError):
    pass
