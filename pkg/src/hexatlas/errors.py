"""Exception types raised across the package.

Every validation failure raises a subclass of :class:`HexAtlasError`, which is
also a :class:`ValueError`.  Numerical non-convergence is kept apart so that
callers (and the command line) can tell bad input from a solve that ran out of
iterations.
"""


class HexAtlasError(ValueError):
    """Base class for input and validation errors."""


# nrrd_io
class NrrdFormatError(HexAtlasError):
    """Header or payload does not follow the NRRD layout."""


class UnsupportedEncoding(NrrdFormatError):
    pass


class UnsupportedType(NrrdFormatError):
    pass


class DimensionMismatch(NrrdFormatError):
    pass


class TruncatedData(NrrdFormatError):
    pass


class NegativeLabel(HexAtlasError):
    pass


# atlas / material
class MalformedJson(HexAtlasError):
    pass


class DuplicateName(HexAtlasError):
    pass


class DuplicateLabel(HexAtlasError):
    pass


class UnknownStructure(HexAtlasError, KeyError):
    def __str__(self):
        return ValueError.__str__(self)


class MalformedLine(HexAtlasError):
    pass


class ChannelOutOfRange(HexAtlasError):
    pass


class LabelCollision(HexAtlasError):
    pass


class NonPositiveSigma(HexAtlasError):
    pass


class UnmappedLabel(HexAtlasError):
    def __init__(self, labels):
        self.labels = sorted(int(v) for v in labels)
        super().__init__(f"no conductivity for property labels {self.labels}")


# hexmesh
class GridMismatch(HexAtlasError):
    pass


class UncoveredAnatomy(HexAtlasError):
    pass


class EmptyDomain(HexAtlasError):
    pass


class InvertedElement(HexAtlasError):
    pass


class FieldLengthMismatch(HexAtlasError):
    pass


class VtkFormatError(HexAtlasError):
    pass


# fem
class LengthMismatch(HexAtlasError):
    pass


class SourceOutsideDomain(HexAtlasError):
    pass


class ZeroSeparation(HexAtlasError):
    pass


class IncompatibleSource(HexAtlasError):
    pass


class SingularPoint(HexAtlasError):
    pass


class NoConvergence(RuntimeError):
    """CG stopped at ``maxit`` before reaching the requested residual."""

    def __init__(self, iterations, residual):
        self.iterations = iterations
        self.residual = residual
        super().__init__(
            f"CG did not converge: relative residual {residual:.3e} "
            f"after {iterations} iterations"
        )


# query
class EmptyRegion(HexAtlasError):
    pass
