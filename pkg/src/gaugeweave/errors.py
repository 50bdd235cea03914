"""Exception hierarchy shared by every gaugeweave module."""

from __future__ import annotations


class GaugeweaveError(Exception):
    """Base class for all errors raised by this package."""


class NonHermitianInput(GaugeweaveError, ValueError):
    pass


class DimensionMismatch(GaugeweaveError, ValueError):
    pass


class ZeroVector(GaugeweaveError, ValueError):
    pass


class DegenerateBand(GaugeweaveError):
    """A queried band touches a neighbouring band somewhere on the grid."""

    def __init__(self, point, band, gap=None):
        self.point = point
        self.band = band
        self.gap = gap
        msg = f"band {band} is degenerate at grid point {point}"
        if gap is not None:
            msg += f" (gap {gap:.3e})"
        super().__init__(msg)


class GridTooCoarse(GaugeweaveError, ValueError):
    pass


class OpenBoundaryUnsupported(GaugeweaveError, ValueError):
    pass


class PathOffGrid(GaugeweaveError, ValueError):
    pass


class VanishingOverlap(GaugeweaveError):
    pass


class PostSelectionOrthogonal(GaugeweaveError):
    pass


class NodeMasked(GaugeweaveError):
    pass


class ParameterStateUndefined(GaugeweaveError, ValueError):
    pass


class StepTooLarge(GaugeweaveError):
    pass


class NonAdiabatic(GaugeweaveError):
    pass


class InsideSolenoid(GaugeweaveError, ValueError):
    pass


class PathCrossesSolenoid(GaugeweaveError, ValueError):
    pass


class NodeOnPath(GaugeweaveError):
    pass


class ConfigError(GaugeweaveError, ValueError):
    pass
