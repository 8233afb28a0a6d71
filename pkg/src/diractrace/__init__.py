"""Numerical trace identities for Dirac operators on compact hyperbolic surfaces.

Subpackages by layer: `moebius` (half-plane geometry and automorphy
factors), `fuchsian` (surface groups and length spectra), `specfun` and
`kernels` (Green's functions and point-pair kernels), `testfn`
(admissible test functions), `traceformula` and `zeta` (the two sides of
the trace identity and the zeta function), `operators` (grid checks of
the operator identities), `cli` (command line).
"""

__version__ = "0.1.0"

from . import errors
from .moebius import GroupElement, Point, Weight
from .fuchsian import (
    LengthSpectrum,
    MultiplierSystem,
    SurfacePresentation,
    build_bolza,
    build_multiplier,
    enumerate_geodesics,
)
from .testfn import TestFunction

__all__ = [
    "errors",
    "GroupElement",
    "Point",
    "Weight",
    "LengthSpectrum",
    "MultiplierSystem",
    "SurfacePresentation",
    "build_bolza",
    "build_multiplier",
    "enumerate_geodesics",
    "TestFunction",
]
