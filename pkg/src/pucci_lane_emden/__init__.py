"""Radial Lane-Emden systems driven by extremal Pucci operators."""
from .core import (DerivedConstants, ProblemParams, RegionFlags, Side,
                   derive_constants, pucci_scalar, region_flags, rescale)

__version__ = "0.1.0"
