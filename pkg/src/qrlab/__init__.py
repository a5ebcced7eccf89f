"""Numerical laboratory for uniformly quasiregular dynamics on the extended space."""

__version__ = "0.1.0"

from .extended_space import ExtendedPoint, chordal_distance  # noqa: E402
from .maps import (Iterate, PowerMap, Quadratic, StretchPower, Winding, Winding3D,  # noqa: E402
                   catalog_maps, map_from_dict)

__all__ = ["__version__", "ExtendedPoint", "chordal_distance", "Iterate", "PowerMap",
           "Quadratic", "StretchPower", "Winding", "Winding3D", "catalog_maps", "map_from_dict"]
