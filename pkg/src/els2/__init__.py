"""Nematic liquid-crystal flow on the unit sphere: spectral solver and diagnostics."""

from .sphere import SphereGrid, ScalarField, TangentField, build_grid

__all__ = ["SphereGrid", "ScalarField", "TangentField", "build_grid"]
__version__ = "0.1.0"
