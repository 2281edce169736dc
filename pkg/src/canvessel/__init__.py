"""Finite-dimensional operator vessels for canonical systems."""

from .config import Tolerances, override, settings
from .construction import (
    NumericalFamily,
    SolitonSpec,
    SpectralData,
    VesselFamily,
    build_soliton,
    singular_mask,
    trivial_family,
)
from .params import VesselParameters, preset_canonical, preset_kdv, preset_nls
from .vessel import NodeState, VesselState

__version__ = "0.1.0"

__all__ = [
    "NodeState",
    "NumericalFamily",
    "SolitonSpec",
    "SpectralData",
    "Tolerances",
    "VesselFamily",
    "VesselParameters",
    "VesselState",
    "build_soliton",
    "override",
    "preset_canonical",
    "preset_kdv",
    "preset_nls",
    "settings",
    "singular_mask",
    "trivial_family",
]
