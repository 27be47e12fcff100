"""Phaseless sampling and reconstruction of real signals in shift-invariant spaces."""

from .errors import PhaseConflict, PhaselessError
from .generators import Generator, bspline, box, eval_generator, fixture, phi_matrix, tensor, zwart_powell
from .kernels import BACKEND
from .mapset import NoisySamples, ReconstructionConfig, mapset_reconstruct, stability_bound
from .regions import Region, interval, lower_triangle, unit_cube, upper_triangle
from .sampling import (
    PatchSystem,
    build_patch_system,
    default_regions,
    is_phase_retrievable_frame,
    local_complement_property,
    phi_inverse_norm,
)
from .signals import Signal, Verdict, build_graph, components, is_nonseparable, magnitude_equal, sup_distance

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "Generator",
    "NoisySamples",
    "PatchSystem",
    "PhaseConflict",
    "PhaselessError",
    "ReconstructionConfig",
    "Region",
    "Signal",
    "Verdict",
    "box",
    "bspline",
    "build_graph",
    "build_patch_system",
    "components",
    "default_regions",
    "eval_generator",
    "fixture",
    "interval",
    "is_nonseparable",
    "is_phase_retrievable_frame",
    "local_complement_property",
    "lower_triangle",
    "magnitude_equal",
    "mapset_reconstruct",
    "phi_inverse_norm",
    "phi_matrix",
    "stability_bound",
    "sup_distance",
    "tensor",
    "unit_cube",
    "upper_triangle",
    "zwart_powell",
]
