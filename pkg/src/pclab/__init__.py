"""Weighted functionals, surface-area measures and a discrete Minkowski solver for C-pseudo-cones."""

from .cone_geometry import Cone, polar_cone, reference_direction, boundary_directions, cap_quadrature
from .weights import WeightSpec
from .pseudocone import (PseudoCone, WulffShape, ShiftedCone, HyperbolaBody, LogAsymptoteBody,
                         SegmentConeBody, radial, support, scale, translate, minkowski_sum, radial_sum,
                         starting_point, distance_from_origin, body_from_json)
from .weighted_functionals import (Estimate, DiscreteMeasure, FinitenessVerdict, covolume, volume,
                                   asymptotic_covolume, cone_weighted_volume, surface_area_measure,
                                   surface_area_total, dual_volume, directional_derivative_integral,
                                   finiteness_probe)
from .minkowski_solver import SolverConfig, SolverReport, solve
from .scene import Scene

__version__ = "0.1.0"
