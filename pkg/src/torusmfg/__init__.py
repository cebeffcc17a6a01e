"""Particle-cloud toolkit for deterministic mean-field-type zero-sum
differential games on the flat torus.
"""

from ._core import BACKEND
from .errors import ConvergenceError, PolygonStuckError, StructuralError
from .game import (CallableDynamics, Dynamics, DynamicsSpec, Modulus, Vectogram,
                   bilinear, check_isaacs, custom_polynomial, dist_to_vectogram,
                   mean_field_attraction, min_norm_point, separable_affine)
from .measures import (DiscreteMeasure, GridComponent, ProductSpace, TorusComponent,
                       VectorComponent, control_space, dirac, direction_space,
                       disintegrate, measure_space, recompose)
from .torus import TorusPoint, displacement, torus_distance, wrap
from .transport import TransportPlan, identity_plan, product_sq_dist, wasserstein2

__version__ = "0.1.0"
