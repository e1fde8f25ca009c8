"""Spectral Galerkin simulator and inequality auditor for a heat-conducting
power-law fluid on the unit square."""

__version__ = "0.1.0"

from .constitutive import (FluidParams, SamplePlan, conductivity_eval, dissipation,
                           fluid_params, make_material, stress_eval,
                           validate_constitutive)
from .correction import (CorrectionFn, GridSpec, B_eval, b_eval, d1b_eval, d2B_eval,
                         d2b_eval, make_correction, prototype_correction,
                         validate_correction)
from .lyapunov import (LyapunovParams, G_eval, H_alpha_eval, check_f_convexity,
                       f_alpha_eval, lyapunov_density)
from .quadrature import QuadratureGrid, default_quad_order
from .steady import (BoundaryData, SteadyTemperature, invert_G, make_boundary,
                     solve_steady_temperature, verify_steady)
from .galerkin import (GalerkinState, TemperatureBasis, VelocityBasis, assemble_rhs,
                       build_temperature_basis, build_velocity_basis,
                       evaluate_fields)
from .timestepper import Event, StepControls, Trajectory, integrate, step

__all__ = [name for name in dir() if not name.startswith("_")]
