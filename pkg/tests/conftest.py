import numpy as np
import pytest

from nsf.constitutive import fluid_params
from nsf.galerkin import (GalerkinState, build_temperature_basis,
                          build_velocity_basis)
from nsf.quadrature import QuadratureGrid, default_quad_order
from nsf.steady import bilinear_boundary, constant_boundary, solve_steady_temperature
from nsf.timestepper import StepControls, integrate


@pytest.fixture(scope="session")
def params_p18():
    return fluid_params(1.8, 1.0, 1.0, 1.0)


@pytest.fixture(scope="session")
def params_p2():
    return fluid_params(2.0, 1.0, 1.0, 1.0)


def build_setup(params, Mx=2, Kx=4, boundary=None):
    quad = QuadratureGrid(default_quad_order(max(2 * Mx, Kx)))
    vb = build_velocity_basis(Mx, Mx, quad)
    boundary = boundary if boundary is not None else constant_boundary(1.0)
    steady = solve_steady_temperature(boundary, params, Kx, Kx, quad)
    tb = build_temperature_basis(Kx, Kx, steady, quad)
    return quad, vb, steady, tb


@pytest.fixture(scope="session")
def setup_p18(params_p18):
    return build_setup(params_p18, Mx=2, Kx=4,
                       boundary=bilinear_boundary(1.0, 1.0, 0.0, 0.0))


@pytest.fixture(scope="session")
def transient_p18(params_p18, setup_p18):
    """A short coupled run reused by several audit tests."""
    quad, vb, steady, tb = setup_p18
    rng = np.random.default_rng(3)
    a0 = rng.standard_normal(vb.n_modes)
    a0 *= np.sqrt(2 * 0.01 / (a0 @ vb.M @ a0))
    c0 = np.zeros(tb.n_modes)
    c0[0] = 0.05
    state0 = GalerkinState(0.0, a0, c0)
    controls = StepControls(dt=0.01, t_end=0.3)
    return integrate(state0, controls, params_p18, vb, tb, theta_floor=1.0)
