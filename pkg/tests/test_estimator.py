import numpy as np
import pytest

from asgsflow.assembly import CoupledState
from asgsflow.estimator import ResidualField, compute_residuals
from asgsflow.fem import ElementQuadrature
from asgsflow.mesh import build_unit_square_mesh
from asgsflow.mms import EXACT
from asgsflow.models import make_case
from asgsflow.stepper import SchemeConfig, initialize, manufactured_forcing, run


@pytest.fixture(scope="module")
def eq5():
    return ElementQuadrature(build_unit_square_mesh(5))


def _linear_state(eq, t, scale=1.0):
    x, y = eq.mesh.nodes.T
    n = len(x)
    return CoupledState(np.zeros(n), np.zeros(n), scale * (2 * x - y), scale * (x + 3 * y), t)


@pytest.mark.parametrize("theta", [0, 1])
def test_constructed_forcing_gives_zero_residual(eq5, theta):
    params = make_case("I-a")
    s0, s1 = _linear_state(eq5, 0.0), _linear_state(eq5, 0.1)

    # u = 0, p = 2x - y, c = x + 3y, steady: f = grad p and g = alpha c
    def forcing(x, y, t):
        return 2.0 + 0 * x, -1.0 + 0 * y, params.alpha * (x + 3 * y)

    res = compute_residuals(s0, s1, theta, 0.1, eq5, params, forcing)
    assert res.eta <= 1e-13


def test_time_derivative_enters_transport_residual(eq5):
    params = make_case("I-a")
    s0, s1 = _linear_state(eq5, 0.0), _linear_state(eq5, 0.1, scale=2.0)
    res = compute_residuals(s0, s1, 1, 0.1, eq5, params, None)
    # dc/dt = (x + 3y) / 0.1 dominates the transport residual
    assert res.components()["transport"] > res.components()["momentum"] > 0


def test_continuity_residual_is_divergence(eq5, rng):
    mesh = eq5.mesh
    u1, u2 = rng.normal(size=mesh.n_nodes), rng.normal(size=mesh.n_nodes)
    z = np.zeros(mesh.n_nodes)
    s = CoupledState(u1, u2, z, z, 0.0)
    res = compute_residuals(s, CoupledState(u1, u2, z, z, 0.1), 1, 0.1, eq5, make_case("I-a"), None)
    div = eq5.gradient(u1)[:, 0] + eq5.gradient(u2)[:, 1]
    np.testing.assert_allclose(res.r2_sq, div**2 * mesh.areas, rtol=1e-12)


def test_eta_aggregation():
    field = ResidualField(np.array([1.0, 4.0]), np.array([0.0, 0.0]), np.array([3.0, 0.0]), np.array([0.5, 0.25]))
    np.testing.assert_allclose(field.eta_k, [1.0, 0.5])
    assert field.eta == pytest.approx(np.sqrt(1.25))
    comps = field.components()
    assert comps["momentum"] == pytest.approx(np.sqrt(0.25 + 0.25))
    assert comps["continuity"] == 0.0


def test_exact_advection_option(eq5):
    params = make_case("II-a")
    s0 = initialize(eq5.mesh)
    s1 = initialize(eq5.mesh, t0=0.1)
    forcing = manufactured_forcing(params)
    discrete = compute_residuals(s0, s1, 1, 0.1, eq5, params, forcing)
    exact = compute_residuals(s0, s1, 1, 0.1, eq5, params, forcing, advecting=EXACT)
    np.testing.assert_array_equal(exact.r1_sq, discrete.r1_sq)
    assert np.abs(exact.r3_sq - discrete.r3_sq).max() > 0


def test_eta_decreases_under_refinement():
    etas = [run(build_unit_square_mesh(n), make_case("I-a"), SchemeConfig(1, dt, 0.2), estimate=True).eta
            for n, dt in ((5, 0.1), (10, 0.05), (20, 0.025))]
    assert etas[0] > etas[1] > etas[2]
