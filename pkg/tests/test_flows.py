import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lrquant.errors import InvalidParam
from lrquant.fields import vector
from lrquant.flows import FlowMap, flow, jacobian_factor, pushforward_field
from lrquant.manifolds import ManifoldSpec, make_grid, make_manifold

import oracles

CIRCLE = make_manifold(ManifoldSpec.circle())
LINE = make_manifold(ManifoldSpec.line(10.0))
TORUS = make_manifold(ManifoldSpec.torus(2 * math.pi, 2 * math.pi))


def test_constant_flow_and_class():
    r = flow(vector(CIRCLE, ["1"]), math.pi, [0.0])
    assert r.point[0] == pytest.approx(math.pi)
    assert r.cls.is_trivial
    r = flow(vector(CIRCLE, ["1"]), 7.0, [0.0])
    assert r.point[0] == pytest.approx(7.0 - 2 * math.pi)
    assert r.cls.exponents == (1,)


def test_outside_support_is_fixed_exactly():
    v = vector(CIRCLE, ["bump((x-1.5)/0.5)"], [(1.0, 2.0)])
    assert flow(v, 3.0, [0.5]).point[0] == 0.5


def test_rk4_self_convergence():
    v = vector(CIRCLE, ["sin(x)"])
    ref = flow(v, 1.0, [math.pi / 2], steps=2**14).point[0]
    errs = [abs(flow(v, 1.0, [math.pi / 2], steps=s).point[0] - ref) for s in (16, 32, 64)]
    assert errs[0] / errs[1] > 12 and errs[1] / errs[2] > 12
    exact = oracles.flow_ode(np.sin, 1.0, [math.pi / 2])[0]
    assert ref == pytest.approx(exact, abs=1e-11)


def test_too_few_steps_rejected():
    with pytest.raises(InvalidParam):
        FlowMap(vector(CIRCLE, ["1"]), 1.0, steps=8)


def test_jacobian_trivial_cases():
    assert jacobian_factor(vector(TORUS, ["1", "2"]), 0.7, [0.1, 0.2]) == pytest.approx(1.0)
    assert jacobian_factor(vector(CIRCLE, ["sin(x)"]), 0.0, [0.3]) == 1.0


def test_jacobian_line_example():
    v = vector(LINE, ["x*bump(x/3)"], [(-3.0, 3.0)])
    J = jacobian_factor(v, 0.1, [0.0])
    assert J == pytest.approx(math.exp(-0.05), rel=1e-12)
    rhs = lambda z: z * np.where(np.abs(z / 3) < 1, np.exp(1 - 1 / (1 - np.minimum((z / 3) ** 2, 0.999))), 0)
    for x0 in (0.5, -1.2):
        assert jacobian_factor(v, 0.1, [x0]) == pytest.approx(oracles.jacobian_fd(rhs, 0.1, [x0]), abs=1e-6)


@pytest.mark.parametrize("x0", [0.2, 1.7, 4.4])
def test_jacobian_matches_1d_formula(x0):
    v = lambda z: 1 + 0.4 * np.sin(z)
    J = jacobian_factor(vector(CIRCLE, ["1 + 0.4*sin(x)"]), 0.9, [x0], steps=256)
    assert J == pytest.approx(oracles.jacobian_1d(v, 0.9, x0), rel=1e-9)


def test_jacobian_2d_matches_fd_determinant():
    v = vector(TORUS, ["sin(y)", "0.5*cos(x)*sin(y)"])
    rhs = lambda z: np.array([np.sin(z[1]), 0.5 * np.cos(z[0]) * np.sin(z[1])])
    for p in ([0.4, 1.1], [3.0, 2.2]):
        J = jacobian_factor(v, 0.6, p, steps=256)
        assert J == pytest.approx(oracles.jacobian_fd(rhs, 0.6, p), abs=1e-6)


@settings(max_examples=15, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(0, 2 * math.pi))
def test_group_law_and_jacobian_cocycle(lam, mu, x):
    v = vector(CIRCLE, ["1 + 0.5*sin(x)"])
    steps = 128
    a = FlowMap(v, lam, steps).forward_cover(FlowMap(v, mu, steps).forward_cover([[x]]))
    b = FlowMap(v, lam + mu, steps).forward_cover([[x]])
    assert abs(a[0, 0] - b[0, 0]) < 1e-8
    # J(g_{lam+mu}, x) = J(g_lam, x) J(g_mu, g_lam^-1 x)
    y = FlowMap(v, -lam, steps).forward_cover([[x]])
    lhs = FlowMap(v, lam + mu, steps).jacobian([[x]])[0]
    rhs = FlowMap(v, lam, steps).jacobian([[x]])[0] * FlowMap(v, mu, steps).jacobian(y)[0]
    assert lhs == pytest.approx(rhs, rel=1e-8)


def test_forward_backward_identity():
    v = vector(TORUS, ["sin(y)", "1 + 0.3*cos(x)"])
    g = FlowMap(v, 1.3, 128)
    pts = make_grid(TORUS, 8).points
    np.testing.assert_allclose(g.backward_cover(g.forward_cover(pts)), pts, atol=1e-9)


def test_pushforward_examples():
    grid = make_grid(CIRCLE, 32)
    w = vector(CIRCLE, ["cos(x)"])
    ident = pushforward_field(FlowMap(vector(CIRCLE, ["sin(x)"]), 0.0), w, grid)
    np.testing.assert_allclose(ident, w.sample(grid), atol=1e-12)
    const = pushforward_field(FlowMap(vector(TORUS, ["1", "0"]), 0.4), vector(TORUS, ["2", "1"]),
                              make_grid(TORUS, 8))
    np.testing.assert_allclose(const, np.tile([2.0, 1.0], (64, 1)), atol=1e-10)


def test_pushforward_step_halving():
    grid = make_grid(CIRCLE, 32)
    g = FlowMap(vector(CIRCLE, ["sin(x)"]), 0.2, 128)
    w = vector(CIRCLE, ["1"])
    h = grid.h[0]
    coarse = pushforward_field(g, w, grid, fd_step=h / 2)
    mid = pushforward_field(g, w, grid, fd_step=h / 4)
    fine = pushforward_field(g, w, grid, fd_step=h / 8)
    # Central differences: error shrinks ~4x per halving.
    e1, e2 = np.abs(coarse - fine).max(), np.abs(mid - fine).max()
    assert e1 / e2 > 3.5
    # Exact: (g_* d/dx)(x) = sin(x) / sin(g^-1 x) along the flow of sin(x) d/dx.
    x = grid.points[:, 0]
    y = g.backward_cover(grid.points)[:, 0]
    keep = np.abs(np.sin(y)) > 0.1
    np.testing.assert_allclose(mid[keep, 0], np.sin(x[keep]) / np.sin(y[keep]), atol=1e-3)
