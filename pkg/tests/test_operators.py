import json
import math

import numpy as np
import pytest

from lrquant import operators as ops
from lrquant.errors import InvalidParam, SizeExceeded, SupportViolation
from lrquant.fields import scalar, vector
from lrquant.flows import FlowMap
from lrquant.manifolds import ManifoldSpec, make_grid, make_manifold

CIRCLE = make_manifold(ManifoldSpec.circle())
LINE = make_manifold(ManifoldSpec.line(10.0))
TORUS = make_manifold(ManifoldSpec.torus(2 * math.pi, 2 * math.pi))


def test_mult_op_examples():
    g = make_grid(CIRCLE, 8)
    M = ops.mult_op(g, scalar(CIRCLE, "sin(x)")).dense()
    np.testing.assert_allclose(np.diag(M)[:3], [0, math.sqrt(2) / 2, 1], atol=1e-15)
    assert ops.op_norm(M)[0] == pytest.approx(1.0)
    assert not ops.mult_op(g, scalar(CIRCLE, "0")).dense().any()


def test_momentum_of_d_dx_converges_to_integers():
    errs = []
    for n in (64, 128):
        T = ops.momentum_op(make_grid(CIRCLE, n), vector(CIRCLE, ["1"]))
        ev = np.sort(np.linalg.eigvalsh(T.dense()))
        low = ev[np.abs(ev) < 3.5]
        errs.append(np.abs(low - np.round(low)).max())
    assert errs[0] / errs[1] == pytest.approx(4, rel=0.05)


def test_momentum_hermitian_and_zero():
    box = [(-6.0, 6.0)]
    T = ops.momentum_op(make_grid(LINE, 256), vector(LINE, ["x*bump(x/3)"], [(-3.0, 3.0)]))
    assert T.hermiticity_residual() <= 1e-12
    assert ops.momentum_op(make_grid(CIRCLE, 16), vector(CIRCLE, ["0"])).dense().any() == False  # noqa: E712
    with pytest.raises(SupportViolation):
        ops.momentum_op(make_grid(LINE, 16), vector(LINE, ["bump(x/8)"], [(-8.0, 8.0)]))
    ops.momentum_op(make_grid(LINE, 64), vector(LINE, ["bump(x/6)"], box))


def test_divergence_free_momentum_is_minus_i_v_dot_d():
    from lrquant import lattice
    g = make_grid(TORUS, 12)
    T = ops.momentum_op(g, vector(TORUS, ["sin(y)", "cos(x)"])).dense()
    D0, D1 = (lattice.derivative(g, a).toarray() for a in range(2))
    pts = g.points
    ref = -1j * (np.diag(np.sin(pts[:, 1])) @ D0 + np.diag(np.cos(pts[:, 0])) @ D1)
    # Symmetric ordering differs from -i v.D by the lattice commutator [D, v],
    # which is O(h^2) times v'' and vanishes for v_x depending only on y.
    np.testing.assert_allclose(T, ref, atol=1e-12)


def test_resolvent_examples():
    I = np.eye(3)
    R0 = ops.resolvent(ops.LinOp(np.zeros((3, 3)), "hermitian")).dense()
    np.testing.assert_allclose(R0, 1j * I)
    R1 = ops.resolvent(ops.LinOp(I.astype(complex), "hermitian")).dense()
    np.testing.assert_allclose(R1, (1 + 1j) / 2 * I)
    R = ops.resolvent(ops.momentum_op(make_grid(CIRCLE, 64), vector(CIRCLE, ["1"]))).dense()
    assert np.linalg.norm(R, 2) == pytest.approx(1.0)
    with pytest.raises(InvalidParam):
        ops.resolvent(ops.LinOp(np.eye(2)))


def test_flags_are_validated():
    with pytest.raises(InvalidParam):
        ops.LinOp(np.array([[0, 1], [0, 0]], dtype=complex), "hermitian")
    with pytest.raises(InvalidParam):
        ops.LinOp(2 * np.eye(2), "unitary")


def test_unitary_examples():
    T = ops.momentum_op(make_grid(CIRCLE, 64), vector(CIRCLE, ["1"]))
    np.testing.assert_allclose(ops.unitary(T, 0.0).dense(), np.eye(64))
    Tf = ops.momentum_op(make_grid(CIRCLE, 64), vector(CIRCLE, ["1"]), order="fourier")
    assert np.abs(ops.unitary(Tf, 2 * math.pi).dense() - np.eye(64)).max() <= 1e-8
    Tb = ops.momentum_op(make_grid(CIRCLE, 64), vector(CIRCLE, ["bump((x-3)/1.5)"], [(1.5, 4.5)]))
    assert ops.unitary(Tb, 0.3).unitarity_residual() <= 1e-10
    with pytest.raises(SizeExceeded):
        ops.unitary(T, 0.1, cap=32)


def test_unitary_translates_forward():
    g = make_grid(CIRCLE, 64)
    Tf = ops.momentum_op(g, vector(CIRCLE, ["1"]), order="fourier")
    x = g.points[:, 0]
    psi = np.exp(np.cos(x))
    lam = 0.4
    np.testing.assert_allclose(ops.unitary(Tf, lam).dense() @ psi, np.exp(np.cos(x - lam)), atol=1e-10)


def test_lr_relation_examples():
    g = make_grid(CIRCLE, 128)
    v = vector(CIRCLE, ["cos(x)"])
    rep = ops.check_lr_relation(g, scalar(CIRCLE, "2.5"), v, levels=1)
    assert rep.records[0].residual <= 1e-12
    f = scalar(CIRCLE, "bump((x-1)/0.5)", [(0.5, 1.5)])
    w = vector(CIRCLE, ["bump((x-4)/0.5)"], [(3.5, 4.5)])
    rep = ops.check_lr_relation(g, f, w, levels=1)
    assert rep.records[0].extra["absolute"] <= 1e-10
    rep = ops.check_lr_relation(make_grid(CIRCLE, 64), scalar(CIRCLE, "sin(x)"), v)
    assert 3.5 <= rep.ratio("relative") <= 4.5
    json.loads(rep.records[0].to_json())


def test_resolvent_identities():
    rep = ops.check_resolvent_identities(make_grid(CIRCLE, 64), vector(CIRCLE, ["1"]))
    for q in ("R-R*=2iRR*", "R-R*=2iR*R", "R*=-R(-v)"):
        assert rep.residual(q) <= 1e-10
    lim = [r.residual for r in rep.select("resolvent-limit")]
    assert 8 <= lim[0] / lim[1] <= 12
    zero = ops.check_resolvent_identities(make_grid(CIRCLE, 16), vector(CIRCLE, ["0"]))
    assert max(r.residual for r in zero.select("resolvent-limit")) <= 1e-14


def test_covariance_identity_and_exact_shift():
    g = make_grid(CIRCLE, 64)
    f = scalar(CIRCLE, "cos(3*x)")
    w = vector(CIRCLE, ["sin(x)"])
    ident = ops.check_covariance(g, FlowMap(vector(CIRCLE, ["sin(x)"]), 0.0), f, w, levels=1)
    assert max(r.residual for r in ident.records) <= 1e-10
    shift = ops.check_covariance(g, FlowMap(vector(CIRCLE, ["1"]), g.h[0]), f, w, levels=1)
    assert shift.residual("function") <= 1e-9


def test_lie_relation_examples():
    g = make_grid(CIRCLE, 64)
    v = vector(CIRCLE, ["sin(x)"])
    assert ops.check_lie_relations(g, v, v, levels=1).records[0].residual <= 1e-12
    a = vector(CIRCLE, ["bump((x-1)/0.5)"], [(0.5, 1.5)])
    b = vector(CIRCLE, ["bump((x-4)/0.5)"], [(3.5, 4.5)])
    assert ops.check_lie_relations(g, a, b, levels=1).records[0].extra["absolute"] <= 1e-10
    rep = ops.check_lie_relations(make_grid(CIRCLE, 128), v, vector(CIRCLE, ["cos(x)"]))
    assert 3.5 <= rep.ratio("relative") <= 4.5


def test_cartesian_commutation_decreases():
    alpha = scalar(TORUS, "bump((x-3)/1)*bump((y-3)/1)", [(2.0, 4.0), (2.0, 4.0)])
    v1 = vector(TORUS, ["1", "0"])
    v2 = vector(TORUS, ["0", "1"])
    rep = ops.check_cartesian_commutation(make_grid(TORUS, 24), alpha, v1, v2, 0.2, 0.15)
    r = [x.residual for x in rep.records]
    assert r[1] < r[0] and r[1] <= 1e-2
