"""Discretized Schroedinger representation on L^2(M, dx) and its relation residuals.

Momenta use the symmetric ordering ``T_v = -(i/2) sum_j (v_j D_j + D_j v_j)``,
the grid form of ``-i (v . grad + div v / 2)``; it is hermitian to rounding
for every stencil.  One-parameter groups follow ``U(lam v) = exp(-i lam T_v)``,
so for ``v = d/dx`` on the circle ``U(lam)`` translates wave functions by
``+lam``: ``(U psi)(x) = psi(x - lam)``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np
import scipy.sparse as sp

from . import lattice
from .errors import InvalidParam, SizeExceeded, SolveFailed, SupportViolation
from .fields import ScalarField, VectorField, lie_bracket
from .flows import FlowMap, pushforward_field
from .manifolds import Grid

HERMITIAN_TOL = 1e-12
UNITARY_TOL = 1e-10
SPECTRAL_NORM_MAX = 1024
DENSE_EXP_MAX = 4096
MARGIN_STEPS = 4


def _dense(A) -> np.ndarray:
    return A.toarray() if sp.issparse(A) else np.asarray(A)


def _fro(A) -> float:
    return float(sp.linalg.norm(A)) if sp.issparse(A) else float(np.linalg.norm(A))


@dataclass(frozen=True, eq=False)
class LinOp:
    """A matrix over the grid (x fiber) basis with a structural flag."""

    matrix: Any
    kind: str = "general"  # hermitian | unitary | general

    def __post_init__(self):
        if self.kind not in ("hermitian", "unitary", "general"):
            raise InvalidParam(f"unknown operator kind {self.kind!r}")
        if self.kind == "hermitian":
            err, scale = self.hermiticity_residual(), _fro(self.matrix)
            if err > HERMITIAN_TOL * max(scale, 1.0):
                raise InvalidParam(f"operator flagged hermitian has residual {err:.3g}")
        elif self.kind == "unitary":
            err = self.unitarity_residual()
            if err > UNITARY_TOL:
                raise InvalidParam(f"operator flagged unitary has residual {err:.3g}")

    @property
    def shape(self):
        return self.matrix.shape

    def dense(self) -> np.ndarray:
        return _dense(self.matrix)

    def hermiticity_residual(self) -> float:
        A = self.matrix
        D = A - (A.conj().T if sp.issparse(A) else A.conj().T)
        return _fro(D)

    def unitarity_residual(self) -> float:
        A = self.dense()
        return float(np.linalg.norm(A.conj().T @ A - np.eye(A.shape[0]), 2))

    def __matmul__(self, other):
        other = other.matrix if isinstance(other, LinOp) else other
        return self.matrix @ other


@dataclass
class ResidualRecord:
    check: str
    quantity: str
    params: dict
    resolution: tuple
    residual: float
    norm_kind: str
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["resolution"] = list(self.resolution)
        extra = d.pop("extra")
        d.update(extra)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


@dataclass
class Report:
    check: str
    params: dict
    records: list[ResidualRecord] = field(default_factory=list)

    def add(self, quantity, resolution, residual, norm_kind, **extra) -> ResidualRecord:
        rec = ResidualRecord(self.check, quantity, dict(self.params), tuple(resolution),
                             float(residual), norm_kind, extra)
        self.records.append(rec)
        return rec

    def select(self, quantity: str) -> list[ResidualRecord]:
        return [r for r in self.records if r.quantity == quantity]

    def residual(self, quantity: str, index: int = -1) -> float:
        return self.select(quantity)[index].residual

    def ratio(self, quantity: str) -> float:
        """Coarse over fine residual of the last two resolutions."""
        recs = self.select(quantity)
        coarse, fine = recs[-2].residual, recs[-1].residual
        return coarse / fine if fine > 0 else float("inf")

    def to_dicts(self) -> list[dict]:
        return [r.to_dict() for r in self.records]


def op_norm(E, probes: np.ndarray | None = None) -> tuple[float, str]:
    """Spectral norm (Frobenius above SPECTRAL_NORM_MAX), or norm restricted to probes."""
    if probes is not None:
        return float(np.linalg.norm(E @ probes, 2)), "probe"
    if E.shape[0] <= SPECTRAL_NORM_MAX:
        return float(np.linalg.norm(_dense(E), 2)), "spectral"
    return _fro(E), "frobenius"


# ------------------------------------------------------------------ operators


def _fiber_lift(grid: Grid, diag: np.ndarray, rep) -> sp.csr_matrix:
    k = lattice.fiber_dim(rep)
    return sp.diags(np.repeat(np.asarray(diag, dtype=complex), k)).tocsr()


def mult_op(grid: Grid, f: ScalarField, rep=None) -> LinOp:
    samples = f.sample(grid)
    return LinOp(_fiber_lift(grid, samples, rep), "hermitian")


def check_margin(grid: Grid, v: VectorField) -> None:
    m = grid.manifold
    for ax, periodic in enumerate(m.periodic):
        if periodic:
            continue
        lo_ok = m.lower[ax] + MARGIN_STEPS * grid.h[ax]
        hi_ok = m.upper[ax] - MARGIN_STEPS * grid.h[ax]
        if v.support_box is None:
            if m.kind == "Line":
                raise SupportViolation("fields on a Line need a support box")
            continue
        lo, hi = v.support_box[ax]
        if lo < lo_ok or hi > hi_ok:
            raise SupportViolation(
                f"support ({lo:g}, {hi:g}) breaches the {MARGIN_STEPS}h margin "
                f"({lo_ok:g}, {hi_ok:g}) on axis {ax}")


def momentum_from_samples(grid: Grid, samples: np.ndarray, order=2, rep=None) -> LinOp:
    """Symmetrically ordered -(i/2) sum_j (v_j D_j + D_j v_j) from grid samples of v."""
    samples = np.asarray(samples).reshape(grid.size, grid.dim)
    k = lattice.fiber_dim(rep)
    T = sp.csr_matrix((grid.size * k, grid.size * k), dtype=complex)
    for ax in range(grid.dim):
        col = samples[:, ax]
        if not np.any(col):
            continue
        D = lattice.derivative(grid, ax, order, rep)
        V = _fiber_lift(grid, col, rep)
        T = T + (V @ D + D @ V)
    return LinOp((-0.5j * T).tocsr(), "hermitian")


def momentum_op(grid: Grid, v: VectorField, order=2, rep=None) -> LinOp:
    check_margin(grid, v)
    return momentum_from_samples(grid, v.sample(grid), order, rep)


def resolvent(T: LinOp) -> LinOp:
    """R = (T - i)^-1 by dense LU; refuses when the condition estimate exceeds 1e6."""
    if T.kind != "hermitian":
        raise InvalidParam("resolvent needs a hermitian-flagged operator")
    A = T.dense() - 1j * np.eye(T.shape[0])
    R = np.linalg.solve(A, np.eye(T.shape[0], dtype=complex))
    cond = np.linalg.norm(A, 1) * np.linalg.norm(R, 1)
    if not np.isfinite(cond) or cond > 1e6:
        raise SolveFailed(f"condition estimate {cond:.3g} loses more than 6 digits")
    return LinOp(R, "general")


def unitary(T: LinOp, lam: float, cap: int = DENSE_EXP_MAX) -> LinOp:
    """U = exp(-i lam T) through the eigendecomposition of T."""
    if T.kind != "hermitian":
        raise InvalidParam("unitary needs a hermitian-flagged operator")
    n = T.shape[0]
    if n > cap:
        raise SizeExceeded(f"dense exponential of size {n} exceeds cap {cap}")
    if lam == 0:
        return LinOp(np.eye(n, dtype=complex), "unitary")
    A = T.dense()
    evals, Q = np.linalg.eigh(0.5 * (A + A.conj().T))
    U = (Q * np.exp(-1j * lam * evals)) @ Q.conj().T
    return LinOp(U, "unitary")


def transport_unitary(grid: Grid, g: FlowMap, rep=None) -> sp.csr_matrix:
    """(U psi)(x) = R(c) J(g, x) psi(g^-1 x) with cubic interpolation at g^-1 x.

    ``c`` is the class of the backward orbit from x (trivial without ``rep``).
    Only unitary up to interpolation error, so no flag is attached.
    """
    q, exps, J = g.backward_with_jacobian(grid.points)
    if rep is None:
        blocks = J
    else:
        from .homotopy import rep_matrices
        blocks = rep_matrices(rep, exps) * J[:, None, None]
        if rep.fiber_dim == 1:
            blocks = blocks[:, 0, 0]
    return lattice.interpolation_matrix(grid, q, rep, blocks)


# ------------------------------------------------------------------- checks


def _norm(A) -> float:
    return op_norm(A)[0]


def check_lr_relation(grid: Grid, f: ScalarField, v: VectorField, order=2, levels: int = 2) -> Report:
    """|| T_{f v} - (f T_v + T_v f)/2 || / ||T_{f v}|| at ``levels`` doubled resolutions."""
    rep = Report("lr", {"f": str(f), "v": str(v), "order": order})
    fv = v.scaled(f)
    g = grid
    for _ in range(levels):
        F = mult_op(g, f).matrix
        Tv = momentum_op(g, v, order).matrix
        Tfv = momentum_op(g, fv, order).matrix
        E = Tfv - 0.5 * (F @ Tv + Tv @ F)
        err, kind = op_norm(E)
        scale = op_norm(Tfv)[0]
        rel = err / scale if scale > 0 else err
        rep.add("relative", g.shape, rel, kind, absolute=err, scale=scale)
        g = g.refined()
    return rep


def check_resolvent_identities(grid: Grid, v: VectorField, lams=(1e-2, 1e-3, 1e-4), order=2) -> Report:
    rep = Report("resolvent", {"v": str(v), "order": order})
    T = momentum_op(grid, v, order)
    R = resolvent(T).dense()
    Rm = resolvent(momentum_op(grid, -v, order)).dense()
    Rs = R.conj().T
    I = np.eye(R.shape[0])
    rep.add("R-R*=2iRR*", grid.shape, _norm(R - Rs - 2j * R @ Rs), "spectral")
    rep.add("R-R*=2iR*R", grid.shape, _norm(R - Rs - 2j * Rs @ R), "spectral")
    rep.add("R*=-R(-v)", grid.shape, _norm(Rs + Rm), "spectral")
    rep.add("norm(R)", grid.shape, _norm(R), "spectral")
    A = T.dense()
    evals, Q = np.linalg.eigh(0.5 * (A + A.conj().T))
    R2 = R @ R
    for lam in lams:
        U = (Q * np.exp(-1j * lam * evals)) @ Q.conj().T
        lhs = (1j * (U - I) / lam - 1j * I) @ R2
        rep.add("resolvent-limit", grid.shape, _norm(lhs - R), "spectral", lam=lam)
    return rep


def check_covariance(grid: Grid, g: FlowMap, f: ScalarField, w: VectorField, order=2,
                     levels: int = 2, probes: int = 16) -> Report:
    """U M_f U^-1 = M_{f o g^-1} and U R_w U^-1 = R_{g_* w} on smooth probe states."""
    rep = Report("covariance", {"v": str(g.field), "lam": g.lam, "f": str(f), "w": str(w),
                                "order": order, "steps": g.steps})
    gr = grid
    for _ in range(levels):
        Q = lattice.smooth_probes(gr, None, probes)
        U = transport_unitary(gr, g)
        Ui = transport_unitary(gr, g.inverse())
        F = mult_op(gr, f).matrix
        q, _ = g.backward(gr.points)
        Fg = sp.diags(f.values(q).astype(complex))
        E1 = U @ (F @ (Ui @ Q)) - Fg @ Q
        rep.add("function", gr.shape, np.linalg.norm(E1, 2), "probe")
        Rw = resolvent(momentum_op(gr, w, order)).dense()
        pushed = pushforward_field(g, w, gr)
        Rgw = resolvent(momentum_from_samples(gr, pushed, order)).dense()
        E2 = U @ (Rw @ (Ui @ Q)) - Rgw @ Q
        rep.add("resolvent", gr.shape, np.linalg.norm(E2, 2), "probe")
        gr = gr.refined()
    return rep


def check_lie_relations(grid: Grid, v: VectorField, w: VectorField, order=2,
                        levels: int = 2, probes: int = 16) -> Report:
    """|| [T_v, T_w] + i T_[v,w] || relative to || T_[v,w] || on smooth probe states."""
    rep = Report("lie", {"v": str(v), "w": str(w), "order": order})
    br = lie_bracket(v, w)
    gr = grid
    for _ in range(levels):
        Q = lattice.smooth_probes(gr, None, probes)
        Tv = momentum_op(gr, v, order).matrix
        Tw = momentum_op(gr, w, order).matrix
        Tb = momentum_from_samples(gr, br.sample(gr), order).matrix
        E = Tv @ (Tw @ Q) - Tw @ (Tv @ Q) + 1j * (Tb @ Q)
        err = float(np.linalg.norm(E, 2))
        scale = float(np.linalg.norm(Tb @ Q, 2))
        rel = err / scale if scale > 1e-300 else err
        rep.add("relative", gr.shape, rel, "probe", absolute=err, scale=scale)
        gr = gr.refined()
    return rep


def check_cartesian_commutation(grid: Grid, alpha: ScalarField, v1: VectorField, v2: VectorField,
                                lam: float, mu: float, steps: int = 64, levels: int = 2,
                                probes: int = 16) -> Report:
    """|| (U1(lam) U2(mu) - U2(mu) U1(lam)) M_alpha || for fields equal to d_x, d_y near supp alpha."""
    rep = Report("cartesian", {"alpha": str(alpha), "v1": str(v1), "v2": str(v2),
                               "lam": lam, "mu": mu})
    gr = grid
    g1, g2 = FlowMap(v1, lam, steps), FlowMap(v2, mu, steps)
    for _ in range(levels):
        Q = lattice.smooth_probes(gr, None, probes)
        U1 = transport_unitary(gr, g1)
        U2 = transport_unitary(gr, g2)
        X = mult_op(gr, alpha).matrix @ Q
        E = U1 @ (U2 @ X) - U2 @ (U1 @ X)
        rep.add("commutator", gr.shape, np.linalg.norm(E, 2), "probe")
        gr = gr.refined()
    return rep
