"""Twisted representation spaces L^2(M~, K, R) and their operators.

Convention: crossing the positive edge of generator g multiplies the fiber by
R(g), i.e. ``psi(deck(c) p) = R(c) psi(p)``.  On the circle with
R(a) = exp(i theta) the momentum d/dx then has spectrum {n + theta / 2 pi},
and translating once around the circle acts as the scalar R(a^-1).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import lattice
from . import operators as ops
from .errors import BoxTouchesEdge, DimensionMismatch, InvalidParam, PresentationMismatch
from .fields import ScalarField, VectorField, scalar, vector
from .flows import FlowMap, _reduce_relative
from .homotopy import (HomotopyClass, Pi1Representation, conjugacy_invariants,
                       default_probe_classes, rep_matrices)
from .manifolds import Grid, Manifold, make_grid

# Stencil radius of the widest (order-4) first-derivative stencil.
STENCIL_RADIUS = 2


@dataclass(frozen=True, eq=False)
class RepSpace:
    grid: Grid
    rep: Pi1Representation

    @property
    def manifold(self) -> Manifold:
        return self.grid.manifold

    @property
    def fiber_dim(self) -> int:
        return self.rep.fiber_dim

    @property
    def size(self) -> int:
        return self.grid.size * self.fiber_dim

    def inner(self, a: np.ndarray, b: np.ndarray) -> complex:
        """sum_x weight(x) <a(x), b(x)>_K."""
        return complex(self.grid.weight * np.vdot(a, b))

    def norm(self, a: np.ndarray) -> float:
        return float(np.sqrt(self.inner(a, a).real))


def same_presentation(p, q) -> bool:
    return p.generators == q.generators and p.relations == q.relations and p.group == q.group


def build_space(m: Manifold, R: Pi1Representation, n) -> RepSpace:
    if not same_presentation(R.presentation, m.presentation):
        raise PresentationMismatch(
            f"representation of <{','.join(R.presentation.generators)}> used on {m.label()}")
    return RepSpace(make_grid(m, n), R)


def rep_mult(s: RepSpace, f: ScalarField) -> ops.LinOp:
    return ops.mult_op(s.grid, f, s.rep)


def rep_momentum(s: RepSpace, v: VectorField, order=2) -> ops.LinOp:
    return ops.momentum_op(s.grid, v, order, s.rep)


def rep_kinetic(s: RepSpace, order: int = 2):
    return lattice.kinetic(s.grid, order, s.rep)


def word_transport(s: RepSpace, flows) -> "np.ndarray | object":
    """Path-transport matrix of the composite g_n ... g_1 (``flows[0]`` acts first).

    Every grid point x is pulled back through the whole word in the cover,
    so the fiber factor is R of the class of the concatenated path and the
    Jacobian is the product of the factors along the way.
    """
    pts = s.grid.points
    cur = pts.copy()
    log_j = np.zeros(len(pts))
    for g in reversed(list(flows)):
        cur, ell = g._integrate(cur, -g.lam, with_log_jacobian=True)
        log_j += ell
    q, exps = _reduce_relative(s.manifold, pts, cur)
    J = np.exp(0.5 * log_j)
    blocks = rep_matrices(s.rep, exps) * J[:, None, None]
    if s.fiber_dim == 1:
        blocks = blocks[:, 0, 0]
    return lattice.interpolation_matrix(s.grid, q, s.rep, blocks)


def rep_unitary_from_flow(s: RepSpace, v: VectorField, lam: float, method: str = "exp",
                          order=2, steps: int = 64) -> ops.LinOp:
    """U(g(lam v)) as exp(-i lam T_v) (``"exp"``) or by path transport (``"transport"``)."""
    if method == "exp":
        return ops.unitary(rep_momentum(s, v, order), lam)
    if method == "transport":
        return ops.LinOp(word_transport(s, [FlowMap(v, lam, steps)]), "general")
    raise InvalidParam(f"unknown unitary method {method!r}")


def holonomy(s: RepSpace, g: FlowMap, x) -> np.ndarray:
    """V_g(x) = R(class of the orbit from x to g x)^-1, shape (M, k, k)."""
    pts = np.asarray(x, dtype=float).reshape(-1, s.manifold.dim)
    _, exps = g.forward(pts)
    return np.conj(np.swapaxes(rep_matrices(s.rep, exps), 1, 2))


def _composite_holonomy(s: RepSpace, g: FlowMap, h: FlowMap, x: np.ndarray) -> np.ndarray:
    end = g.forward_cover(h.forward_cover(x))
    _, exps = _reduce_relative(s.manifold, x, end)
    return np.conj(np.swapaxes(rep_matrices(s.rep, exps), 1, 2))


def sample_points(m: Manifold, count: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return np.asarray(m.lower) + rng.random((count, m.dim)) * np.asarray(m.extent)


def check_cocycle(s: RepSpace, g: FlowMap, h: FlowMap, samples) -> ops.Report:
    """max_x || V_g(h x) V_h(x) - V_{gh}(x) || over the sample points."""
    x = np.asarray(samples, dtype=float).reshape(-1, s.manifold.dim)
    rep = ops.Report("cocycle", {"g": str(g.field), "lam": g.lam, "h": str(h.field),
                                 "mu": h.lam, "steps": g.steps, "samples": len(x)})
    hx, _ = h.forward(x)
    lhs = holonomy(s, g, hx) @ holonomy(s, h, x)
    rhs = _composite_holonomy(s, g, h, x)
    err = np.linalg.norm(lhs - rhs, ord=2, axis=(1, 2))
    _, e_gh = _reduce_relative(s.manifold, x, g.forward_cover(h.forward_cover(x)))
    wraps = int(np.any(e_gh != 0, axis=1).sum())
    rep.add("max", s.grid.shape, float(err.max(initial=0.0)), "fiber-spectral", wrapping=wraps)
    return rep


def _interior_fields(m: Manifold, box) -> tuple[ScalarField, VectorField]:
    factors = []
    for (lo, hi), name in zip(box, m.coordinates):
        c, w = 0.5 * (lo + hi), 0.5 * (hi - lo)
        factors.append(f"bump(({name}-({c!r}))/{w!r})")
    src = "*".join(factors)
    comps = [f"({0.7 + 0.2 * j!r})*{src}" for j in range(m.dim)]
    return scalar(m, src, box), vector(m, comps, box)


def check_locally_schroedinger(s: RepSpace, box, f: ScalarField | None = None,
                               v: VectorField | None = None, lam: float = 0.3,
                               order: int = 2) -> ops.Report:
    """Twisted versus untwisted matrix elements between states supported in ``box``.

    Compares multiplication, momentum, path-transport unitary and the Dirichlet
    kinetic spectrum of the sub-box; all should agree to rounding because no
    wrap entry is reachable from the box.
    """
    m, grid = s.manifold, s.grid
    box = tuple((float(lo), float(hi)) for lo, hi in box)
    for ax, (lo, hi) in enumerate(box):
        margin = STENCIL_RADIUS * grid.h[ax]
        if not (m.lower[ax] + margin < lo and hi < m.upper[ax] - margin):
            raise BoxTouchesEdge(
                f"box ({lo:g}, {hi:g}) on axis {ax} is within {STENCIL_RADIUS} cells of the edge")
    if f is None or v is None:
        f0, v0 = _interior_fields(m, box)
        f, v = f or f0, v or v0
    k = s.fiber_dim
    idx = np.nonzero(grid.box_mask(box))[0]
    fidx = (idx[:, None] * k + np.arange(k)[None, :]).ravel()
    eye = np.eye(k)
    plain = RepSpace(grid, Pi1Representation.trivial(m.presentation))
    report = ops.Report("local", {"box": [list(b) for b in box], "f": str(f), "v": str(v),
                                  "lam": lam, "fiber_dim": k})

    def compare(name, A_twisted, A_plain):
        At = A_twisted.tocsr()[fidx][:, fidx].toarray()
        Ap = np.kron(A_plain.tocsr()[idx][:, idx].toarray(), eye)
        report.add(name, grid.shape, float(np.abs(At - Ap).max(initial=0.0)), "max-entry")

    compare("mult", rep_mult(s, f).matrix, rep_mult(plain, f).matrix)
    compare("momentum", rep_momentum(s, v, order).matrix, rep_momentum(plain, v, order).matrix)
    flow = [FlowMap(v, lam)]
    compare("unitary", word_transport(s, flow), word_transport(plain, flow))
    Kt = rep_kinetic(s, order).tocsr()[fidx][:, fidx].toarray()
    Kp = np.kron(rep_kinetic(plain, order).tocsr()[idx][:, idx].toarray(), eye)
    et, ep = np.linalg.eigvalsh(Kt), np.linalg.eigvalsh(Kp)
    report.add("dirichlet-spectrum", grid.shape, float(np.abs(et - ep).max(initial=0.0)), "max-eigenvalue")
    return report


@dataclass
class EquivalenceVerdict:
    verdict: str  # equivalent | distinct | inconclusive
    trace_difference: float
    spectrum_difference: float | None
    classes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "trace_difference": self.trace_difference,
                "spectrum_difference": self.spectrum_difference, "classes": self.classes}


TRACE_EQUAL_TOL = 1e-10
TRACE_DISTINCT_TOL = 1e-6


def check_equivalence(s1: RepSpace, s2: RepSpace, probe_classes=None, n_eigs: int = 10,
                      spectrum_tol: float = 1e-8) -> EquivalenceVerdict:
    """Evidence for unitary equivalence: characters on probe classes, then free spectra."""
    if s1.fiber_dim != s2.fiber_dim:
        raise DimensionMismatch(f"fiber dimensions {s1.fiber_dim} and {s2.fiber_dim} differ")
    if s1.grid.shape != s2.grid.shape or not same_presentation(
            s1.manifold.presentation, s2.manifold.presentation):
        raise DimensionMismatch("spaces live on different grids or manifolds")
    classes = probe_classes or default_probe_classes(s1.manifold.presentation)
    classes = [c if isinstance(c, HomotopyClass) else HomotopyClass(tuple(c)) for c in classes]
    t1 = np.array(conjugacy_invariants(s1.rep, classes))
    t2 = np.array(conjugacy_invariants(s2.rep, classes))
    tdiff = float(np.abs(t1 - t2).max(initial=0.0))
    names = [str(c) for c in classes]
    if tdiff > TRACE_DISTINCT_TOL:
        return EquivalenceVerdict("distinct", tdiff, None, names)
    from .spectra import eigenvalues, hamiltonian
    k = min(n_eigs, s1.size - 2)
    e1 = eigenvalues(hamiltonian(s1), k).eigenvalues
    e2 = eigenvalues(hamiltonian(s2), k).eigenvalues
    sdiff = float(np.abs(np.asarray(e1) - np.asarray(e2)).max(initial=0.0))
    ok = tdiff <= TRACE_EQUAL_TOL and sdiff <= spectrum_tol * (1 + float(np.abs(e1).max(initial=0.0)))
    return EquivalenceVerdict("equivalent" if ok else "inconclusive", tdiff, sdiff, names)


def check_route_agreement(s: RepSpace, v: VectorField, lam: float, n_states: int = 20,
                          seed: int = 0, order="fourier", steps: int = 128) -> ops.Report:
    """Exponential versus path-transport U on random smooth states.

    States are random combinations of the lowest twisted kinetic modes; the
    tolerance is max(1e-6, sup J times the cubic interpolation bound of the
    states), since transport multiplies interpolated values by J, and the
    exponential route uses the Fourier derivative so its own error is spectral.
    """
    rng = np.random.default_rng(seed)
    Q = lattice.smooth_probes(s.grid, s.rep, 16)
    C = rng.standard_normal((Q.shape[1], n_states)) + 1j * rng.standard_normal((Q.shape[1], n_states))
    X = Q @ C
    X /= np.abs(X).max(axis=0, keepdims=True)
    Ue = rep_unitary_from_flow(s, v, lam, "exp", order).matrix
    Ut = rep_unitary_from_flow(s, v, lam, "transport", steps=steps).matrix
    diff = float(np.abs(Ue @ X - Ut @ X).max())
    jmax = float(FlowMap(v, lam, steps).jacobian(s.grid.points).max())
    bound = jmax * lattice.interpolation_error_bound(s.grid, X, s.fiber_dim)
    report = ops.Report("route-agreement", {"v": str(v), "lam": lam, "states": n_states, "order": order})
    report.add("max-abs", s.grid.shape, diff, "sup", tolerance=max(1e-6, bound), bound=bound)
    return report
