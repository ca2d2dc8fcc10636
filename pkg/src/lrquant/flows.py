"""One-parameter diffeomorphism groups g(lambda v) and their Jacobian factors.

Flows are integrated with fixed-step classical RK4 in cover coordinates; the
homotopy class of an orbit is read off from the tile its cover endpoint lies
in, so it never has to be reconstructed afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IntegrationDiverged, InvalidParam
from .fields import VectorField
from .homotopy import HomotopyClass
from .manifolds import reduce_points

MIN_STEPS = 16
# Periodic axes may wander this many periods before we call it divergence.
_WORKING_PERIODS = 1.0e4


@dataclass(frozen=True)
class FlowResult:
    point: np.ndarray          # reduced into the fundamental domain
    cls: HomotopyClass         # class of the traversed orbit
    cover_point: np.ndarray    # unreduced endpoint in the universal cover


def _check_box(m, pts: np.ndarray) -> None:
    if not np.all(np.isfinite(pts)):
        raise IntegrationDiverged("flow produced non-finite coordinates")
    for ax in range(m.dim):
        lo, hi = m.lower[ax], m.upper[ax]
        if m.periodic[ax]:
            span = _WORKING_PERIODS * (hi - lo)
            lo, hi = lo - span, hi + span
        if np.any(pts[:, ax] < lo) or np.any(pts[:, ax] > hi):
            raise IntegrationDiverged(f"orbit left the working box on axis {ax}")


def _rk4(rhs, y0: np.ndarray, t_total: float, steps: int) -> np.ndarray:
    y = y0.copy()
    dt = t_total / steps
    for _ in range(steps):
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * dt * k1)
        k3 = rhs(y + 0.5 * dt * k2)
        k4 = rhs(y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return y


@dataclass(frozen=True)
class FlowMap:
    """x -> g(lam v) x with ``steps`` RK4 substeps."""

    field: VectorField
    lam: float
    steps: int = 64

    def __post_init__(self):
        if self.steps < MIN_STEPS:
            raise InvalidParam(f"steps must be >= {MIN_STEPS}, got {self.steps}")

    @property
    def manifold(self):
        return self.field.manifold

    def inverse(self) -> "FlowMap":
        return FlowMap(self.field, -self.lam, self.steps)

    def _points(self, x) -> np.ndarray:
        return np.array(x, dtype=float).reshape(-1, self.manifold.dim)

    def _integrate(self, x, lam: float, with_log_jacobian: bool = False):
        m = self.manifold
        pts = self._points(x)
        active = self.field.contains(pts)
        out = pts.copy()
        ell = np.zeros(len(pts))
        if lam == 0 or not active.any():
            return (out, ell) if with_log_jacobian else out
        field = self.field
        dim = m.dim
        if with_log_jacobian:
            # d/ds (y, ell) = (v(y), div v(y)); integrated with signed time lam.
            def rhs(z):
                y = z[:, :dim]
                dz = np.empty_like(z)
                dz[:, :dim], dz[:, dim] = field.values_and_divergence(y)
                return dz

            z0 = np.concatenate([pts[active], np.zeros((active.sum(), 1))], axis=1)
            z = _rk4(rhs, z0, lam, self.steps)
            _check_box(m, z[:, :dim])
            out[active] = z[:, :dim]
            ell[active] = z[:, dim]
            return out, ell
        y = _rk4(field.values, pts[active], lam, self.steps)
        _check_box(m, y)
        out[active] = y
        return out

    def forward_cover(self, x) -> np.ndarray:
        return self._integrate(x, self.lam)

    def backward_cover(self, x) -> np.ndarray:
        return self._integrate(x, -self.lam)

    def forward(self, x):
        """Reduced endpoints and per-point class exponents of the forward orbits."""
        return _reduce_relative(self.manifold, self._points(x), self.forward_cover(x))

    def backward(self, x):
        return _reduce_relative(self.manifold, self._points(x), self.backward_cover(x))

    def log_jacobian(self, x) -> np.ndarray:
        """ell = int_0^lam div v(g(-s v) x) ds along the backward orbit."""
        _, ell = self._integrate(x, -self.lam, with_log_jacobian=True)
        # Integrating with time -lam accumulates -ell.
        return -ell

    def jacobian(self, x) -> np.ndarray:
        """J(g, x) = [d mu(g^-1 x) / d mu(x)]^(1/2) for Lebesgue measure."""
        return np.exp(-0.5 * self.log_jacobian(x))

    def backward_with_jacobian(self, x):
        """(reduced g^-1 x, class exponents, J(g, x)) in one integration."""
        pts = self._points(x)
        cover, ell = self._integrate(pts, -self.lam, with_log_jacobian=True)
        q, exps = _reduce_relative(self.manifold, pts, cover)
        return q, exps, np.exp(0.5 * ell)


def _reduce_relative(m, start: np.ndarray, end: np.ndarray):
    """Reduce endpoints; classes are taken relative to the start tile."""
    q, e_end = reduce_points(m, end)
    _, e_start = reduce_points(m, start)
    if m.presentation.rank == 0 or not e_start.any():
        return q, e_end
    pres = m.presentation
    inv = pres.inverse(tuple(e_start[:, i] for i in range(pres.rank)))
    rel = pres.multiply(inv, tuple(e_end[:, i] for i in range(pres.rank)))
    return q, np.stack(rel, axis=-1)


def flow(v: VectorField, lam: float, x, steps: int = 64) -> FlowResult:
    """Integrate dx/ds = v(x) for time ``lam`` from a single point."""
    fm = FlowMap(v, float(lam), steps)
    pts = np.array(x, dtype=float).reshape(1, v.manifold.dim)
    cover = fm.forward_cover(pts)
    q, exps = _reduce_relative(v.manifold, pts, cover)
    return FlowResult(q[0], HomotopyClass(tuple(int(e) for e in exps[0])), cover[0])


def jacobian_factor(v: VectorField, lam: float, x, steps: int = 64) -> float:
    """exp(-1/2 int_0^lam div v along the backward orbit through x)."""
    fm = FlowMap(v, float(lam), steps)
    return float(fm.jacobian(np.array(x, dtype=float).reshape(1, v.manifold.dim))[0])


def compose_cover(flows, x) -> np.ndarray:
    """Apply flows in order (first element acts first) in cover coordinates."""
    pts = np.array(x, dtype=float)
    for fm in flows:
        pts = fm.forward_cover(pts)
    return pts


def pushforward_field(g: FlowMap, w: VectorField, grid, fd_step: float | None = None) -> np.ndarray:
    """Grid samples of (g_* w)(x) = Dg(g^-1 x) w(g^-1 x).

    ``Dg`` comes from central differences of the cover flow map with step
    ``h/4`` per axis unless ``fd_step`` is given.
    """
    m = grid.manifold
    x = grid.points
    y = g.backward_cover(x)
    wy = w.values(y)
    out = np.zeros_like(wy)
    for j in range(m.dim):
        delta = grid.h[j] / 4 if fd_step is None else fd_step
        e = np.zeros(m.dim)
        e[j] = delta
        col = (g.forward_cover(y + e) - g.forward_cover(y - e)) / (2 * delta)
        out += col * wy[:, j:j + 1]
    return out
