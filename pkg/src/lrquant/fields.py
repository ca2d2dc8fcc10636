"""Scalar functions and vector fields on a built-in manifold."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from . import dsl
from .errors import InvalidParam, SupportViolation
from .manifolds import Manifold, reduce_points

SUPPORT_TOL = 1e-14
PERIODIC_TOL = 1e-12
_SAMPLES = 97

Box = tuple[tuple[float, float], ...]


def _as_expr(e) -> dsl.Expr:
    return dsl.parse(e) if isinstance(e, str) else e


def _as_box(m: Manifold, box) -> Box | None:
    if box is None:
        return None
    box = tuple((float(lo), float(hi)) for lo, hi in box)
    if len(box) != m.dim:
        raise InvalidParam(f"support box needs {m.dim} intervals, got {len(box)}")
    for lo, hi in box:
        if not lo < hi:
            raise InvalidParam(f"empty support interval ({lo}, {hi})")
    return box


def _check_variables(m: Manifold, exprs) -> None:
    allowed = set(m.coordinates)
    for e in exprs:
        extra = e.variables() - allowed
        if extra:
            raise InvalidParam(f"variables {sorted(extra)} are not coordinates of {m.label()}")


def _sample_domain(m: Manifold) -> np.ndarray:
    axes = [np.linspace(lo, hi, _SAMPLES) for lo, hi in zip(m.lower, m.upper)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([c.ravel() for c in mesh], axis=-1)


def _env(m: Manifold, pts: np.ndarray) -> dict[str, np.ndarray]:
    return {name: pts[:, i] for i, name in enumerate(m.coordinates)}


def _check_support(m: Manifold, box: Box | None, values_fn, what: str) -> None:
    if m.kind == "Line" or (m.kind == "Annulus"):
        non_periodic = [ax for ax, p in enumerate(m.periodic) if not p]
        if m.kind == "Line" and box is None:
            raise SupportViolation(f"{what} on a Line needs an explicit support box")
        if box is not None:
            for ax in non_periodic:
                lo, hi = box[ax]
                if not (m.lower[ax] < lo and hi < m.upper[ax]):
                    raise SupportViolation(
                        f"{what} support ({lo}, {hi}) is not strictly inside "
                        f"({m.lower[ax]}, {m.upper[ax]})")
    if box is None:
        return
    pts = _sample_domain(m)
    outside = np.zeros(len(pts), dtype=bool)
    for ax, (lo, hi) in enumerate(box):
        outside |= (pts[:, ax] < lo) | (pts[:, ax] > hi)
    if outside.any():
        vals = np.abs(values_fn(pts[outside]))
        worst = float(vals.max())
        if worst >= SUPPORT_TOL:
            raise SupportViolation(f"{what} is {worst:.3g} outside its support box {box}")


def _edge_samples(m: Manifold, rule) -> np.ndarray:
    other = [ax for ax in range(m.dim) if ax != rule.axis]
    pts = np.zeros((_SAMPLES, m.dim))
    pts[:, rule.axis] = m.lower[rule.axis]
    for ax in other:
        pts[:, ax] = np.linspace(m.lower[ax], m.upper[ax], _SAMPLES)
    return pts


def _check_periodic(m: Manifold, values_fn, linear: bool, what: str) -> None:
    """Values on the lower face must match their deck images on the upper face."""
    for rule in m.edge_rules:
        gen = m.deck_generators[rule.generator]
        p = _edge_samples(m, rule)
        here = values_fn(p)
        there = values_fn(gen.apply(p, 1))
        if linear:
            here = here * np.asarray(gen.signs, dtype=float)
        scale = max(1.0, float(np.abs(here).max(initial=0.0)))
        err = float(np.abs(there - here).max(initial=0.0))
        if err >= PERIODIC_TOL * scale:
            raise InvalidParam(
                f"{what} does not respect the identification of generator "
                f"{m.presentation.generators[rule.generator]} (mismatch {err:.3g})")


@dataclass(frozen=True, eq=False)
class ScalarField:
    expr: dsl.Expr
    manifold: Manifold
    support_box: Box | None = None

    def __post_init__(self):
        object.__setattr__(self, "expr", _as_expr(self.expr))
        object.__setattr__(self, "support_box", _as_box(self.manifold, self.support_box))
        _check_variables(self.manifold, [self.expr])
        _check_support(self.manifold, self.support_box, self._raw, "function")
        _check_periodic(self.manifold, self._raw, False, "function")

    def _raw(self, pts):
        return dsl.evaluate(self.expr, _env(self.manifold, np.asarray(pts).reshape(-1, self.manifold.dim)))

    def values(self, pts) -> np.ndarray:
        """Values at cover points (reduced to the fundamental domain first)."""
        q, _ = reduce_points(self.manifold, np.asarray(pts, dtype=float).reshape(-1, self.manifold.dim))
        return self._raw(q)

    def sample(self, grid) -> np.ndarray:
        return dsl.evaluate(self.expr, grid.coordinate_env())

    def __str__(self):
        return dsl.to_source(self.expr)


@dataclass(frozen=True, eq=False)
class VectorField:
    components: tuple[dsl.Expr, ...]
    manifold: Manifold
    support_box: Box | None = None
    validate: bool = True

    def __post_init__(self):
        comps = tuple(_as_expr(c) for c in self.components)
        if len(comps) != self.manifold.dim:
            raise InvalidParam(f"{self.manifold.label()} fields need {self.manifold.dim} components")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "support_box", _as_box(self.manifold, self.support_box))
        _check_variables(self.manifold, comps)
        if self.validate:
            _check_support(self.manifold, self.support_box,
                           lambda p: np.abs(self._raw(p)).max(axis=1), "vector field")
            _check_periodic(self.manifold, self._raw, True, "vector field")

    def _raw(self, pts) -> np.ndarray:
        env = _env(self.manifold, np.asarray(pts).reshape(-1, self.manifold.dim))
        return np.stack([dsl.evaluate(c, env) for c in self.components], axis=-1)

    def values(self, pts) -> np.ndarray:
        """Field at cover points: v(deck(c) q) = L_c v(q)."""
        m = self.manifold
        q, exps = reduce_points(m, np.asarray(pts, dtype=float).reshape(-1, m.dim))
        return self._raw(q) * m.signs_of_class(exps)

    def sample(self, grid) -> np.ndarray:
        env = grid.coordinate_env()
        return np.stack([dsl.evaluate(c, env) for c in self.components], axis=-1)

    def divergence(self) -> dsl.Expr:
        return self._divergence

    @cached_property
    def _divergence(self) -> dsl.Expr:
        out: dsl.Expr = dsl.ZERO
        for c, var in zip(self.components, self.manifold.coordinates):
            out = dsl.add(out, c.diff(var))
        return out

    def divergence_values(self, pts) -> np.ndarray:
        q, _ = reduce_points(self.manifold, np.asarray(pts, dtype=float).reshape(-1, self.manifold.dim))
        return np.broadcast_to(dsl.evaluate(self._divergence, _env(self.manifold, q)), (len(q),))

    def values_and_divergence(self, pts) -> tuple[np.ndarray, np.ndarray]:
        """Field and divergence at cover points with a single reduction."""
        m = self.manifold
        q, exps = reduce_points(m, np.asarray(pts, dtype=float).reshape(-1, m.dim))
        div = np.broadcast_to(dsl.evaluate(self._divergence, _env(m, q)), (len(q),))
        return self._raw(q) * m.signs_of_class(exps), div

    def contains(self, pts) -> np.ndarray:
        """True where reduced points lie in the closed support box (or no box)."""
        pts = np.asarray(pts, dtype=float).reshape(-1, self.manifold.dim)
        if self.support_box is None:
            return np.ones(len(pts), dtype=bool)
        q, _ = reduce_points(self.manifold, pts)
        inside = np.ones(len(pts), dtype=bool)
        for ax, (lo, hi) in enumerate(self.support_box):
            inside &= (q[:, ax] >= lo) & (q[:, ax] <= hi)
        return inside

    def scaled(self, f: ScalarField) -> "VectorField":
        """The module product f v."""
        box = _intersect(f.support_box, self.support_box)
        return VectorField(tuple(dsl.mul(f.expr, c) for c in self.components),
                           self.manifold, box, validate=False)

    def __neg__(self):
        return VectorField(tuple(dsl.neg(c) for c in self.components), self.manifold,
                           self.support_box, validate=False)

    def __str__(self):
        parts = [f"({dsl.to_source(c)}) d{v}" for c, v in zip(self.components, self.manifold.coordinates)]
        return " + ".join(parts)


def _intersect(a: Box | None, b: Box | None) -> Box | None:
    if a is None:
        return b
    if b is None:
        return a
    out = []
    for (l1, h1), (l2, h2) in zip(a, b):
        lo, hi = max(l1, l2), min(h1, h2)
        if lo >= hi:
            # Disjoint supports: the product vanishes identically.
            mid = 0.5 * (lo + hi)
            lo, hi = mid, float(np.nextafter(mid, np.inf))
        out.append((lo, hi))
    return tuple(out)


def _union(a: Box | None, b: Box | None) -> Box | None:
    if a is None or b is None:
        return None
    return tuple((min(l1, l2), max(h1, h2)) for (l1, h1), (l2, h2) in zip(a, b))


def scalar(m: Manifold, src, support=None) -> ScalarField:
    return ScalarField(_as_expr(src), m, support)


def vector(m: Manifold, comps: Sequence, support=None) -> VectorField:
    return VectorField(tuple(_as_expr(c) for c in comps), m, support)


def lie_bracket(v: VectorField, w: VectorField) -> VectorField:
    """[v, w]_i = sum_j v_j d_j w_i - w_j d_j v_i."""
    if v.manifold is not w.manifold and v.manifold != w.manifold:
        raise InvalidParam("fields live on different manifolds")
    coords = v.manifold.coordinates
    comps = []
    for i in range(v.manifold.dim):
        term: dsl.Expr = dsl.ZERO
        for j, var in enumerate(coords):
            term = dsl.add(term, dsl.mul(v.components[j], w.components[i].diff(var)))
            term = dsl.sub(term, dsl.mul(w.components[j], v.components[i].diff(var)))
        comps.append(term)
    return VectorField(tuple(comps), v.manifold, _union(v.support_box, w.support_box), validate=False)
