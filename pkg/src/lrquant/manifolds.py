"""Built-in flat manifolds, their fundamental domains, deck groups and grids.

Every manifold is presented as a quotient of its universal cover R^dim by a
deck group generated by affine maps ``x -> s*x + t`` (per axis, ``s = +-1``).
The fundamental domain is the half-open box ``[lower, upper)``; leaving it
through the upper face of a periodic axis means entering the tile ``d_g F`` of
the generator ``g`` attached to that face.

Homotopy classes are stored in the normal form ``a^m b^n`` (an exponent
vector), which is unique for every built-in group: free abelian groups of rank
0, 1, 2 and the Klein bottle group ``<a, b | b a b^-1 = a^-1>``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidParam, InvalidWord

KINDS = ("Line", "Circle", "Torus", "Annulus", "KleinBottle")

PARAM_NAMES = {
    "Line": ("X",),
    "Circle": ("L",),
    "Torus": ("L1", "L2"),
    "Annulus": ("L", "W"),
    "KleinBottle": ("L1", "L2"),
}

GENERATOR_NAMES = "ab"


@dataclass(frozen=True)
class ManifoldSpec:
    kind: str
    params: tuple[float, ...]

    @classmethod
    def of(cls, kind: str, **params: float) -> "ManifoldSpec":
        if kind not in PARAM_NAMES:
            raise InvalidParam(f"unknown manifold kind {kind!r}; choose from {KINDS}")
        names = PARAM_NAMES[kind]
        if set(params) != set(names):
            raise InvalidParam(f"{kind} takes parameters {names}, got {tuple(params)}")
        return cls(kind, tuple(float(params[n]) for n in names))

    @classmethod
    def line(cls, X: float) -> "ManifoldSpec":
        return cls.of("Line", X=X)

    @classmethod
    def circle(cls, L: float = 2 * math.pi) -> "ManifoldSpec":
        return cls.of("Circle", L=L)

    @classmethod
    def torus(cls, L1: float, L2: float) -> "ManifoldSpec":
        return cls.of("Torus", L1=L1, L2=L2)

    @classmethod
    def annulus(cls, L: float, W: float) -> "ManifoldSpec":
        return cls.of("Annulus", L=L, W=W)

    @classmethod
    def klein_bottle(cls, L1: float, L2: float) -> "ManifoldSpec":
        return cls.of("KleinBottle", L1=L1, L2=L2)

    def param(self, name: str) -> float:
        return self.params[PARAM_NAMES[self.kind].index(name)]

    def as_dict(self) -> dict:
        return {"kind": self.kind, **dict(zip(PARAM_NAMES[self.kind], self.params))}


@dataclass(frozen=True)
class Pi1Presentation:
    """Generators, relator words and the group law on normal forms.

    Words are sequences of signed 1-based generator indices: ``1`` is ``a``,
    ``-1`` is ``a^-1``, ``2`` is ``b``.  ``group`` selects the multiplication
    rule: ``"abelian"`` (including rank 0) or ``"klein"``.
    """

    generators: tuple[str, ...]
    relations: tuple[tuple[int, ...], ...]
    abelian: bool
    group: str

    @property
    def rank(self) -> int:
        return len(self.generators)

    def identity(self) -> tuple[int, ...]:
        return (0,) * self.rank

    def generator(self, letter: int) -> tuple[int, ...]:
        idx = abs(letter) - 1
        if letter == 0 or idx >= self.rank:
            raise InvalidWord(f"generator index {letter} out of range for {self.generators}")
        exps = [0] * self.rank
        exps[idx] = 1 if letter > 0 else -1
        return tuple(exps)

    def multiply(self, c1, c2):
        """Product of normal forms; works elementwise on integer arrays too."""
        if self.group == "klein":
            m1, n1 = c1[0], c1[1]
            m2, n2 = c2[0], c2[1]
            sign = 1 - 2 * (np.asarray(n1) % 2)
            if np.ndim(sign) == 0:
                return (int(m1 + sign * m2), int(n1 + n2))
            return (m1 + sign * m2, n1 + n2)
        if np.ndim(c1[0] if self.rank else 0) == 0:
            return tuple(int(a + b) for a, b in zip(c1, c2))
        return tuple(a + b for a, b in zip(c1, c2))

    def inverse(self, c):
        if self.group == "klein":
            m, n = c
            sign = 1 - 2 * (np.asarray(n) % 2)
            if np.ndim(sign) == 0:
                return (int(-sign * m), int(-n))
            return (-sign * m, -n)
        return tuple(-a for a in c)

    def normal_form(self, word: Sequence[int]) -> tuple[int, ...]:
        c = self.identity()
        for letter in word:
            c = self.multiply(c, self.generator(int(letter)))
        return c

    def word_of(self, exps: Sequence[int]) -> tuple[int, ...]:
        """Canonical word a^m b^n of a normal form."""
        out: list[int] = []
        for i, e in enumerate(exps):
            out.extend([(i + 1) * (1 if e > 0 else -1)] * abs(int(e)))
        return tuple(out)


@dataclass(frozen=True)
class DeckGenerator:
    """Affine deck transformation x -> signs*x + shifts (per axis)."""

    signs: tuple[int, ...]
    shifts: tuple[float, ...]

    def apply(self, x: np.ndarray, power: int = 1) -> np.ndarray:
        s = np.asarray(self.signs, dtype=float)
        t = np.asarray(self.shifts, dtype=float)
        if power == 1:
            return x * s + t
        if power == -1:
            return (x - t) * s
        raise ValueError("power must be +1 or -1")


@dataclass(frozen=True)
class EdgeRule:
    """Leaving the box through the upper face of ``axis`` enters ``d_g F``.

    ``reversing`` marks generators whose linear part flips some axis.
    """

    axis: int
    generator: int  # 0-based
    reversing: bool


@dataclass(frozen=True)
class Manifold:
    spec: ManifoldSpec
    dim: int
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    periodic: tuple[bool, ...]
    edge_rules: tuple[EdgeRule, ...]
    deck_generators: tuple[DeckGenerator, ...]
    presentation: Pi1Presentation
    measure_density: float = 1.0

    @property
    def kind(self) -> str:
        return self.spec.kind

    @property
    def extent(self) -> tuple[float, ...]:
        return tuple(u - l for l, u in zip(self.lower, self.upper))

    @property
    def volume(self) -> float:
        return float(np.prod(self.extent))

    @property
    def coordinates(self) -> tuple[str, ...]:
        return ("x", "y")[: self.dim]

    def label(self) -> str:
        return f"{self.kind}({', '.join(f'{p:g}' for p in self.spec.params)})"

    def rule_for_axis(self, axis: int) -> EdgeRule | None:
        for rule in self.edge_rules:
            if rule.axis == axis:
                return rule
        return None

    def contains_periodic(self, pts: np.ndarray) -> bool:
        """True when every point lies in [lower, upper) along all periodic axes."""
        for ax, periodic in enumerate(self.periodic):
            if periodic:
                c = pts[:, ax]
                if not (c.min(initial=self.lower[ax]) >= self.lower[ax]
                        and c.max(initial=self.lower[ax]) < self.upper[ax]):
                    return False
        return True

    def signs_of_class(self, exps) -> np.ndarray:
        """Diagonal of the linear part of the deck map of a class (or array of classes)."""
        exps = np.asarray(exps, dtype=np.int64)
        out = np.ones(exps.shape[:-1] + (self.dim,))
        for g, gen in enumerate(self.deck_generators):
            for axis, s in enumerate(gen.signs):
                if s < 0:
                    out[..., axis] *= np.where(exps[..., g] % 2 == 1, -1.0, 1.0)
        return out


def make_manifold(spec: ManifoldSpec) -> Manifold:
    if spec.kind not in PARAM_NAMES:
        raise InvalidParam(f"unknown manifold kind {spec.kind!r}")
    if len(spec.params) != len(PARAM_NAMES[spec.kind]):
        raise InvalidParam(f"{spec.kind} needs parameters {PARAM_NAMES[spec.kind]}")
    for name, value in zip(PARAM_NAMES[spec.kind], spec.params):
        if not (value > 0 and math.isfinite(value)):
            raise InvalidParam(f"{spec.kind} parameter {name} must be positive, got {value}")

    kind = spec.kind
    if kind == "Line":
        (X,) = spec.params
        pres = Pi1Presentation((), (), True, "abelian")
        return Manifold(spec, 1, (-X,), (X,), (False,), (), (), pres)
    if kind == "Circle":
        (L,) = spec.params
        pres = Pi1Presentation(("a",), (), True, "abelian")
        return Manifold(spec, 1, (0.0,), (L,), (True,), (EdgeRule(0, 0, False),),
                        (DeckGenerator((1,), (L,)),), pres)
    if kind == "Annulus":
        L, W = spec.params
        pres = Pi1Presentation(("a",), (), True, "abelian")
        return Manifold(spec, 2, (0.0, 0.0), (L, W), (True, False), (EdgeRule(0, 0, False),),
                        (DeckGenerator((1, 1), (L, 0.0)),), pres)
    if kind == "Torus":
        L1, L2 = spec.params
        pres = Pi1Presentation(("a", "b"), ((1, 2, -1, -2),), True, "abelian")
        return Manifold(spec, 2, (0.0, 0.0), (L1, L2), (True, True),
                        (EdgeRule(0, 0, False), EdgeRule(1, 1, False)),
                        (DeckGenerator((1, 1), (L1, 0.0)), DeckGenerator((1, 1), (0.0, L2))), pres)
    # KleinBottle: b (x, y) = (L1 - x, y + L2), so b a b^-1 = a^-1.
    L1, L2 = spec.params
    pres = Pi1Presentation(("a", "b"), ((2, 1, -2, 1),), False, "klein")
    return Manifold(spec, 2, (0.0, 0.0), (L1, L2), (True, True),
                    (EdgeRule(0, 0, False), EdgeRule(1, 1, True)),
                    (DeckGenerator((1, 1), (L1, 0.0)), DeckGenerator((-1, 1), (L1, L2))), pres)


def _as_exps(m: Manifold, word) -> tuple[int, ...]:
    exps = getattr(word, "exponents", None)
    if exps is not None:
        if len(exps) != m.presentation.rank:
            raise InvalidWord("class belongs to a different presentation")
        return tuple(exps)
    return m.presentation.normal_form(word)


def deck_action(m: Manifold, word, x) -> np.ndarray:
    """Apply the deck transformation of ``word`` (letters act right to left).

    ``word`` is a sequence of signed generator indices or a HomotopyClass.
    ``x`` may be a single point or an array of points with trailing axis dim.
    """
    pts = np.array(x, dtype=float)
    scalar_input = m.dim == 1 and pts.ndim == 0
    if scalar_input:
        pts = pts.reshape(1)
    if hasattr(word, "exponents"):
        word = m.presentation.word_of(_as_exps(m, word))
    for letter in reversed(tuple(word)):
        letter = int(letter)
        idx = abs(letter) - 1
        if letter == 0 or idx >= m.presentation.rank:
            raise InvalidWord(f"generator index {letter} out of range for {m.label()}")
        pts = m.deck_generators[idx].apply(pts, 1 if letter > 0 else -1)
    return pts[0] if scalar_input else pts


def reduce_points(m: Manifold, p) -> tuple[np.ndarray, np.ndarray]:
    """Map cover points into the fundamental domain.

    Returns ``(q, exps)`` with ``p = deck(exps) q``; the class is the reduced
    word of face crossings of any cover path from the domain to ``p``.
    Non-periodic axes are left untouched.
    """
    pts = np.array(p, dtype=float)
    single = pts.ndim == 1 and m.dim > 1 or pts.ndim == 0
    pts = np.atleast_1d(pts)
    if m.dim == 1:
        pts = pts.reshape(-1, 1)
    else:
        pts = pts.reshape(-1, m.dim)
    exps = np.zeros((pts.shape[0], m.presentation.rank), dtype=np.int64)
    pres = m.presentation
    if pres.rank and not m.contains_periodic(pts):
        lo = np.asarray(m.lower)
        hi = np.asarray(m.upper)
        ext = hi - lo
        for _ in range(64):
            moved = False
            for rule in m.edge_rules:
                ax, g = rule.axis, rule.generator
                gen = m.deck_generators[g]
                coord = pts[:, ax]
                if not rule.reversing:
                    # Pure translations: jump whole periods at once.
                    k = np.floor((coord - lo[ax]) / ext[ax]).astype(np.int64)
                    k = np.where((coord - k * ext[ax]) >= hi[ax], k + 1, k)
                    k = np.where((coord - k * ext[ax]) < lo[ax], k - 1, k)
                    nz = k != 0
                    if not nz.any():
                        continue
                    moved = True
                    shift = np.zeros(m.dim)
                    shift[ax] = ext[ax]
                    pts[nz] -= k[nz, None] * shift
                    step = np.zeros((nz.sum(), pres.rank), dtype=np.int64)
                    step[:, g] = k[nz]
                    cur = tuple(exps[nz, i] for i in range(pres.rank))
                    new = pres.multiply(cur, tuple(step[:, i] for i in range(pres.rank)))
                    for i in range(pres.rank):
                        exps[nz, i] = new[i]
                    continue
                up = coord >= hi[ax]
                down = coord < lo[ax]
                for mask, power in ((up, 1), (down, -1)):
                    if not mask.any():
                        continue
                    moved = True
                    pts[mask] = gen.apply(pts[mask], -power)
                    step = np.zeros((mask.sum(), pres.rank), dtype=np.int64)
                    step[:, g] = power
                    cur = tuple(exps[mask, i] for i in range(pres.rank))
                    new = pres.multiply(cur, tuple(step[:, i] for i in range(pres.rank)))
                    for i in range(pres.rank):
                        exps[mask, i] = new[i]
            if not moved:
                break
    if single:
        return pts[0], exps[0]
    return pts, exps


@dataclass(frozen=True)
class Grid:
    """Uniform half-open lattice on the fundamental domain (C-order points)."""

    manifold: Manifold
    shape: tuple[int, ...]
    h: tuple[float, ...]
    axes: tuple[np.ndarray, ...] = field(repr=False, compare=False)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def dim(self) -> int:
        return self.manifold.dim

    @property
    def weight(self) -> float:
        return float(np.prod(self.h))

    @property
    def weights(self) -> np.ndarray:
        return np.full(self.size, self.weight)

    @property
    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([c.ravel() for c in mesh], axis=-1)

    def coordinate_env(self) -> dict[str, np.ndarray]:
        pts = self.points
        return {name: pts[:, i] for i, name in enumerate(self.manifold.coordinates)}

    def multi_index(self) -> np.ndarray:
        mesh = np.meshgrid(*[np.arange(n) for n in self.shape], indexing="ij")
        return np.stack([c.ravel() for c in mesh], axis=-1)

    def flat(self, idx: np.ndarray) -> np.ndarray:
        return np.ravel_multi_index(tuple(idx[..., i] for i in range(self.dim)), self.shape)

    def refined(self, factor: int = 2) -> "Grid":
        return make_grid(self.manifold, tuple(n * factor for n in self.shape))

    def _index_generators(self):
        """Deck generators acting on integer lattice indices."""
        m = self.manifold
        out = []
        for gen in m.deck_generators:
            shifts = []
            for ax in range(m.dim):
                s, t, o, h = gen.signs[ax], gen.shifts[ax], m.lower[ax], self.h[ax]
                val = (s * o + t - o) / h
                k = int(round(val))
                if abs(val - k) > 1e-9:
                    raise InvalidParam("deck generator does not preserve the lattice")
                shifts.append(k)
            out.append((np.asarray(gen.signs, dtype=np.int64), np.asarray(shifts, dtype=np.int64)))
        return out

    def resolve(self, idx) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Resolve integer cover-lattice indices to domain points.

        Returns ``(flat, exps, valid)``: lattice point ``idx`` equals the deck
        image ``deck(exps)`` of the domain point ``flat``.  Indices outside a
        non-periodic axis are invalid (Dirichlet truncation).
        """
        m = self.manifold
        pres = m.presentation
        idx = np.array(idx, dtype=np.int64).reshape(-1, self.dim)
        exps = np.zeros((idx.shape[0], pres.rank), dtype=np.int64)
        n = np.asarray(self.shape, dtype=np.int64)
        gens = self._index_generators()
        for _ in range(64):
            moved = False
            for rule in m.edge_rules:
                ax, g = rule.axis, rule.generator
                signs, shifts = gens[g]
                for mask, power in ((idx[:, ax] >= n[ax], 1), (idx[:, ax] < 0, -1)):
                    if not mask.any():
                        continue
                    moved = True
                    if power == 1:
                        idx[mask] = (idx[mask] - shifts) * signs
                    else:
                        idx[mask] = idx[mask] * signs + shifts
                    step = np.zeros((mask.sum(), pres.rank), dtype=np.int64)
                    step[:, g] = power
                    cur = tuple(exps[mask, i] for i in range(pres.rank))
                    new = pres.multiply(cur, tuple(step[:, i] for i in range(pres.rank)))
                    for i in range(pres.rank):
                        exps[mask, i] = new[i]
            if not moved:
                break
        valid = np.all((idx >= 0) & (idx < n), axis=1)
        flat = np.zeros(idx.shape[0], dtype=np.int64)
        flat[valid] = self.flat(idx[valid])
        return flat, exps, valid

    def shifted(self, offset: Sequence[int]):
        """Neighbour of every grid point at integer ``offset`` (see ``resolve``)."""
        return self.resolve(self.multi_index() + np.asarray(offset, dtype=np.int64))

    def box_mask(self, box) -> np.ndarray:
        pts = self.points
        mask = np.ones(self.size, dtype=bool)
        for ax, (lo, hi) in enumerate(box):
            mask &= (pts[:, ax] > lo) & (pts[:, ax] < hi)
        return mask


def make_grid(m: Manifold, n) -> Grid:
    shape = (int(n),) * m.dim if np.ndim(n) == 0 else tuple(int(k) for k in n)
    if len(shape) != m.dim:
        raise InvalidParam(f"{m.label()} needs {m.dim} grid sizes, got {shape}")
    if any(k < 8 for k in shape):
        raise InvalidParam(f"grid sizes must be >= 8, got {shape}")
    h = tuple(e / k for e, k in zip(m.extent, shape))
    axes = tuple(lo + hh * np.arange(k) for lo, hh, k in zip(m.lower, h, shape))
    return Grid(m, shape, h, axes)
