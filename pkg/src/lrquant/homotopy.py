"""Homotopy classes of flow paths and unitary representations of pi_1."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidRepresentation, InvalidWord, PathTooCoarse
from .manifolds import Manifold, Pi1Presentation, deck_action, reduce_points

UNITARY_TOL = 1e-12


@dataclass(frozen=True)
class HomotopyClass:
    """Normal form a^m b^n, stored as the exponent vector."""

    exponents: tuple[int, ...]

    @property
    def word(self) -> tuple[int, ...]:
        out: list[int] = []
        for i, e in enumerate(self.exponents):
            out.extend([(i + 1) * (1 if e > 0 else -1)] * abs(e))
        return tuple(out)

    def is_trivial(self) -> bool:
        return not any(self.exponents)

    def __str__(self) -> str:
        if self.is_trivial():
            return "e"
        return " ".join(f"{'ab'[i]}^{e}" for i, e in enumerate(self.exponents) if e)


def reduce(p: Pi1Presentation, word: Sequence[int]) -> HomotopyClass:
    """Canonical form of a word (free reduction, abelian collection, Klein normal form)."""
    return HomotopyClass(tuple(int(e) for e in p.normal_form(word)))


def compose(p: Pi1Presentation, c1: HomotopyClass, c2: HomotopyClass) -> HomotopyClass:
    return HomotopyClass(tuple(int(e) for e in p.multiply(c1.exponents, c2.exponents)))


def inverse(p: Pi1Presentation, c: HomotopyClass) -> HomotopyClass:
    return HomotopyClass(tuple(int(e) for e in p.inverse(c.exponents)))


def track_crossings(m: Manifold, cover_path) -> HomotopyClass:
    """Reduced word of identification-face crossings along a sampled cover path."""
    pts = np.asarray(cover_path, dtype=float).reshape(-1, m.dim)
    if len(pts) == 0:
        return HomotopyClass(m.presentation.identity())
    min_edge = min(m.extent)
    steps = np.linalg.norm(np.diff(pts, axis=0), axis=1) if len(pts) > 1 else np.zeros(0)
    if np.any(steps >= min_edge / 4):
        raise PathTooCoarse(
            f"consecutive samples differ by {steps.max():.3g} >= {min_edge / 4:.3g}")
    pres = m.presentation
    _, start = reduce_points(m, pts[:1])
    start = start[0]
    # Frame of the tile containing the start point; crossings are read relative to it.
    cls = pres.identity()
    frame_word = pres.word_of(tuple(int(e) for e in start))
    inv_frame = tuple(-l for l in reversed(frame_word))
    for p in pts[1:]:
        local = deck_action(m, inv_frame, p) if inv_frame else p
        _, step = reduce_points(m, np.reshape(local, (1, m.dim)))
        step = tuple(int(e) for e in step[0])
        if any(step):
            cls = pres.multiply(cls, step)
            # Re-anchor the frame in the tile just entered.
            frame_word = pres.word_of(pres.multiply(tuple(start), cls))
            inv_frame = tuple(-l for l in reversed(frame_word))
    return HomotopyClass(tuple(int(e) for e in cls))


def _check_unitary(U: np.ndarray, what: str, tol: float = UNITARY_TOL) -> None:
    err = np.linalg.norm(U.conj().T @ U - np.eye(U.shape[0]), 2)
    if err > tol:
        raise InvalidRepresentation(f"{what} is not unitary (residual {err:.3g} > {tol:g})")


@dataclass(frozen=True, eq=False)
class Pi1Representation:
    """Unitary k x k matrices, one per generator, satisfying every relator."""

    presentation: Pi1Presentation
    fiber_dim: int
    matrices: tuple[np.ndarray, ...]

    def __post_init__(self):
        p = self.presentation
        if self.fiber_dim < 1:
            raise InvalidRepresentation("fiber_dim must be >= 1")
        if len(self.matrices) != p.rank:
            raise InvalidRepresentation(
                f"expected {p.rank} generator matrices, got {len(self.matrices)}")
        mats = []
        for name, M in zip(p.generators, self.matrices):
            M = np.array(M, dtype=complex)
            if M.shape != (self.fiber_dim, self.fiber_dim):
                raise InvalidRepresentation(f"R({name}) has shape {M.shape}")
            _check_unitary(M, f"R({name})")
            M.setflags(write=False)
            mats.append(M)
        object.__setattr__(self, "matrices", tuple(mats))
        for rel in p.relations:
            err = np.linalg.norm(self.word_matrix(rel) - np.eye(self.fiber_dim), 2)
            if err > UNITARY_TOL:
                raise InvalidRepresentation(
                    f"relation {rel} evaluates to {err:.3g} away from the identity")

    @classmethod
    def trivial(cls, p: Pi1Presentation, k: int = 1) -> "Pi1Representation":
        return cls(p, k, tuple(np.eye(k) for _ in p.generators))

    @classmethod
    def from_angles(cls, p: Pi1Presentation, angles: Sequence[float]) -> "Pi1Representation":
        """One-dimensional representation R(g_j) = exp(i angles[j]).

        Angles are reduced mod 2 pi first so that angles in the same class
        give bit-identical matrices.
        """
        angles = [float(np.mod(t, 2 * np.pi)) for t in angles]
        if len(angles) != p.rank:
            raise InvalidRepresentation(f"expected {p.rank} angles, got {len(angles)}")
        return cls(p, 1, tuple(np.array([[np.exp(1j * t)]]) for t in angles))

    @classmethod
    def from_wire(cls, p: Pi1Presentation, data: dict) -> "Pi1Representation":
        """Decode ``{"angles": [...]}`` or ``{"fiber_dim": k, "matrices": [...]}``.

        Matrices are row-major lists of ``[re, im]`` pairs, one list per generator.
        """
        if "angles" in data:
            return cls.from_angles(p, [float(a) for a in data["angles"]])
        k = int(data["fiber_dim"])
        mats = []
        for g, flat in enumerate(data["matrices"]):
            vals = [complex(float(re), float(im)) for re, im in flat]
            if len(vals) != k * k:
                raise InvalidRepresentation(
                    f"R({p.generators[g]}) needs {k * k} entries, got {len(vals)}")
            mats.append(np.array(vals).reshape(k, k))
        return cls(p, k, tuple(mats))

    def to_wire(self) -> dict:
        return {
            "fiber_dim": self.fiber_dim,
            "matrices": [[[float(z.real), float(z.imag)] for z in M.ravel()] for M in self.matrices],
        }

    def conjugated(self, S: np.ndarray) -> "Pi1Representation":
        S = np.asarray(S, dtype=complex)
        return Pi1Representation(self.presentation, self.fiber_dim,
                                 tuple(S @ M @ S.conj().T for M in self.matrices))

    def direct_sum(self, other: "Pi1Representation") -> "Pi1Representation":
        mats = []
        for A, B in zip(self.matrices, other.matrices):
            M = np.zeros((A.shape[0] + B.shape[0],) * 2, dtype=complex)
            M[: A.shape[0], : A.shape[0]] = A
            M[A.shape[0]:, A.shape[0]:] = B
            mats.append(M)
        return Pi1Representation(self.presentation, self.fiber_dim + other.fiber_dim, tuple(mats))

    def word_matrix(self, word: Iterable[int]) -> np.ndarray:
        out = np.eye(self.fiber_dim, dtype=complex)
        for letter in word:
            M = self.matrices[abs(letter) - 1]
            out = out @ (M if letter > 0 else M.conj().T)
        return out

    def summary(self) -> dict:
        return {"fiber_dim": self.fiber_dim, **self.to_wire()}


def evaluate_rep(R: Pi1Representation, c) -> np.ndarray:
    """R(c) as a product of generator matrices; accepts a class or a raw word."""
    if isinstance(c, HomotopyClass):
        if len(c.exponents) != R.presentation.rank:
            raise InvalidWord("class belongs to a different presentation")
        return _power_product(R, c.exponents)
    return R.word_matrix(c)


def _power_product(R: Pi1Representation, exps: Sequence[int]) -> np.ndarray:
    out = np.eye(R.fiber_dim, dtype=complex)
    for M, e in zip(R.matrices, exps):
        if e:
            base = M if e > 0 else M.conj().T
            out = out @ np.linalg.matrix_power(base, abs(int(e)))
    return out


def rep_matrices(R: Pi1Representation, exps: np.ndarray) -> np.ndarray:
    """Evaluate R on an (M, rank) array of normal forms; returns (M, k, k)."""
    exps = np.asarray(exps, dtype=np.int64).reshape(len(exps), -1)
    out = np.empty((len(exps), R.fiber_dim, R.fiber_dim), dtype=complex)
    if len(exps) == 0:
        return out
    uniq, inv = np.unique(exps, axis=0, return_inverse=True)
    cache = np.stack([_power_product(R, tuple(u)) for u in uniq])
    return cache[np.asarray(inv).ravel()]


def conjugacy_invariants(R: Pi1Representation, classes) -> list[complex]:
    return [complex(np.trace(evaluate_rep(R, c))) for c in classes]


@lru_cache(maxsize=None)
def _probe_exponents(rank: int, radius: int) -> tuple[tuple[int, ...], ...]:
    if rank == 0:
        return ((),)
    grids = np.meshgrid(*[np.arange(-radius, radius + 1)] * rank, indexing="ij")
    return tuple(tuple(int(v) for v in row) for row in np.stack([g.ravel() for g in grids], -1))


def default_probe_classes(p: Pi1Presentation, radius: int = 2) -> list[HomotopyClass]:
    return [HomotopyClass(e) for e in _probe_exponents(p.rank, radius)]
