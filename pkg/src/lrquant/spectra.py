"""Free and potential Hamiltonians on twisted spaces, eigen-solves and theta sweeps."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import dsl, lattice
from .errors import InvalidParam, LRQuantError, SolverFailure
from .fields import ScalarField
from .homotopy import Pi1Representation
from .manifolds import Manifold, ManifoldSpec, make_manifold
from .operators import LinOp
from .representations import RepSpace, build_space

DENSE_MAX = 1024
RESIDUAL_TOL = 1e-8
DEGENERACY_GAP = 1e-6


@dataclass(frozen=True, eq=False)
class Hamiltonian(LinOp):
    lower_bound: float | None = None
    space: RepSpace | None = None


def hamiltonian(s: RepSpace, V: ScalarField | str | None = None, order: int = 2) -> Hamiltonian:
    """H = -1/2 Laplacian (compact stencil, twisted wraps) + M_V."""
    H = lattice.kinetic(s.grid, order, s.rep)
    lower = 0.0
    if V is not None:
        vals = potential_samples(s, V)
        H = H + sp.diags(np.repeat(vals, s.fiber_dim).astype(complex))
        lower = float(vals.min())
    return Hamiltonian(H.tocsr(), "hermitian", lower, s)


def potential_samples(s: RepSpace, V) -> np.ndarray:
    """Grid samples of a potential; DSL potentials need no compact support."""
    if isinstance(V, ScalarField):
        return np.asarray(V.sample(s.grid), dtype=float)
    expr = dsl.parse(V) if isinstance(V, str) else V
    extra = expr.variables() - set(s.manifold.coordinates)
    if extra:
        raise InvalidParam(f"potential uses unknown variables {sorted(extra)}")
    vals = dsl.evaluate(expr, s.grid.coordinate_env())
    return np.broadcast_to(np.asarray(vals, dtype=float), (s.grid.size,)).copy()


@dataclass
class SpectrumResult:
    manifold: str
    rep: dict
    n: tuple
    eigenvalues: list[float]
    residuals: list[float]
    degeneracies: list[int]
    solver: str
    error: str | None = None
    params: dict = field(default_factory=dict)


def degeneracy_groups(evals) -> list[int]:
    groups: list[int] = []
    prev = None
    for e in evals:
        if prev is not None and abs(e - prev) <= DEGENERACY_GAP * (1 + abs(e)):
            groups[-1] += 1
        else:
            groups.append(1)
        prev = e
    return groups


def eigenvalues(H: LinOp, k: int) -> SpectrumResult:
    """k smallest eigenpairs with a mandatory residual check."""
    A = H.matrix
    n = A.shape[0]
    if not 1 <= k <= n:
        raise InvalidParam(f"k must be in [1, {n}], got {k}")
    if n <= DENSE_MAX or k >= n - 1:
        evals, vecs = np.linalg.eigh(H.dense())
        evals, vecs = evals[:k], vecs[:, :k]
        solver = "dense-eigh"
    else:
        sigma = getattr(H, "lower_bound", None)
        sigma = (sigma if sigma is not None else 0.0) - 1.0
        evals, vecs = spla.eigsh(sp.csc_matrix(A), k=k, sigma=sigma, which="LM")
        order = np.argsort(evals)
        evals, vecs = evals[order], vecs[:, order]
        solver = "shift-invert-lanczos"
    res = np.linalg.norm(A @ vecs - vecs * evals, axis=0)
    bad = res > RESIDUAL_TOL * (1 + np.abs(evals))
    if bad.any():
        raise SolverFailure(f"eigen-residual {res.max():.3g} above tolerance")
    space = getattr(H, "space", None)
    return SpectrumResult(
        manifold=space.manifold.label() if space else "",
        rep=space.rep.summary() if space else {},
        n=tuple(space.grid.shape) if space else (n,),
        eigenvalues=[float(e) for e in evals],
        residuals=[float(r) for r in res],
        degeneracies=degeneracy_groups(evals),
        solver=solver,
    )


def _sweep_entry(m, R, n, k, V, order) -> SpectrumResult:
    try:
        s = build_space(m, R, n)
        out = eigenvalues(hamiltonian(s, V, order), k)
    except LRQuantError as exc:
        return SpectrumResult(m.label(), R.summary(), tuple(np.atleast_1d(n)), [], [], [], "",
                              error=f"{type(exc).__name__}: {exc}")
    return out


def theta_sweep(m: Manifold, reps: list[Pi1Representation], n, k: int, V=None, order: int = 2,
                workers: int = 1) -> list[SpectrumResult]:
    """One SpectrumResult per representation, in input order; failures are recorded per entry."""
    if workers <= 1:
        return [_sweep_entry(m, R, n, k, V, order) for R in reps]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda R: _sweep_entry(m, R, n, k, V, order), reps))


def flat_torus_levels(extents, angles, k: int, cutoff: int = 12) -> np.ndarray:
    """Lowest k values of 1/2 sum_j ((m_j + theta_j / 2 pi) 2 pi / L_j)^2 (continuum)."""
    ms = np.arange(-cutoff, cutoff + 1)
    grids = np.meshgrid(*[ms] * len(extents), indexing="ij")
    E = np.zeros(grids[0].shape)
    for mj, L, th in zip(grids, extents, angles):
        E += 0.5 * ((mj + th / (2 * np.pi)) * 2 * np.pi / L) ** 2
    return np.sort(E.ravel())[:k]


def klein_double_cover_spectrum(L1: float, L2: float, phi: float, n, k: int, order: int = 2) -> np.ndarray:
    """Spectrum of the Klein 2-dim irrep computed on the torus double cover.

    The irrep R(a) = diag(e^{i phi}, e^{-i phi}), R(b) = swap is induced from
    the character (phi, 0) of the torus subgroup <a, b^2>, so its spectrum is
    that of the twisted torus [0, L1) x [0, 2 L2) on a grid (n1, 2 n2).
    """
    n1, n2 = (n, n) if np.ndim(n) == 0 else n
    torus = make_manifold(ManifoldSpec.torus(L1, 2 * L2))
    R = Pi1Representation.from_angles(torus.presentation, [phi, 0.0])
    s = build_space(torus, R, (n1, 2 * n2))
    return np.asarray(eigenvalues(hamiltonian(s, None, order), k).eigenvalues)


def klein_irrep(p, phi: float) -> Pi1Representation:
    a = np.diag([np.exp(1j * phi), np.exp(-1j * phi)])
    b = np.array([[0, 1], [1, 0]], dtype=complex)
    return Pi1Representation(p, 2, (a, b))
