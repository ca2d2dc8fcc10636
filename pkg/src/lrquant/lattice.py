"""Sparse operators on grids, optionally twisted by a representation of pi_1.

A state is an array of shape (grid.size * k,) with the fiber index fastest.
Twisting follows one rule everywhere: a lattice neighbour that lies in the
deck tile ``deck(c) F`` contributes its domain value multiplied by ``R(c)``,
i.e. wave functions on the cover satisfy ``psi(deck(c) p) = R(c) psi(p)``.
Without a representation the same construction gives the untwisted operator
(with Dirichlet truncation on non-periodic axes).
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.linalg import schur

from .errors import InvalidParam
from .homotopy import Pi1Representation, rep_matrices
from .manifolds import Grid

# Central first-derivative weights by order: {offset: weight * h}.
FIRST_DERIVATIVE = {
    2: {1: 0.5, -1: -0.5},
    4: {1: 2.0 / 3.0, -1: -2.0 / 3.0, 2: -1.0 / 12.0, -2: 1.0 / 12.0},
}
# Compact second-derivative weights by order: {offset: weight * h^2}.
SECOND_DERIVATIVE = {
    2: {0: -2.0, 1: 1.0, -1: 1.0},
    4: {0: -2.5, 1: 4.0 / 3.0, -1: 4.0 / 3.0, 2: -1.0 / 12.0, -2: -1.0 / 12.0},
}


def fiber_dim(rep: Pi1Representation | None) -> int:
    return 1 if rep is None else rep.fiber_dim


def assemble(grid: Grid, rep, rows, cols, coeffs, exps) -> sp.csr_matrix:
    """Sum of blocks coeff * R(exps) placed at (row, col) point pairs."""
    k = fiber_dim(rep)
    n = grid.size * k
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    coeffs = np.asarray(coeffs)
    if k == 1:
        vals = coeffs.astype(complex)
        if rep is not None and len(rows):
            vals = vals * rep_matrices(rep, exps)[:, 0, 0]
        return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    mats = rep_matrices(rep, exps) * coeffs[:, None, None]
    a, b = np.meshgrid(np.arange(k), np.arange(k), indexing="ij")
    r = (rows[:, None, None] * k + a[None]).ravel()
    c = (cols[:, None, None] * k + b[None]).ravel()
    return sp.csr_matrix((mats.ravel(), (r, c)), shape=(n, n))


def stencil_matrix(grid: Grid, axis: int, weights: dict[int, float], scale: float,
                   rep: Pi1Representation | None = None) -> sp.csr_matrix:
    rows, cols, coeffs, exps = [], [], [], []
    src = np.arange(grid.size)
    for off, w in weights.items():
        offset = np.zeros(grid.dim, dtype=np.int64)
        offset[axis] = off
        tgt, e, valid = grid.shifted(offset)
        rows.append(src[valid])
        cols.append(tgt[valid])
        coeffs.append(np.full(valid.sum(), w * scale))
        exps.append(e[valid])
    return assemble(grid, rep, np.concatenate(rows), np.concatenate(cols),
                    np.concatenate(coeffs), np.concatenate(exps))


def derivative(grid: Grid, axis: int, order=2, rep: Pi1Representation | None = None):
    """Anti-hermitian first-derivative matrix along ``axis``.

    ``order`` is 2 or 4 (central differences) or ``"fourier"`` (exact on
    band-limited twisted plane waves; translation-periodic axes only).
    """
    if order == "fourier":
        return _fourier_derivative(grid, axis, rep)
    if order not in FIRST_DERIVATIVE:
        raise InvalidParam(f"stencil order must be 2, 4 or 'fourier', got {order!r}")
    return stencil_matrix(grid, axis, FIRST_DERIVATIVE[order], 1.0 / grid.h[axis], rep)


def second_derivative(grid: Grid, axis: int, order: int = 2, rep: Pi1Representation | None = None):
    if order not in SECOND_DERIVATIVE:
        raise InvalidParam(f"Laplacian order must be 2 or 4, got {order!r}")
    return stencil_matrix(grid, axis, SECOND_DERIVATIVE[order], 1.0 / grid.h[axis] ** 2, rep)


def kinetic(grid: Grid, order: int = 2, rep: Pi1Representation | None = None) -> sp.csr_matrix:
    """-1/2 sum_j d_j^2 with compact stencils (positive semidefinite)."""
    out = None
    for ax in range(grid.dim):
        term = -0.5 * second_derivative(grid, ax, order, rep)
        out = term if out is None else out + term
    return out.tocsr()


def _fourier_derivative(grid: Grid, axis: int, rep) -> sp.csr_matrix:
    m = grid.manifold
    rule = m.rule_for_axis(axis)
    if rule is None or rule.reversing or any(
            s < 0 for s in m.deck_generators[rule.generator].signs):
        raise InvalidParam("Fourier derivative needs a translation-periodic axis")
    n = grid.shape[axis]
    L = m.extent[axis]
    k = fiber_dim(rep)
    wrap = np.eye(1) if rep is None else rep.matrices[rule.generator]
    # Diagonalize the wrap matrix: each eigen-direction is a scalar twisted circle.
    # Complex Schur form of a unitary matrix is diagonal with a unitary basis.
    T, Q = schur(np.asarray(wrap, dtype=complex), output="complex")
    phases = np.diag(T)
    x = grid.axes[axis] - m.lower[axis]
    freq = np.fft.fftfreq(n, d=1.0 / n)
    D1 = np.zeros((n, k, n, k), dtype=complex)
    for r in range(k):
        theta = np.angle(phases[r])
        kappa = (freq + theta / (2 * np.pi)) * (2 * np.pi / L)
        F = np.exp(1j * np.outer(x, kappa)) / np.sqrt(n)
        Dr = F @ np.diag(1j * kappa) @ F.conj().T
        proj = np.outer(Q[:, r], Q[:, r].conj())
        D1 += Dr[:, None, :, None] * proj[None, :, None, :]
    # Embed along ``axis`` of the C-ordered grid with identity on other axes.
    others = [grid.shape[a] for a in range(grid.dim)]
    idx = np.arange(grid.size).reshape(others)
    moved = np.moveaxis(idx, axis, 0).reshape(n, -1)  # (n, rest)
    i_pos, a_pos, j_pos, b_pos = np.nonzero(np.abs(D1) > 0)
    vals = D1[i_pos, a_pos, j_pos, b_pos]
    rest = moved.shape[1]
    rows = (moved[i_pos, :] * k + a_pos[:, None]).ravel()
    cols = (moved[j_pos, :] * k + b_pos[:, None]).ravel()
    data = np.repeat(vals, rest)
    size = grid.size * k
    return sp.csr_matrix((data, (rows, cols)), shape=(size, size))


def cubic_weights(t: np.ndarray) -> np.ndarray:
    """Lagrange weights for nodes -1, 0, 1, 2 at fractional position t."""
    return np.stack([
        -t * (t - 1) * (t - 2) / 6.0,
        (t + 1) * (t - 1) * (t - 2) / 2.0,
        -(t + 1) * t * (t - 2) / 2.0,
        (t + 1) * t * (t - 1) / 6.0,
    ], axis=-1)


def interpolation_matrix(grid: Grid, q: np.ndarray, rep=None, row_blocks=None) -> sp.csr_matrix:
    """Rows evaluate a lattice state at domain points ``q`` (tensor cubic).

    ``row_blocks`` optionally left-multiplies each row by a k x k block
    (shape (M, k, k)) or scalar (shape (M,)).
    """
    m = grid.manifold
    q = np.asarray(q, dtype=float).reshape(-1, m.dim)
    M = len(q)
    base, frac = [], []
    for ax in range(m.dim):
        u = (q[:, ax] - m.lower[ax]) / grid.h[ax]
        i0 = np.floor(u).astype(np.int64)
        t = u - i0
        # Snap round-off so grid-aligned targets give exact unit weights.
        near = np.abs(t - np.round(t)) < 1e-12
        i0 = np.where(near & (np.round(t) == 1), i0 + 1, i0)
        t = np.where(near, 0.0, t)
        base.append(i0)
        frac.append(cubic_weights(t))
    rows, cols, coeffs, exps = [], [], [], []
    offsets = np.stack(np.meshgrid(*[np.arange(-1, 3)] * m.dim, indexing="ij"), -1).reshape(-1, m.dim)
    for off in offsets:
        idx = np.stack([base[ax] + off[ax] for ax in range(m.dim)], axis=-1)
        w = np.ones(M)
        for ax in range(m.dim):
            w = w * frac[ax][:, off[ax] + 1]
        flat, e, valid = grid.resolve(idx)
        keep = valid & (w != 0)
        rows.append(np.arange(M)[keep])
        cols.append(flat[keep])
        coeffs.append(w[keep])
        exps.append(e[keep])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    coeffs = np.concatenate(coeffs)
    exps = np.concatenate(exps)
    k = fiber_dim(rep)
    if row_blocks is not None and np.ndim(row_blocks) == 1:
        coeffs = coeffs * np.asarray(row_blocks)[rows]
        row_blocks = None
    if k == 1:
        vals = coeffs.astype(complex)
        if rep is not None and len(rows):
            vals = vals * rep_matrices(rep, exps)[:, 0, 0]
        if row_blocks is not None:
            vals = vals * np.asarray(row_blocks)[rows, 0, 0]
        return sp.csr_matrix((vals, (rows, cols)), shape=(M, grid.size))
    mats = rep_matrices(rep, exps) * coeffs[:, None, None]
    if row_blocks is not None:
        mats = np.einsum("nab,nbc->nac", np.asarray(row_blocks)[rows], mats)
    a, b = np.meshgrid(np.arange(k), np.arange(k), indexing="ij")
    r = (rows[:, None, None] * k + a[None]).ravel()
    c = (cols[:, None, None] * k + b[None]).ravel()
    return sp.csr_matrix((mats.ravel(), (r, c)), shape=(M * k, grid.size * k))


def interpolation_error_bound(grid: Grid, states: np.ndarray, k: int = 1) -> float:
    """Cubic Lagrange bound 3 h^4 max|f''''| / 128 per axis, with f'''' from 4th differences.

    ``states`` has shape (grid.size * k, m); the bound is the largest over states.
    """
    s = np.asarray(states).reshape(grid.shape + (k, -1))
    bound = 0.0
    for ax in range(grid.dim):
        periodic = grid.manifold.periodic[ax]
        if periodic:
            d4 = (np.roll(s, -2, ax) - 4 * np.roll(s, -1, ax) + 6 * s
                  - 4 * np.roll(s, 1, ax) + np.roll(s, 2, ax))
            # Wrapped differences ignore the twist; only use interior rows.
            sl = [slice(None)] * s.ndim
            sl[ax] = slice(2, -2)
            d4 = d4[tuple(sl)]
        else:
            d4 = np.diff(s, n=4, axis=ax)
        bound += 3.0 / 128.0 * float(np.abs(d4).max(initial=0.0))
    return bound


def smooth_probes(grid: Grid, rep=None, count: int = 16) -> np.ndarray:
    """Orthonormal (in l^2) basis of the ``count`` lowest kinetic modes.

    These band-limited states play the role of the common smooth domain on
    which operator relations are compared.
    """
    K = kinetic(grid, 2, rep)
    n = K.shape[0]
    count = min(count, n - 2)
    if n <= 1024:
        _, vecs = np.linalg.eigh(K.toarray())
        return vecs[:, :count]
    import scipy.sparse.linalg as spla
    _, vecs = spla.eigsh(K.tocsc(), k=count, sigma=-1.0, which="LM")
    Q, _ = np.linalg.qr(vecs)
    return Q
