import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lrquant.errors import InvalidRepresentation, PathTooCoarse
from lrquant.homotopy import (HomotopyClass, Pi1Representation, compose, conjugacy_invariants,
                              evaluate_rep, inverse, reduce, track_crossings)
from lrquant.manifolds import ManifoldSpec, make_manifold
from lrquant.spectra import klein_irrep

CIRCLE = make_manifold(ManifoldSpec.circle())
TORUS = make_manifold(ManifoldSpec.torus(1, 1))
KLEIN = make_manifold(ManifoldSpec.klein_bottle(1, 1))


def segment(a, b, n=200):
    return np.linspace(a, b, n)


def test_track_crossings_examples():
    assert track_crossings(CIRCLE, segment([0.0], [2 * math.pi])).exponents == (1,)
    there_back = np.concatenate([segment([0.0], [math.pi]), segment([math.pi], [0.0])])
    assert track_crossings(CIRCLE, there_back).is_trivial
    assert track_crossings(TORUS, segment([0.0, 0.0], [2.0, -1.0])).exponents == (2, -1)


def test_track_crossings_refinement_invariant():
    path = segment([0.1, 0.2], [2.6, 1.7], 60)
    fine = segment([0.1, 0.2], [2.6, 1.7], 121)
    assert track_crossings(KLEIN, path) == track_crossings(KLEIN, fine)


def test_track_crossings_functorial_on_klein():
    p1 = segment([0.3, 0.4], [0.3, 1.6], 50)   # crosses the reversing edge once
    p2 = segment([0.3, 1.6], [1.8, 1.6], 50)
    whole = track_crossings(KLEIN, np.concatenate([p1, p2[1:]]))
    assert whole == compose(KLEIN.presentation, track_crossings(KLEIN, p1), track_crossings(KLEIN, p2))


def test_coarse_path_rejected():
    with pytest.raises(PathTooCoarse):
        track_crossings(CIRCLE, [[0.0], [3.0]])


def test_reduce_examples():
    assert reduce(CIRCLE.presentation, [1, -1]).is_trivial
    assert reduce(TORUS.presentation, [2, 1, -2]).exponents == (1, 0)
    # b a = a^-1 b from b a b^-1 = a^-1.
    assert reduce(KLEIN.presentation, [2, 1]).exponents == (-1, 1)
    c = reduce(KLEIN.presentation, [2, 1, 1, -2, 2, 2])
    assert compose(KLEIN.presentation, c, inverse(KLEIN.presentation, c)).is_trivial


def test_evaluate_rep_examples():
    R = Pi1Representation.from_angles(CIRCLE.presentation, [0.4])
    np.testing.assert_allclose(evaluate_rep(R, HomotopyClass((0,))), [[1.0]])
    np.testing.assert_allclose(evaluate_rep(R, HomotopyClass((3,))), [[np.exp(1.2j)]])
    K = klein_irrep(KLEIN.presentation, 0.7)
    a, b = K.matrices
    assert np.linalg.norm(b @ a @ b.conj().T @ a - np.eye(2), 2) <= 1e-12
    assert conjugacy_invariants(K, [HomotopyClass((0, 1))])[0] == pytest.approx(0)
    assert conjugacy_invariants(R, [HomotopyClass((1,))])[0] == pytest.approx(np.exp(0.4j))
    triv = Pi1Representation.trivial(KLEIN.presentation, 3)
    assert conjugacy_invariants(triv, [HomotopyClass((2, -1))])[0] == pytest.approx(3)


words = st.lists(st.sampled_from([1, -1, 2, -2]), max_size=5)


@settings(max_examples=80, deadline=None)
@given(words, words)
def test_rep_is_homomorphism(w1, w2):
    K = klein_irrep(KLEIN.presentation, 0.9)
    p = KLEIN.presentation
    c1, c2 = reduce(p, w1), reduce(p, w2)
    lhs = evaluate_rep(K, compose(p, c1, c2))
    np.testing.assert_allclose(lhs, evaluate_rep(K, c1) @ evaluate_rep(K, c2), atol=1e-12)
    np.testing.assert_allclose(evaluate_rep(K, list(w1) + list(w2)), lhs, atol=1e-12)


def test_invalid_representations():
    with pytest.raises(InvalidRepresentation):
        Pi1Representation(CIRCLE.presentation, 1, (np.array([[1.0 + 1e-6]]),))
    # Torus reps must commute.
    A = np.array([[0, 1], [1, 0]], dtype=complex)
    B = np.diag([1, -1]).astype(complex)
    with pytest.raises(InvalidRepresentation):
        Pi1Representation(TORUS.presentation, 2, (A, B))
    # Klein: R(b) R(a) R(b)^-1 must equal R(a)^-1.
    with pytest.raises(InvalidRepresentation):
        Pi1Representation.from_angles(KLEIN.presentation, [0.3, 0.0])
    Pi1Representation.from_angles(KLEIN.presentation, [math.pi, 0.3])


def test_line_admits_only_the_trivial_rep():
    line = make_manifold(ManifoldSpec.line(5.0))
    R = Pi1Representation.from_angles(line.presentation, [])
    assert R.matrices == ()
    with pytest.raises(InvalidRepresentation):
        Pi1Representation.from_angles(line.presentation, [0.5])


def test_wire_round_trip():
    K = klein_irrep(KLEIN.presentation, 0.7)
    back = Pi1Representation.from_wire(KLEIN.presentation, K.to_wire())
    for A, B in zip(K.matrices, back.matrices):
        np.testing.assert_array_equal(A, B)
