import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lrquant.errors import InvalidParam, InvalidWord
from lrquant.manifolds import ManifoldSpec, deck_action, make_grid, make_manifold, reduce_points

ALL = [ManifoldSpec.line(10.0), ManifoldSpec.circle(2 * math.pi), ManifoldSpec.torus(1.0, 1.0),
       ManifoldSpec.annulus(2.0, 1.0), ManifoldSpec.klein_bottle(1.0, 1.0)]


def test_presentations():
    c = make_manifold(ManifoldSpec.circle())
    assert c.presentation.generators == ("a",) and c.presentation.relations == ()
    assert len(c.edge_rules) == 1 and not c.edge_rules[0].reversing
    t = make_manifold(ManifoldSpec.torus(1, 1))
    assert t.presentation.relations == ((1, 2, -1, -2),)
    k = make_manifold(ManifoldSpec.klein_bottle(1, 1))
    assert k.presentation.relations == ((2, 1, -2, 1),)
    assert k.rule_for_axis(1).reversing
    assert make_manifold(ManifoldSpec.line(3)).presentation.rank == 0


@pytest.mark.parametrize("kind,params", [("Circle", {"L": 0.0}), ("Torus", {"L1": 1, "L2": -1}),
                                         ("Line", {"X": float("inf")})])
def test_rejects_bad_parameters(kind, params):
    with pytest.raises(InvalidParam):
        make_manifold(ManifoldSpec.of(kind, **params))


def test_grid_examples():
    g = make_grid(make_manifold(ManifoldSpec.circle()), 8)
    np.testing.assert_allclose(g.points[:, 0], np.arange(8) * math.pi / 4)
    assert g.h[0] == pytest.approx(math.pi / 4)
    assert g.weights.sum() == pytest.approx(2 * math.pi, rel=1e-12)
    t = make_grid(make_manifold(ManifoldSpec.torus(1, 1)), (8, 8))
    assert t.size == 64 and t.weight == pytest.approx(1 / 64)
    line = make_grid(make_manifold(ManifoldSpec.line(10)), 16)
    assert line.points[0, 0] == -10 and line.points[-1, 0] < 10


@pytest.mark.parametrize("spec", ALL, ids=lambda s: s.kind)
def test_total_weight_is_volume(spec):
    m = make_manifold(spec)
    g = make_grid(m, (24,) * m.dim)
    assert g.weights.sum() == pytest.approx(m.volume, rel=1e-12)


def test_small_grid_rejected():
    with pytest.raises(InvalidParam):
        make_grid(make_manifold(ManifoldSpec.circle()), 4)


def test_deck_examples():
    c = make_manifold(ManifoldSpec.circle())
    assert deck_action(c, [1], 0.5) == pytest.approx(0.5 + 2 * math.pi)
    t = make_manifold(ManifoldSpec.torus(1, 1))
    np.testing.assert_allclose(deck_action(t, [1, -2], [0.2, 0.3]), [1.2, -0.7])
    k = make_manifold(ManifoldSpec.klein_bottle(1, 1))
    np.testing.assert_allclose(deck_action(k, [2, 2], [0.2, 0.3]), [0.2, 2.3])
    with pytest.raises(InvalidWord):
        deck_action(c, [2], 0.5)


@pytest.mark.parametrize("spec", ALL[1:], ids=lambda s: s.kind)
def test_relations_act_trivially(spec):
    m = make_manifold(spec)
    x = np.random.default_rng(1).uniform(-3, 3, (100, m.dim))
    for rel in m.presentation.relations:
        np.testing.assert_allclose(deck_action(m, rel, x), x, atol=1e-12)


words = st.lists(st.sampled_from([1, -1, 2, -2]), max_size=4)


@settings(max_examples=80, deadline=None)
@given(words, words)
def test_klein_deck_is_a_group_action(w1, w2):
    m = make_manifold(ManifoldSpec.klein_bottle(1.3, 0.7))
    x = np.array([[0.31, 0.52], [1.1, -0.4]])
    np.testing.assert_allclose(deck_action(m, list(w1) + list(w2), x),
                               deck_action(m, w1, deck_action(m, w2, x)), atol=1e-12)
    # Normal forms act exactly like the words they reduce.
    c = m.presentation.normal_form(list(w1) + list(w2))
    np.testing.assert_allclose(deck_action(m, m.presentation.word_of(c), x),
                               deck_action(m, list(w1) + list(w2), x), atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(words, st.floats(0.001, 0.999), st.floats(0.001, 0.999))
def test_reduce_inverts_deck(word, u, v):
    m = make_manifold(ManifoldSpec.klein_bottle(1.3, 0.7))
    q = np.array([u * 1.3, v * 0.7])
    p = deck_action(m, word, q)
    q2, exps = reduce_points(m, p)
    np.testing.assert_allclose(q2.ravel(), q, atol=1e-12)
    assert tuple(np.ravel(exps)) == m.presentation.normal_form(word)


def test_grid_resolve_klein_wrap():
    m = make_manifold(ManifoldSpec.klein_bottle(1.0, 1.0))
    g = make_grid(m, (8, 8))
    flat, exps, valid = g.resolve([[2, 8]])
    # Lattice point (2, 8) is b applied to (8 - 2, 0) = (6, 0) in index units.
    assert valid[0] and flat[0] == g.flat(np.array([6, 0])) and tuple(exps[0]) == (0, 1)


def test_grid_resolve_line_truncates():
    g = make_grid(make_manifold(ManifoldSpec.line(1.0)), 8)
    _, _, valid = g.resolve([[-1], [8], [3]])
    assert list(valid) == [False, False, True]
