import numpy as np

from chancert.bounds import (NPA_SLACK, canonical, certificate_value, moment_matrix_spec, npa_margins, npa_max,
                             npa_membership)
from chancert.constructions import TSIRELSON_WEIGHT, cross_section_point
from chancert.correlations import BellFunctional, chsh, identity_box, max_bell_local, max_bell_ns, pr_box
from chancert.protocols import random_strategy


def test_canonical_words():
    assert canonical((("A", 0), ("A", 0))) == ((0,), ())
    assert canonical((("A", 1), ("B", 0), ("A", 0))) == ((0, 1), (0,))
    assert canonical((("A", 0), ("A", 1))) == canonical((("A", 1), ("A", 0)))


def test_moment_matrix_sizes():
    assert moment_matrix_spec(2, 2, 1).size == 5
    assert moment_matrix_spec(2, 2, 2).size == 13


def test_npa_chsh():
    for level in (1, 2):
        assert abs(npa_max(chsh(), level) - 2 * np.sqrt(2)) < 1e-6


def test_npa_between_local_and_ns(rng):
    for _ in range(5):
        g = BellFunctional(rng.standard_normal((2, 2, 2, 2)))
        q = npa_max(g, 2)
        assert max_bell_local(g) - 1e-6 <= q <= max_bell_ns(g) + 1e-6


def test_quantum_points_are_inside():
    for seed in range(5):
        p = random_strategy((2, 2), 2, 2, seed).distribution()
        for level in (1, 2):
            assert npa_membership(p, level).inside


def test_memberships():
    assert npa_membership(identity_box(), 2).inside
    rep = npa_membership(pr_box(), 1)
    assert rep.verdict == "outside"
    spec = moment_matrix_spec(2, 2, 1)
    assert certificate_value(spec, rep.witness, pr_box().table)[0] < 0
    edge = cross_section_point(TSIRELSON_WEIGHT, 1 - TSIRELSON_WEIGHT)
    for level in (1, 2):
        rep = npa_membership(edge, level)
        assert rep.inside and abs(rep.value) < 1e-5


def test_margins_batch_agrees_with_single():
    tabs = np.array([cross_section_point(s, 0.1) for s in np.linspace(0, 0.9, 7)])
    m, status, _ = npa_margins(tabs, 1)
    assert np.all(status == "optimal")
    for k, t in enumerate(tabs):
        assert abs(npa_margins(t, 1)[0][0] - m[k]) < 1e-7


def test_signaling_input_is_outside():
    t = np.zeros((2, 2, 2, 2))
    t[0, 0, 0, :] = 1
    t[1, 1, 1, 0] = 1
    t[0, 1, 1, 1] = 1
    rep = npa_membership(t, 1)
    assert rep.verdict == "outside" and rep.residuals["signaling"] > 0.4
    assert NPA_SLACK < 1e-5
