import numpy as np
import pytest

from chancert.bounds import NPA_SLACK, npa_margins
from chancert.constructions import TSIRELSON_WEIGHT
from chancert.correlations import is_local
from chancert.regions import classify_cross_section, edge_boundary, grid, nesting_violations, tables_for


def test_grid_order():
    s, t = grid(3)
    assert list(s) == [0, 0, 0, 0.5, 0.5, 0.5, 1, 1, 1]
    assert list(t) == [0, 0.5, 1] * 3
    with pytest.raises(ValueError):
        grid(1)


def test_matches_direct_solves():
    # every valid point solved on its own, without reusing certificates
    n = 21
    res = classify_cross_section(n)
    s, t = res["s"], res["t"]
    valid = s + t <= 1 + 1e-12
    tabs = tables_for(s[valid], t[valid])
    loc = np.array([is_local(tb).inside for tb in tabs])
    assert np.array_equal(loc, res["local"][valid])
    for level in (1, 2):
        m, status, _ = npa_margins(tabs, level)
        assert np.all(status == "optimal")
        assert np.array_equal(m >= -NPA_SLACK, res[f"npa{level}"][valid])
    assert np.all(res["region"][~valid] == "signaling-excluded")
    assert len(nesting_violations(res)) == 0


def test_anchor_points():
    res = classify_cross_section(11)
    region = dict(zip(zip(np.round(res["s"], 6), np.round(res["t"], 6)), res["region"]))
    assert region[(0.0, 0.0)] == "local"
    assert region[(1.0, 0.0)] == "ns"
    assert region[(0.0, 1.0)] == "ns"
    assert region[(0.5, 0.6)] == "signaling-excluded"


def test_edge_boundaries():
    # CHSH on the R-S edge is 8w - 4; it reaches 2 at w = 3/4 and 2 sqrt 2 at the Tsirelson weight
    assert abs(edge_boundary("local") - 0.75) < 2e-6
    assert abs(edge_boundary("npa1") - TSIRELSON_WEIGHT) < 2e-6
    assert abs(edge_boundary("npa2") - TSIRELSON_WEIGHT) < 2e-6
    with pytest.raises(ValueError):
        edge_boundary("ns")
