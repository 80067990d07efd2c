import numpy as np
import pytest

from ddebranch.geometry import JordanCurve, classify_pair, nesting_check, winding_inside


def circle(radius, center=(0.0, 0.0), n=128):
    t = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    return JordanCurve(np.column_stack([center[0] + radius * np.cos(t), center[1] + radius * np.sin(t)]))


def test_concentric_circles_disjoint():
    reports = nesting_check([circle(1.0), circle(2.0)])
    assert reports[0].status == "disjoint"
    assert reports[0].min_distance == pytest.approx(1.0, abs=1e-2)


def test_separate_circles_disjoint():
    rep = classify_pair(circle(1.0), circle(1.0, center=(5.0, 0.0)))
    assert rep.status == "disjoint"


def test_crossing_circles():
    rep = classify_pair(circle(1.0), circle(1.0, center=(1.0, 0.0)))
    assert rep.status == "crossing"


def test_identical_curves():
    rep = classify_pair(circle(1.0), circle(1.0))
    assert rep.status == "identical"


def test_tangent_circles():
    rep = classify_pair(circle(1.0), circle(1.0, center=(2.0 + 1e-9, 0.0)), tol=1e-5)
    assert rep.status == "tangent"


def test_winding_number():
    c = circle(1.0)
    inside = winding_inside(np.array([[0.0, 0.0], [0.5, 0.5], [2.0, 0.0]]), c)
    assert inside.tolist() == [True, True, False]


def test_nonconvex_winding():
    # a C-shape: the notch is outside despite bbox containment
    t = np.linspace(0.25, 2 * np.pi - 0.25, 100)
    outer = np.column_stack([2 * np.cos(t), 2 * np.sin(t)])
    inner = np.column_stack([np.cos(t), np.sin(t)])[::-1]
    c = JordanCurve(np.vstack([outer, inner]))
    assert not winding_inside(np.array([[0.0, 0.0]]), c)[0]
    assert winding_inside(np.array([[0.0, 1.5]]), c)[0]


def _figure_eight():
    # offset so the double point falls inside segments, not on a vertex
    t = np.linspace(0, 2 * np.pi, 64, endpoint=False) + 0.05
    return JordanCurve(np.column_stack([np.sin(2 * t), np.sin(t)]))


def test_self_intersection_detection():
    assert not _figure_eight().is_simple()
    assert circle(1.0).is_simple()


def test_nesting_check_rejects_nonsimple():
    with pytest.raises(ValueError, match="not simple"):
        nesting_check([_figure_eight(), circle(3.0)])


def test_pairwise_report_count():
    curves = [circle(r) for r in (1.0, 1.5, 2.0, 2.5)]
    reports = nesting_check(curves)
    assert len(reports) == 6
    assert all(r.status == "disjoint" for r in reports)
