import numpy as np
import pytest

from formheat.errors import DegenerateGeometryError, IrregularPointError
from formheat.geometry import SurfaceChart, chart_metric, rotation, transition


def random_graph_polyline(rng, n_seg=6, lip=0.6):
    """Polyline that is a Lipschitz graph in a random rigid frame."""
    dx = rng.uniform(0.3, 1.0, n_seg)
    xs = np.concatenate([[0.0], np.cumsum(dx)])
    slopes = rng.uniform(-lip, lip, n_seg)
    hs = np.concatenate([[0.0], np.cumsum(slopes * dx)])
    pts = np.stack([xs, hs], axis=1)
    q = rotation(rng.uniform(0.0, 2 * np.pi))
    return pts @ q.T + rng.normal(size=2), q


def chart_pair(rng, beta_max=0.45):
    """Two charts of the same polyline over different frames."""
    pts, q = random_graph_polyline(rng)
    chart_a = SurfaceChart.from_polyline(pts, q=q)
    beta = rng.uniform(-beta_max, beta_max)
    chart_b = SurfaceChart.from_polyline(pts, q=q @ rotation(beta),
                                         shift=rng.normal(size=2))
    return pts, chart_a, chart_b


def test_metric_flat():
    chart = SurfaceChart(np.eye(2), (0, 0), [0.0, 1.0], [0.0, 0.0])
    g, ginv, sqrtg = chart_metric(chart, 0.5)
    assert (g, ginv, sqrtg) == (1.0, 1.0, 1.0)


def test_metric_diagonal_line():
    chart = SurfaceChart(np.eye(2), (0, 0), [-1.0, 1.0], [-1.0, 1.0])
    g, ginv, sqrtg = chart_metric(chart, 0.3)
    assert g == pytest.approx(2.0)
    assert ginv == pytest.approx(0.5)
    assert sqrtg == pytest.approx(np.sqrt(2.0))


def test_metric_slope_three_piece():
    chart = SurfaceChart(np.eye(2), (0, 0), [0.0, 1.0, 2.0], [0.0, 0.0, 3.0])
    g, _, _ = chart_metric(chart, 1.5)
    assert g == pytest.approx(10.0)


def test_irregular_point_raises():
    chart = SurfaceChart(np.eye(2), (0, 0), [0.0, 1.0, 2.0], [0.0, 0.5, 0.0])
    with pytest.raises(IrregularPointError):
        chart_metric(chart, 1.0)
    # a breakpoint with equal slopes on both sides stays regular
    smooth = SurfaceChart(np.eye(2), (0, 0), [0.0, 1.0, 2.0], [0.0, 0.5, 1.0])
    g, _, _ = chart_metric(smooth, 1.0)
    assert g == pytest.approx(1.25)


def test_graph_property_and_injectivity():
    rng = np.random.default_rng(0)
    for _ in range(10):
        pts, q = random_graph_polyline(rng)
        chart = SurfaceChart.from_polyline(pts, q=q)
        lo, hi = chart.interval
        ys = rng.uniform(lo, hi, size=12)
        for y1 in ys[:6]:
            for y2 in ys[6:]:
                gap = np.linalg.norm(chart.g(y1) - chart.g(y2))
                assert gap >= abs(y1 - y2) - 1e-12


def test_non_graph_polyline_rejected():
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, 1.0]])  # folds back
    with pytest.raises(DegenerateGeometryError, match="not a graph"):
        SurfaceChart.from_polyline(pts)


def test_metric_lower_bound_random():
    rng = np.random.default_rng(1)
    for _ in range(5):
        pts, q = random_graph_polyline(rng)
        chart = SurfaceChart.from_polyline(pts, q=q)
        lo, hi = chart.interval
        for y in rng.uniform(lo, hi, 50):
            if not chart.is_regular(y):
                continue
            g, _, _ = chart.metric(y)
            assert g >= 1.0 - 1e-14


def test_transition_map_identity():
    # metric tensors of chart pairs agree through the transition map
    rng = np.random.default_rng(2)
    checked = 0
    while checked < 100:
        pts, chart_a, chart_b = chart_pair(rng)
        lo, hi = chart_a.interval
        y_a = rng.uniform(lo, hi)
        if not chart_a.is_regular(y_a):
            continue
        y_b, dphi = transition(chart_a, chart_b, y_a)
        if not chart_b.is_regular(y_b):
            continue
        g_a, _, _ = chart_a.metric(y_a)
        g_b, _, _ = chart_b.metric(y_b)
        assert abs(g_a - dphi * g_b * dphi) <= 1e-10 * abs(g_a)
        checked += 1


def test_transition_derivative_inverse():
    rng = np.random.default_rng(3)
    pts, chart_a, chart_b = chart_pair(rng)
    lo, hi = chart_a.interval
    y_a = 0.5 * (lo + hi)
    if chart_a.is_regular(y_a):
        y_b, dphi = transition(chart_a, chart_b, y_a)
        _, dphi_back = transition(chart_b, chart_a, y_b)
        assert dphi * dphi_back == pytest.approx(1.0, rel=1e-12)


def test_chart_independent_surface_gradient():
    # the same P1 data produces the same surface gradient in both charts
    rng = np.random.default_rng(4)
    for _ in range(20):
        pts, chart_a, chart_b = chart_pair(rng)
        values = rng.standard_normal(len(pts))
        lo, hi = chart_a.interval
        for _ in range(10):
            y_a = rng.uniform(lo, hi)
            if not chart_a.is_regular(y_a):
                continue
            y_b, _ = transition(chart_a, chart_b, y_a)
            if not chart_b.is_regular(y_b):
                continue
            va = chart_a.p1_surface_gradient(values, y_a)
            vb = chart_b.p1_surface_gradient(values, y_b)
            scale = max(np.linalg.norm(va), 1e-30)
            assert np.linalg.norm(va - vb) <= 1e-10 * scale
