import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from confhyp.charts import GraphSurface, LevelSetSurface, MetricSpec, ParametrizedSurface, adapted_chart
from confhyp.energy import sample_geometry
from confhyp.hypersurface import (
    DefiningFunction,
    HypersurfaceFrame,
    gauss_fialkow_trace_residual,
    graph_mean_curvature,
    graph_mean_curvature_check,
    riemannian_identity_suite,
    unit_improve,
)
from confhyp.random_instances import random_chart_metric, random_defining_function, random_graph
from confhyp.jets import Jet


def _frame(metric, surface, base, order=3, orientation=1):
    ch = adapted_chart(metric, surface, base, order, orientation)
    return HypersurfaceFrame(ch.geometry, ch.t())


def test_paraboloid_vertex():
    # f = x^2 + y^2: both principal curvatures 2 in magnitude; the graph formula gives H = -2
    surf = GraphSurface.from_text(3, "x^2 + y^2")
    fr = _frame(MetricSpec.euclidean(3), surf, [0.0, 0.0])
    assert fr.H.value() == pytest.approx(-2.0, abs=1e-13)
    assert graph_mean_curvature(0, 0, 2, 0, 2) == -2.0
    assert fr.K.value() == pytest.approx(0.0, abs=1e-13)


def test_sphere_level_set():
    surf = LevelSetSurface.from_text(3, "x^2 + y^2 + z^2 - 4")
    fr = _frame(MetricSpec.euclidean(3), surf, [0.0, 1.2, 1.6])
    assert fr.H.value() == pytest.approx(0.5, abs=1e-12)
    assert fr.K.value() == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("v", [0.0, 0.7, 2.0, math.pi])
def test_torus_principal_curvatures(v):
    R, r = 2.0, 0.5
    surf = ParametrizedSurface.from_text(
        3, [f"({R} + {r}*cos(v))*cos(u)", f"({R} + {r}*cos(v))*sin(u)", f"{r}*sin(v)"])
    fr = _frame(MetricSpec.euclidean(3), surf, [0.3, v])
    II = np.asarray(fr.II.value())
    k = np.sort(np.abs(np.linalg.eigvals(np.asarray(fr.gbar_inv.value()) @ II).real))
    want = np.sort([1 / r, abs(math.cos(v) / (R + r * math.cos(v)))])
    assert np.allclose(k, want, atol=1e-12)
    gauss = np.linalg.det(np.asarray(fr.gbar_inv.value()) @ II)
    assert gauss == pytest.approx(math.cos(v) / (r * (R + r * math.cos(v))), abs=1e-12)


def test_graph_levelset_parametrized_agree():
    f = "0.3*x^2 - 0.2*x*y + 0.1*y^3"
    base = [0.2, -0.4]
    z0 = 0.3 * 0.04 - 0.2 * 0.2 * -0.4 + 0.1 * (-0.4) ** 3
    m = MetricSpec.euclidean(3)
    reps = [
        sample_geometry(GraphSurface.from_text(3, f), m, base, want=()),
        sample_geometry(LevelSetSurface.from_text(3, f"z - ({f})"), m, base + [z0], want=()),
        sample_geometry(ParametrizedSurface.from_text(3, ["u", "v", f.replace("x", "u").replace("y", "v")]),
                        m, base, want=()),
    ]
    for s in reps[1:]:
        assert s.H == pytest.approx(reps[0].H, abs=1e-10)
        assert s.K == pytest.approx(reps[0].K, abs=1e-10)
        assert np.allclose(s.point, reps[0].point, atol=1e-12)


def test_graph_levelset_agree_in_curved_4d():
    f = "0.2*x^2 - 0.1*y*z + 0.3*z^2"
    base = [0.1, 0.2, -0.3]
    z0 = 0.2 * 0.01 - 0.1 * 0.2 * -0.3 + 0.3 * 0.09
    m = MetricSpec.conformally_flat(4, "exp(0.1*x - 0.2*y*w)")
    a = sample_geometry(GraphSurface.from_text(4, f), m, base, want=("L",))
    b = sample_geometry(LevelSetSurface.from_text(4, f"w - ({f})"), m, base + [z0], want=("L",))
    assert b.H == pytest.approx(a.H, abs=1e-10)
    assert b.K == pytest.approx(a.K, abs=1e-10)
    assert b.L == pytest.approx(a.L, abs=1e-10)


def test_orientation_parity():
    surf = GraphSurface.from_text(4, "0.3*x^2 + 0.1*y^2 - 0.2*z^2 + 0.2*x*y*z")
    m = MetricSpec.euclidean(4)
    up = _frame(m, surf, [0.1, 0.2, 0.3])
    down = _frame(m, surf, [0.1, 0.2, 0.3], orientation=-1)
    assert down.H.value() == pytest.approx(-up.H.value(), abs=1e-12)
    assert down.K.value() == pytest.approx(up.K.value(), abs=1e-12)
    # L = II̊·F with F even in the normal: L is odd
    assert down.L.value() == pytest.approx(-up.L.value(), abs=1e-12)
    assert abs(up.L.value()) > 1e-3


@given(st.integers(0, 10_000))
def test_graph_formula_property(seed):
    rng = np.random.default_rng(seed)
    rep = graph_mean_curvature_check(random_graph(3, rng), rng.uniform(-1, 1, 2))
    assert rep.passed, [c.line() for c in rep.checks]


@pytest.mark.parametrize("d", [3, 4])
def test_riemannian_identity_suite_instance(d, rng):
    g = random_chart_metric(d, 6, rng).geometry
    s = unit_improve(random_defining_function(d, 6, rng), g, 3)
    rep = riemannian_identity_suite(s, g, rng=rng)
    assert rep.passed, [c.line() for c in rep.checks if not c.passed]
    assert len(rep.checks) >= 6


@pytest.mark.parametrize("d", [4, 5])
def test_gauss_fialkow_trace(d, rng):
    g = random_chart_metric(d, 4, rng).geometry
    fr = HypersurfaceFrame(g, random_defining_function(d, 4, rng))
    assert gauss_fialkow_trace_residual(fr) < 1e-12


def test_unit_improve_reaches_target(rng):
    g = random_chart_metric(3, 7, rng).geometry
    s = unit_improve(random_defining_function(3, 7, rng), g, 4)
    n = s.s.grad()
    R = g.dot(n, n) - 1.0
    assert R.low_last_residual(5) < 1e-12


def test_unit_improve_needs_order(rng):
    g = random_chart_metric(3, 4, rng).geometry
    with pytest.raises(ValueError):
        unit_improve(random_defining_function(3, 4, rng), g, 4)


def test_defining_function_must_vanish():
    with pytest.raises(ValueError):
        DefiningFunction(Jet.variable(2, 3, 3) + 0.1)
