import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from confhyp.charts import LevelSetSurface, MetricSpec, adapted_chart
from confhyp.random_instances import (
    random_chart_metric,
    random_defining_function,
    random_graph_chart,
    random_unit_factor,
)
from confhyp.yamabe import (
    ObstructionError,
    UnsupportedComparisonError,
    conformal_unit_improve,
    covariance_check,
    flat_expansion_check,
    obstruction_density,
    rho_ladder,
    s_functional,
)
from confhyp.hypersurface import unit_improve


def _level_set_B(d, s, base, order):
    ch = adapted_chart(MetricSpec.euclidean(d), LevelSetSurface.from_text(d, s), base, order)
    return conformal_unit_improve(ch.t(), ch.geometry, d)


# Cylinders: closed forms evaluated by hand (H, II̊, intrinsic J are constant,
# so only the algebraic terms survive).
@pytest.mark.parametrize("d, s, base, order, want", [
    (3, "x^2 + y^2 - 1", [1.0, 0.0, 0.3], 8, -1 / 12),       # -H K / 3, H = 1/2, K = 1/2
    (4, "x^2 + y^2 + z^2 - 1", [0.0, 0.6, 0.8, 0.1], 10, -1 / 27),  # (K^2 - 2 J̄ K)/6
    (4, "x^2 + y^2 - 1", [0.6, 0.8, 0.2, 0.1], 10, 2 / 27),   # K^2 / 6
])
def test_cylinder_obstruction(d, s, base, order, want):
    dd = _level_set_B(d, s, base, order)
    assert float(dd.B.value()) == pytest.approx(want, abs=1e-10)


@pytest.mark.parametrize("d, order", [(3, 8), (4, 10)])
def test_round_sphere_has_no_obstruction(d, order):
    s = " + ".join(f"{v}^2" for v in "xyzw"[:d]) + " - 1"
    base = [0.0] * (d - 1) + [1.0]
    assert abs(float(_level_set_B(d, s, base, order).B.value())) < 1e-11


@pytest.mark.parametrize("d, order", [(3, 8), (4, 10)])
def test_recursion_reaches_order_d(d, order, rng):
    g = random_chart_metric(d, order, rng).geometry
    dd = conformal_unit_improve(random_defining_function(d, order, rng), g)
    R = s_functional(g, dd.sigma) - 1.0
    assert R.low_last_residual(d) < 1e-10
    assert len(dd.alphas) == d - 1


def test_cannot_improve_past_obstruction(rng):
    g = random_chart_metric(3, 8, rng).geometry
    with pytest.raises(ObstructionError):
        conformal_unit_improve(random_defining_function(3, 8, rng), g, target_order=4)


def test_B_independent_of_initial_defining_function(rng):
    g = random_chart_metric(3, 8, rng).geometry
    a = conformal_unit_improve(random_defining_function(3, 8, rng), g)
    b = conformal_unit_improve(random_defining_function(3, 8, rng), g)
    assert float(a.B.value()) == pytest.approx(float(b.B.value()), abs=1e-12)
    assert (a.sigma - b.sigma).low_last_residual(4) < 1e-12


@pytest.mark.parametrize("d, order, target", [(3, 8, 5), (4, 10, 4)])
def test_flat_expansion_closed_forms(d, order, target, rng):
    ch, _, _ = random_graph_chart(d, order, rng)
    s = unit_improve(ch.t(), ch.geometry, target).s
    rep = flat_expansion_check(s, ch.geometry)
    assert rep.passed, [c.line() for c in rep.checks]


def test_closed_forms_unsupported_dimension(rng):
    g = random_chart_metric(2, 6, rng).geometry
    dd = conformal_unit_improve(random_defining_function(2, 6, rng), g)
    with pytest.raises(UnsupportedComparisonError):
        obstruction_density(dd)


def test_obstruction_needs_order_d(rng):
    g = random_chart_metric(3, 8, rng).geometry
    dd = conformal_unit_improve(random_defining_function(3, 8, rng), g, target_order=2)
    with pytest.raises(ValueError):
        obstruction_density(dd)


@pytest.mark.parametrize("d, order", [(3, 8), (4, 10)])
def test_rho_ladder(d, order, rng):
    g = random_chart_metric(d, order, rng).geometry
    dd = conformal_unit_improve(random_defining_function(d, order, rng), g, target_order=min(d, 4))
    rep = rho_ladder(dd)
    assert rep.passed, [c.line() for c in rep.checks if not c.passed]


@given(st.integers(0, 10_000))
def test_covariance_weights_property(seed):
    rng = np.random.default_rng(seed)
    g = random_chart_metric(3, 8, rng).geometry
    s = random_defining_function(3, 8, rng)
    rep = covariance_check(s, g, random_unit_factor(3, 8, rng))
    assert rep.passed, [c.line() for c in rep.checks]


def test_wrong_weight_is_detected(rng):
    # control: B does not have weight -d + 1
    g = random_chart_metric(3, 8, rng).geometry
    s = random_defining_function(3, 8, rng)
    om = random_unit_factor(3, 8, rng, amp=0.5)
    rep = covariance_check(s, g, om)
    B = rep.checks[1]
    assert B.passed
    from confhyp.ambient import conformal_rescale
    dd = conformal_unit_improve(s, g)
    ddh = conformal_unit_improve(om * s, conformal_rescale(g, om))
    o = float(om.value())
    assert abs(float(ddh.B.value()) - o ** -2 * float(dd.B.value())) > 1e-4
