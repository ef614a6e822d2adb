import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from confhyp import jets
from confhyp.ambient import conformal_rescale, curvature_package, flat_pullback_package
from confhyp.charts import MetricSpec
from confhyp.jets import Jet, SingularJetError
from confhyp.random_instances import random_chart_metric, random_graph_chart, random_unit_factor

CURVED = [
    ["1 + 0.2*z^2", "0.1*x*y", "0.05*z"],
    ["0.1*x*y", "1 + 0.1*x^2", "0.1*y*z"],
    ["0.05*z", "0.1*y*z", "exp(0.2*x*z)"],
]
POINT = (0.2, 0.1, 0.3)
# Symbolic Christoffel symbols Γ^c_ab[c][a][b], Ricci tensor and scalar
# curvature of CURVED at POINT, frozen.
GAMMA_ORACLE = [
    [[0.0008542570380755028, -3.827496636483289e-05, 0.05851022193121891],
     [-3.827496636483289e-05, -0.00043669726062895965, 0.0],
     [0.05851022193121891, 0.0, 0.01898110282156647]],
    [[0.010135729592343585, 0.019920569715803957, -0.00020360627607240772],
     [0.019920569715803957, -8.772236722080336e-05, 0.0],
     [-0.00020360627607240772, 0.0, 0.00986351540656065]],
    [[-0.05932700826303661, -5.848157814720225e-05, 0.02913341910475318],
     [-5.848157814720225e-05, 0.0296488837369815, 0.0],
     [0.02913341910475318, 0.0, 0.019689442056658495]],
]
RICCI_ORACLE = [
    [-0.19187625328378397, -0.00019340784170460666, -0.0037292098672404485],
    [-0.00019340784170460666, 0.10041146975633726, 0.00028213547317566156],
    [-0.0037292098672404485, 0.00028213547317566156, -0.09389971855938314],
]
SCALAR_ORACLE = -0.18120581036840624
DSCALAR_X_ORACLE = 0.016386962358314872


def _metric_at(spec: MetricSpec, point, order):
    X = [Jet.variable(i, spec.d, order, p) for i, p in enumerate(point)]
    return spec.at(X)


def test_curvature_matches_symbolic_oracle():
    geom = curvature_package(_metric_at(MetricSpec.general(3, CURVED), POINT, 4))
    assert np.allclose(geom.gamma.value(), GAMMA_ORACLE, atol=1e-14)
    assert np.allclose(geom.ricci.value(), RICCI_ORACLE, atol=1e-13)
    assert geom.sc.value() == pytest.approx(SCALAR_ORACLE, abs=1e-13)
    assert geom.sc.coeff((1, 0, 0)) == pytest.approx(DSCALAR_X_ORACLE, abs=1e-12)


@pytest.mark.parametrize("d", [3, 4])
def test_round_sphere_schouten(d):
    # stereographic round metric: Sc = d(d-1), J = d/2, P = g/2, W = 0
    omega = "2/(1 + " + " + ".join(f"{v}^2" for v in "xyzw"[:d]) + ")"
    geom = curvature_package(_metric_at(MetricSpec.conformally_flat(d, omega), [0.3, -0.1, 0.2, 0.4][:d], 4))
    assert geom.sc.value() == pytest.approx(d * (d - 1), rel=1e-12)
    assert geom.J.value() == pytest.approx(d / 2, rel=1e-12)
    assert np.allclose(geom.P.c, 0.5 * geom.g.truncate(geom.P.order).c, atol=1e-11)
    assert geom.W.max_abs() < 1e-11


@pytest.mark.parametrize("d", [3, 4])
def test_flat_fast_path_matches_general_curvature(d):
    ch, _, _ = random_graph_chart(d, 6, np.random.default_rng(d))
    fast = ch.geometry
    full = curvature_package(ch.g)
    assert np.allclose(fast.gamma.c, full.gamma.c, atol=1e-13)
    assert full.riemann.max_abs() < 1e-12
    assert fast.riemann.max_abs() == 0.0
    # and the (d-1)-variable route agrees with the d-variable one
    phi_route = flat_pullback_package(ch.phi, ch.g)
    assert np.allclose(phi_route.gamma.c, fast.gamma.c, atol=1e-13)


def test_indefinite_metric_rejected():
    g = Jet.constant(np.diag([1.0, -1.0, 1.0]), 3, 3)
    with pytest.raises(SingularJetError):
        curvature_package(g)


seeds = st.integers(0, 10_000)


@given(seeds)
def test_riemann_symmetries_and_weyl_tracefree(seed):
    geom = random_chart_metric(4, 4, np.random.default_rng(seed)).geometry
    R = np.asarray(geom.riemann.value())
    assert np.abs(R + R.transpose(1, 0, 2, 3)).max() < 1e-13
    assert np.abs(R + R.transpose(0, 1, 3, 2)).max() < 1e-13
    assert np.abs(R - R.transpose(2, 3, 0, 1)).max() < 1e-13
    assert np.abs(R + R.transpose(1, 2, 0, 3) + R.transpose(2, 0, 1, 3)).max() < 1e-13
    W = np.asarray(geom.W.value())
    gi = np.asarray(geom.ginv.value())
    assert np.abs(np.einsum("ac,abcd->bd", gi, W)).max() < 1e-13


@given(seeds)
def test_weyl_tensor_has_conformal_weight_two(seed):
    rng = np.random.default_rng(seed)
    geom = random_chart_metric(4, 4, rng).geometry
    om = random_unit_factor(4, 4, rng)
    hat = conformal_rescale(geom, om)
    o = hat.W.order
    lhs = hat.W.c[..., 0]
    rhs = (om.value() ** 2) * geom.W.truncate(o).c[..., 0]
    assert np.allclose(lhs, rhs, atol=1e-12)


@given(seeds)
def test_inverse_metric(seed):
    geom = random_chart_metric(3, 4, np.random.default_rng(seed)).geometry
    I = jets.einsum("ab,bc->ac", geom.g, geom.ginv)
    assert np.allclose(I.c, jets.identity(3, 3, 4).c, atol=1e-13)
