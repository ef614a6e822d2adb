import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from confhyp.hypersurface import HypersurfaceFrame, random_jet
from confhyp.jets import Jet
from confhyp.random_instances import random_chart_metric, random_defining_function
from confhyp.tractor import (
    ExcludedDimensionError,
    ExcludedWeightError,
    KernelViolationError,
    PreconditionError,
    TractorField,
    WeightMismatchError,
    X_tractor,
    connection_matrix,
    contract,
    q_split,
    q_star,
    scale_covariance_checks,
    scale_tractor,
    thomas_D,
    tractor_identity_suite,
    tractor_metric,
    yamabe_weight_operator,
)
from confhyp.yamabe import conformal_unit_improve, s_functional


@pytest.fixture(scope="module")
def setup4():
    rng = np.random.default_rng(44)
    g = random_chart_metric(4, 10, rng).geometry
    dd = conformal_unit_improve(random_defining_function(4, 10, rng), g, 4)
    return g, dd


def test_identity_suite_d4(setup4):
    g, dd = setup4
    rep = tractor_identity_suite(dd, tol=1e-8, rng=np.random.default_rng(0))
    assert rep.passed, [c.line() for c in rep.checks if not c.passed]
    assert len(rep.checks) > 30


def test_scale_covariance(setup4):
    g, dd = setup4
    rep = scale_covariance_checks(g, dd.sigma, np.random.default_rng(1))
    assert rep.passed, [c.line() for c in rep.checks if not c.passed]


def test_X_is_null_and_I_squared_is_S(setup4):
    g, dd = setup4
    X = X_tractor(g)
    assert X.square().max_abs() == 0.0
    I = scale_tractor(dd.sigma, g)
    S = s_functional(g, dd.sigma)
    o = min(I.square().order, S.order)
    assert np.allclose(I.square().truncate(o).c, S.truncate(o).c, atol=1e-12)


@given(st.integers(0, 10_000), st.floats(-2.0, 2.0))
def test_X_dot_D_is_weight_times_d_plus_2w_minus_2(seed, w):
    rng = np.random.default_rng(seed)
    g = random_chart_metric(3, 4, rng).geometry
    V = TractorField(random_jet((), 3, 4, rng), "", w, g)
    XD = contract(X_tractor(g), 0, thomas_D(V), 0).comps
    want = V.comps * ((3 + 2 * w - 2) * w)
    o = XD.order
    assert np.allclose(XD.c, want.truncate(o).c, atol=1e-10)


def test_hatted_D_excluded_weight(setup4):
    g, _ = setup4
    V = TractorField(Jet.constant(1.0, 4, 4), "", 1 - 4 / 2, g)
    with pytest.raises(ExcludedWeightError):
        thomas_D(V, hatted=True)


def test_weight_mismatch(setup4):
    g, _ = setup4
    a = TractorField(Jet.constant(np.ones(6), 4, 3), "T", 0.0, g)
    b = TractorField(Jet.constant(np.ones(6), 4, 3), "T", 1.0, g)
    with pytest.raises(WeightMismatchError):
        a + b


def test_splitting_excluded_weight(setup4):
    g, _ = setup4
    t = Jet.zeros((4, 4), 4, 4)
    with pytest.raises(ExcludedWeightError):
        q_split(t, 1 - 4, g)


def test_kernel_violation(setup4):
    g, _ = setup4
    T = TractorField(Jet.constant(np.ones((6, 6)), 4, 3), "TT", 0.0, g)
    with pytest.raises(KernelViolationError):
        q_star(T)


def test_yamabe_weight_precondition(setup4):
    g, dd = setup4
    fr = HypersurfaceFrame(g, dd.sigma)
    V = Jet.constant(np.eye(6)[0], 4, 4).restrict()
    U = Jet.constant(1.0, 4, 4)
    with pytest.raises(PreconditionError):
        yamabe_weight_operator(fr, V, U, "")


def test_tractor_calculus_needs_d3(rng):
    g = random_chart_metric(2, 4, rng).geometry
    with pytest.raises(ExcludedDimensionError):
        connection_matrix(g)


def test_tractor_metric_signature(setup4):
    g, _ = setup4
    h = np.asarray(tractor_metric(g).value())
    ev = np.linalg.eigvalsh(h)
    assert (ev < 0).sum() == 1 and (ev > 0).sum() == 5
