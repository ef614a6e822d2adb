import numpy as np
import pytest

from confhyp.hypersurface import HypersurfaceFrame
from confhyp.laplacians import (
    ExtrinsicLaplacian,
    NonCanonicalOrderWarning,
    P2_closed,
    P3_closed,
    build_Pk,
    laplacian_suite,
    random_sections,
    tangentiality_residual,
)
from confhyp.random_instances import random_chart_metric, random_defining_function
from confhyp.tractor import ExcludedDimensionError, TractorField, WeightMismatchError
from confhyp.yamabe import conformal_unit_improve


def _dd(d, order, target, seed):
    rng = np.random.default_rng(seed)
    g = random_chart_metric(d, order, rng).geometry
    return conformal_unit_improve(random_defining_function(d, order, rng), g, target), rng


@pytest.mark.parametrize("d, order, target", [(3, 8, 3), (4, 10, 4)])
def test_suite_instance(d, order, target):
    dd, rng = _dd(d, order, target, d)
    rep = laplacian_suite(dd, n_sections=5, rng=rng)
    assert rep.passed, [c.line() for c in rep.checks if not c.passed]
    assert rep.values["negative control residual"] >= 1e-2


def test_scalar_sections_too():
    dd, rng = _dd(4, 10, 4, 7)
    rep = laplacian_suite(dd, n_sections=3, rng=rng, tractor=False)
    assert rep.passed, [c.line() for c in rep.checks if not c.passed]


def test_wrong_weight_rejected():
    dd, rng = _dd(3, 8, 3, 1)
    P2 = build_Pk(dd, 2)
    T = random_sections(dd.geom, P2.weight + 0.5, 2, 4, rng)
    with pytest.raises(WeightMismatchError):
        P2(T)
    fr = HypersurfaceFrame(dd.geom, dd.sigma)
    with pytest.raises(WeightMismatchError):
        P2_closed(fr, T)


def test_P3_closed_needs_d4():
    dd, rng = _dd(3, 8, 3, 2)
    fr = HypersurfaceFrame(dd.geom, dd.sigma)
    T = random_sections(dd.geom, 0.0, 2, 6, rng)
    with pytest.raises(ExcludedDimensionError):
        P3_closed(fr, T)


def test_noncanonical_power_warns():
    dd, _ = _dd(3, 8, 3, 3)
    with pytest.warns(NonCanonicalOrderWarning):
        op = build_Pk(dd, 3)
    assert not op.canonical


def test_plain_laplacian_is_not_tangential():
    dd, rng = _dd(3, 8, 3, 4)
    T = random_sections(dd.geom, -1.0, 3, 3, rng)
    lap = lambda F: TractorField(F.laplacian(), F.kinds, F.weight - 2, F.geom)
    assert tangentiality_residual(lap, dd.sigma, T) > 1e-2
    P2 = ExtrinsicLaplacian(2, dd.sigma, dd.geom)
    Ts = random_sections(dd.geom, P2.weight - 1, 3, 5, rng)
    assert tangentiality_residual(P2, dd.sigma, Ts) < 1e-9
