import math

import pytest

from confhyp import energy
from confhyp.charts import MetricSpec
from confhyp.energy import (
    GRADIENT_CONSTANT_D3,
    ClosedSurfaceSpec,
    DegenerateNodeError,
    DegenerateVariationError,
    UnsupportedEnergyError,
    energy_general,
    gradient_check,
    rigidity_energy_3d,
    sample_geometry,
    willmore_energy_2d,
)

TWO_PI = 2 * math.pi


def test_round_sphere_is_umbilic():
    E = willmore_energy_2d(ClosedSurfaceSpec.sphere(3))
    assert abs(E.energy) < 1e-10
    R = rigidity_energy_3d(ClosedSurfaceSpec.sphere(4), n=8)
    assert abs(R.energy) < 1e-10


def test_clifford_torus():
    E = willmore_energy_2d(ClosedSurfaceSpec.torus(math.sqrt(2.0), 1.0))
    assert E.energy == pytest.approx(4 * math.pi**2, abs=1e-8)
    assert E.error < 1e-6


def test_torus_closed_form():
    # ∫II̊·II̊ = 2π² R² / (r sqrt(R² - r²)) for the torus of revolution
    R, r = 3.0, 1.0
    E = willmore_energy_2d(ClosedSurfaceSpec.torus(R, r), n=96)
    assert E.energy == pytest.approx(2 * math.pi**2 * R**2 / (r * math.sqrt(R**2 - r**2)), rel=1e-9)


def test_reparametrization_invariance():
    a = willmore_energy_2d(ClosedSurfaceSpec.torus(2.0, 0.7))
    X = ["(2 + 0.7*cos(u + 0.4))*cos(v - 1.1)", "(2 + 0.7*cos(u + 0.4))*sin(v - 1.1)", "0.7*sin(u + 0.4)"]
    per = ("periodic", 0.0, TWO_PI)
    b = willmore_energy_2d(ClosedSurfaceSpec.from_text(X, [per, per]))
    assert b.energy == pytest.approx(a.energy, abs=1e-8)


def test_quadrature_converges():
    spec = ClosedSurfaceSpec.sphere(3, perturbation="0.1*x*y + 0.05*z^3")
    ref = willmore_energy_2d(spec, n=128, refine=False).energy
    errs = [abs(willmore_energy_2d(spec, n=n, refine=False).energy - ref) for n in (8, 16, 32)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-6


def test_general_route_matches_willmore_on_common_nodes():
    spec = ClosedSurfaceSpec.torus(math.sqrt(2.0), 1.0)
    G = energy_general(spec, n=8, refine=False)
    K = willmore_energy_2d(spec, n=8, refine=False)
    assert G.energy == pytest.approx(-K.energy, abs=1e-8)


def test_conformal_invariance_chart_route():
    spec = ClosedSurfaceSpec.sphere(3, perturbation="0.1*x*z")
    om = MetricSpec.conformally_flat(3, "1 + 0.1*x^2 + 0.05*y*z")
    a = willmore_energy_2d(spec, n=10, refine=False)
    b = willmore_energy_2d(spec, om, n=10, refine=False)
    assert b.route == "chart"
    assert b.energy == pytest.approx(a.energy, abs=1e-8)


def test_degenerate_parametrization():
    spec = ClosedSurfaceSpec.from_text(["u", "0*v", "1"], [("periodic", 0, 1), ("periodic", 0, 1)])
    with pytest.raises(DegenerateNodeError):
        willmore_energy_2d(spec, n=4)


def test_degenerate_variation(monkeypatch):
    def always_degenerate(*args):
        raise DegenerateNodeError("forced")

    monkeypatch.setattr(energy, "_energy_along", always_degenerate)
    with pytest.raises(DegenerateVariationError):
        gradient_check(ClosedSurfaceSpec.sphere(3), ["x"], n=8)


def test_unsupported_dimensions():
    with pytest.raises(UnsupportedEnergyError):
        ClosedSurfaceSpec.sphere(5)
    with pytest.raises(UnsupportedEnergyError):
        willmore_energy_2d(ClosedSurfaceSpec.sphere(4))
    with pytest.raises(UnsupportedEnergyError):
        rigidity_energy_3d(ClosedSurfaceSpec.sphere(3))
    with pytest.raises(UnsupportedEnergyError):
        sample_geometry(ClosedSurfaceSpec.sphere(3).surface, MetricSpec.euclidean(5), [0.5, 0.5, 0.5, 0.5], want=("B",))


def test_gradient_vanishes_on_round_sphere():
    rep = gradient_check(ClosedSurfaceSpec.sphere(3), ["x*y", "z^2 + x"], n=32)
    assert rep.passed
    assert all(abs(rep.values[k]["dE"]) < 1e-6 for k in ("phi0", "phi1"))


def test_frozen_gradient_constant():
    assert GRADIENT_CONSTANT_D3 == 6.0
    spec = ClosedSurfaceSpec.torus(2.0, 0.8)
    rep = gradient_check(spec, ["x", "z^2", "x*y + z"], n=64)
    assert rep.passed, [c.line() for c in rep.checks]
    assert rep.values["c"] == pytest.approx(6.0, rel=1e-3)


def test_sample_on_unit_sphere():
    s = sample_geometry(ClosedSurfaceSpec.sphere(3).surface, MetricSpec.euclidean(3), [1.0, 0.3], want=("B", "NPN"))
    assert abs(s.H) == pytest.approx(1.0, abs=1e-12)
    assert s.K == pytest.approx(0.0, abs=1e-12)
    assert s.B == pytest.approx(0.0, abs=1e-10)
    assert s.NPN == pytest.approx(0.0, abs=1e-10)
    assert s.dA == pytest.approx(math.sin(1.0), abs=1e-12)
