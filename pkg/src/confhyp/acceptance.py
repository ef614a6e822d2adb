"""The acceptance suites: randomized instances, tolerances and time budgets.

Each ``criterion_k(rng)`` returns a :class:`Report`; :data:`CRITERIA` lists
them with their wall-clock budgets in seconds.  ``selftest`` and the test
suite both run them from here.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .ambient import flat_pullback_package
from .energy import (
    ClosedSurfaceSpec,
    energy_suite,
    gradient_check,
    random_perturbed_sphere,
    random_variations,
)
from .expressions import default_variables, evaluate
from .hypersurface import graph_mean_curvature_check, riemannian_identity_suite, unit_improve
from .laplacians import laplacian_suite
from .random_instances import (
    random_chart_metric,
    random_defining_function,
    random_graph,
    random_graph_chart,
    random_unit_factor,
)
from .report import Report
from .tractor import tractor_identity_suite
from .yamabe import conformal_unit_improve, covariance_check, flat_expansion_check, obstruction_density


def criterion_1(rng: np.random.Generator, count: int = 100) -> Report:
    rep = Report("graph mean curvature")
    for k in range(count):
        surf = random_graph(3, rng, degree=2 + k % 2)
        rep.extend(graph_mean_curvature_check(surf, rng.uniform(-1.0, 1.0, 2), tol=1e-10))
    return rep


def criterion_2(rng: np.random.Generator, count: int = 50) -> Report:
    rep = Report("riemannian identities")
    for d in (3, 4):
        for _ in range(count):
            g = random_chart_metric(d, 6, rng).geometry
            s = unit_improve(random_defining_function(d, 6, rng), g, 3)
            rep.extend(riemannian_identity_suite(s, g, tol=1e-8, rng=rng), f"d={d} ")
    return rep


def criterion_3(rng: np.random.Generator, count: int = 50) -> Report:
    rep = Report("flat singular Yamabe expansion")
    for d, order, target in ((3, 8, 5), (4, 10, 4)):
        for _ in range(count):
            ch, _, _ = random_graph_chart(d, order, rng)
            g = ch.geometry
            s = unit_improve(ch.t(), g, target).s
            rep.extend(flat_expansion_check(s, g, tol=1e-10), f"d={d} ")
    return rep


def willmore_transport_check(ch, metric, tol: float = 1e-7) -> Report:
    """B of Ω²δ from the recursion against Ω^-3 times the flat-scale Willmore form."""
    d = ch.d
    flat = flat_pullback_package(ch.reduced if ch.reduced is not None else ch.phi)
    B_flat = obstruction_density(conformal_unit_improve(ch.t(), flat, d)).values["willmore d=3"]
    om = evaluate(metric.omega, dict(zip(default_variables(d), [ch.phi[a] for a in range(d)])))
    B = float(conformal_unit_improve(ch.t(), ch.geometry, d).B.value())
    rep = Report("willmore d=3 in a conformally flat scale")
    rep.add("willmore d=3 (flat scale, weight -3 transport)", B, B_flat * om.value() ** -3, tol)
    return rep


def criterion_4(rng: np.random.Generator, count: int = 30) -> Report:
    rep = Report("obstruction closed forms")
    for _ in range(count):
        ch, _, metric = random_graph_chart(3, 8, rng, conformally_flat=True)
        rep.extend(willmore_transport_check(ch, metric), "conformally flat d=3: ")
    cases = (("curved d=3", 3, 8, False), ("conformally flat d=4", 4, 10, True))
    for label, d, order, flat in cases:
        for _ in range(count):
            if flat:
                ch, _, _ = random_graph_chart(d, order, rng, conformally_flat=True)
                s = ch.t()
            else:
                ch = random_chart_metric(d, order, rng)
                s = random_defining_function(d, order, rng)
            dd = conformal_unit_improve(s, ch.geometry, d)
            sub = obstruction_density(dd)
            sub.values = {}
            rep.extend(sub, f"{label}: ")
    return rep


def criterion_5(rng: np.random.Generator, count: int = 30) -> Report:
    rep = Report("tractor identities")
    for _ in range(count):
        g = random_chart_metric(4, 10, rng).geometry
        dd = conformal_unit_improve(random_defining_function(4, 10, rng), g, 4)
        rep.extend(tractor_identity_suite(dd, tol=1e-8, rng=rng))
    return rep


def criterion_6(rng: np.random.Generator, count: int = 20, sections: int = 20) -> Report:
    rep = Report("extrinsic Laplacians")
    for d, order, target in ((3, 8, 3), (4, 10, 4)):
        for _ in range(count):
            g = random_chart_metric(d, order, rng).geometry
            dd = conformal_unit_improve(random_defining_function(d, order, rng), g, target)
            sub = laplacian_suite(dd, n_sections=sections, rng=rng)
            ctrl = sub.values.pop("negative control residual")
            rep.values[f"d={d} smallest negative control residual"] = min(
                ctrl, rep.values.get(f"d={d} smallest negative control residual", np.inf))
            rep.extend(sub, f"d={d} ")
    return rep


def criterion_7(rng: np.random.Generator) -> Report:
    return energy_suite(rng)


def criterion_8(rng: np.random.Generator, count: int = 5) -> Report:
    rep = Report("gradient vs obstruction")
    rep.extend(gradient_check(random_perturbed_sphere(3, rng), random_variations(rng, count)), "perturbed sphere: ")
    rep.extend(gradient_check(ClosedSurfaceSpec.sphere(3), random_variations(rng, 2)), "round sphere: ")
    return rep


def criterion_9(rng: np.random.Generator, count: int = 20) -> Report:
    rep = Report("conformal covariance")
    for d, order in ((3, 8), (4, 10)):
        g = random_chart_metric(d, order, rng).geometry
        s = random_defining_function(d, order, rng)
        dd = conformal_unit_improve(s, g, d)
        for _ in range(count):
            rep.extend(covariance_check(s, g, random_unit_factor(d, order, rng), tol=1e-8, dd=dd), f"d={d} ")
    return rep


@dataclass(frozen=True)
class Criterion:
    number: int
    title: str
    run: Callable[[np.random.Generator], Report]
    budget: float  # seconds


CRITERIA = (
    Criterion(1, "graph mean curvature formula", criterion_1, 1.0),
    Criterion(2, "Riemannian identity suite", criterion_2, 10.0),
    Criterion(3, "flat singular Yamabe expansion", criterion_3, 10.0),
    Criterion(4, "obstruction closed forms", criterion_4, 30.0),
    Criterion(5, "tractor identity suite", criterion_5, 20.0),
    Criterion(6, "extrinsic Laplacians", criterion_6, 30.0),
    Criterion(7, "energies", criterion_7, 60.0),
    Criterion(8, "gradient vs obstruction", criterion_8, 60.0),
    Criterion(9, "covariance weights", criterion_9, 10.0),
)


@dataclass
class CriterionResult:
    criterion: Criterion
    report: Report
    seconds: float
    error: str = ""

    @property
    def in_budget(self) -> bool:
        return self.seconds < self.criterion.budget

    @property
    def passed(self) -> bool:
        return not self.error and self.report.passed and self.in_budget

    def line(self) -> str:
        c = self.criterion
        mark = "PASS" if self.passed else "FAIL"
        worst = max((ch.residual / ch.tol for ch in self.report.checks), default=float("nan"))
        extra = f" error={self.error}" if self.error else ""
        return (f"{mark} criterion {c.number} ({c.title}): {len(self.report.checks)} checks, "
                f"worst residual/tol={worst:.2e}, time={self.seconds:.2f}s budget={c.budget:.0f}s{extra}")


def run_criterion(c: Criterion, seed: int = 0) -> CriterionResult:
    rng = np.random.default_rng([seed, c.number])
    t0 = time.perf_counter()
    try:
        rep = c.run(rng)
        err = ""
    except Exception as exc:  # a crash is a failing criterion, not a crashed run
        rep, err = Report(c.title), f"{type(exc).__name__}: {exc}"
    return CriterionResult(c, rep, time.perf_counter() - t0, err)
