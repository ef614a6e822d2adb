"""Seeded random geometric test data.

Random metrics are generated directly in an adapted chart: any (g, Σ) looks
locally like a metric jet near δ with Σ = {t = 0}, so this samples generic
instances without composing expressions.  Euclidean and conformally flat
instances use random graphs so that flatness is exact.
"""

from __future__ import annotations

from math import factorial

import numpy as np

from .charts import Chart, GraphSurface, MetricSpec, adapted_chart
from .hypersurface import random_jet
from .jets import Jet


def random_chart_metric(d: int, order: int, rng: np.random.Generator, amp: float = 0.3) -> Chart:
    h = random_jet((d, d), d, order, rng, scale=2 * amp)
    return Chart(Jet.constant(np.eye(d), d, order) + 0.5 * (h + h.T))


def random_unit_factor(d: int, order: int, rng: np.random.Generator, amp: float = 0.3) -> Jet:
    """A positive jet 1 + small random perturbation."""
    return 1.0 + random_jet((), d, order, rng, scale=2 * amp)


def random_defining_function(d: int, order: int, rng: np.random.Generator, amp: float = 0.3) -> Jet:
    """t · u with u a random unit; vanishes exactly on Σ = {t = 0}."""
    t = Jet.variable(d - 1, d, order)
    return random_unit_factor(d, order, rng, amp).mul_vanishing(t, 1)


def random_polynomial_text(names: tuple[str, ...], degree: int, rng: np.random.Generator,
                           amp: float = 0.5, min_degree: int = 0) -> str:
    """Random polynomial as expression text, coefficients uniform in [-amp, amp]/k!."""
    terms = []
    for k in range(min_degree, degree + 1):
        for alpha in _exponents(len(names), k):
            c = rng.uniform(-amp, amp) / factorial(k)
            mono = "*".join(f"{n}^{a}" if a > 1 else n for n, a in zip(names, alpha) if a)
            terms.append(f"{c!r}" + (f"*{mono}" if mono else ""))
    return " + ".join(terms).replace("+ -", "- ")


def _exponents(n: int, k: int):
    if n == 1:
        yield (k,)
        return
    for first in range(k, -1, -1):
        for rest in _exponents(n - 1, k - first):
            yield (first,) + rest


def random_graph(d: int, rng: np.random.Generator, degree: int = 3, amp: float = 0.5) -> GraphSurface:
    names = ("x", "y", "z", "w")[: d - 1]
    return GraphSurface.from_text(d, random_polynomial_text(names, degree, rng, amp))


def random_conformal_factor_text(d: int, rng: np.random.Generator, amp: float = 0.3) -> str:
    names = ("x", "y", "z", "w")[:d]
    return f"exp({random_polynomial_text(names, 2, rng, amp)})"


def random_graph_chart(d: int, order: int, rng: np.random.Generator, conformally_flat: bool = False,
                       degree: int = 3) -> tuple[Chart, GraphSurface, MetricSpec]:
    surf = random_graph(d, rng, degree)
    metric = (
        MetricSpec.conformally_flat(d, random_conformal_factor_text(d, rng))
        if conformally_flat
        else MetricSpec.euclidean(d)
    )
    base = rng.uniform(-0.3, 0.3, d - 1)
    return adapted_chart(metric, surf, base, order), surf, metric
