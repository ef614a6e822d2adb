"""Adapted charts: coordinates (y, t) near a point of Σ in which Σ = {t = 0}.

Every hypersurface computation in the package runs in such a chart.  The
ambient metric is pulled back along the chart map Φ(y, t), so tangential
covariant components are simply the first d-1 slots and restriction to Σ is
setting t = 0 in a jet.  The chart is built directly from the hypersurface
description:

* graph ``x_d = f(x')``: Φ(y, t) = (p' + y, f(p' + y) + t);
* level set ``s = 0``: Φ(y, t) = p + R (y, h(y, t)) with ``s(Φ) = t``, the
  jet h found by fixed-point iteration;
* parametrization X(u): Φ(y, t) = X(u0 + y) + t ν(u0 + y), ν the Euclidean
  unit normal, so closed surfaces need no global level set.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from . import jets
from .ambient import AmbientGeometry, curvature_package, flat_pullback_package
from .expressions import Expression, default_variables, evaluate, parse
from .jets import Jet, einsum


class DegenerateChartError(ValueError):
    pass


# metrics ---------------------------------------------------------------------

@dataclass(frozen=True)
class MetricSpec:
    """Ambient metric in the coordinates x_1..x_d."""

    kind: str
    d: int
    omega: Expression | None = None
    components: tuple[tuple[Expression, ...], ...] | None = None
    func: Callable[[Sequence[Jet]], Jet] | None = field(default=None, compare=False)

    @classmethod
    def euclidean(cls, d: int) -> MetricSpec:
        return cls("euclidean", d)

    @classmethod
    def conformally_flat(cls, d: int, omega: str) -> MetricSpec:
        return cls("conformally_flat", d, omega=parse(omega, default_variables(d)))

    @classmethod
    def general(cls, d: int, entries: Sequence[Sequence[str]]) -> MetricSpec:
        names = default_variables(d)
        if len(entries) != d or any(len(r) != d for r in entries):
            raise ValueError(f"general metric needs a {d}x{d} expression matrix")
        comps = tuple(tuple(parse(e, names) for e in row) for row in entries)
        return cls("general", d, components=comps)

    @classmethod
    def from_function(cls, d: int, func: Callable[[Sequence[Jet]], Jet]) -> MetricSpec:
        return cls("function", d, func=func)

    def at(self, X: Sequence[Jet]) -> Jet:
        """Metric components g_ab evaluated along the jets X (one per coordinate)."""
        d = self.d
        x0 = X[0]
        if self.kind == "euclidean":
            return Jet.constant(np.eye(d), x0.dim, x0.order)
        names = default_variables(d)
        bind = dict(zip(names, X))
        if self.kind == "conformally_flat":
            om = evaluate(self.omega, bind)
            return (om * om) * np.eye(d)
        if self.kind == "general":
            rows = [[evaluate(e, bind) for e in row] for row in self.components]
            G = Jet.stack([Jet.stack(r) for r in rows])
            return 0.5 * (G + G.T)
        if self.kind == "function":
            return self.func(X)
        raise ValueError(f"unknown metric kind {self.kind!r}")


# hypersurfaces ---------------------------------------------------------------

@dataclass(frozen=True)
class GraphSurface:
    """Σ = {x_d = f(x_1..x_{d-1})}; normal points towards increasing x_d."""

    d: int
    f: Expression

    @classmethod
    def from_text(cls, d: int, f: str) -> GraphSurface:
        return cls(d, parse(f, default_variables(d)[: d - 1]))

    def chart_map(self, base: Sequence[float], order: int) -> Jet:
        d = self.d
        t = Jet.variable(d - 1, d, order)
        return self.tangential_map(base, order).extend() + t * np.eye(d)[-1]

    def tangential_map(self, base: Sequence[float], order: int) -> Jet:
        """(y, f(y)) as a jet in the d - 1 tangential variables."""
        d = self.d
        ys = [Jet.variable(i, d - 1, order, base[i]) for i in range(d - 1)]
        fv = evaluate(self.f, dict(zip(self.f.variables, ys)))
        return Jet.stack(ys + [fv])

    def ambient_point(self, base: Sequence[float]) -> np.ndarray:
        return np.asarray(self.chart_map(base, 0).value())


@dataclass(frozen=True)
class LevelSetSurface:
    """Σ = {s = 0}; normal along ∇s."""

    d: int
    s: Expression

    @classmethod
    def from_text(cls, d: int, s: str) -> LevelSetSurface:
        return cls(d, parse(s, default_variables(d)))

    def chart_map(self, base: Sequence[float], order: int) -> Jet:
        d = self.d
        p = np.asarray(base, dtype=float)
        names = default_variables(d)
        s_at = evaluate(self.s, {n: Jet.variable(i, d, 1, p[i]) for i, n in enumerate(names)})
        val = s_at.value()
        grad = np.array([s_at.coeff(np.eye(d, dtype=int)[i]) for i in range(d)])
        scale = max(1.0, np.linalg.norm(grad))
        if abs(val) > 1e-9 * scale:
            raise DegenerateChartError(f"base point is not on the level set (s = {val:.3e})")
        slope = np.linalg.norm(grad)
        if slope < 1e-12:
            raise DegenerateChartError("level set gradient vanishes at the base point")
        # orthonormal frame with last axis along grad s
        M = np.eye(d)
        M[:, 0] = grad / slope
        Q, _ = np.linalg.qr(M)
        Q = Q[:, list(range(1, d)) + [0]]
        if Q[:, -1] @ grad < 0:
            Q[:, -1] *= -1
        if np.linalg.det(Q) < 0:
            Q[:, 0] *= -1
        ys = [Jet.variable(i, d, order) for i in range(d - 1)]
        t = Jet.variable(d - 1, d, order)
        h = t / slope
        for _ in range(order + 1):
            phi = self._phi(p, Q, ys, h)
            sv = evaluate(self.s, dict(zip(names, phi)))
            h = h - (sv - t) / slope
        return Jet.stack(self._phi(p, Q, ys, h))

    @staticmethod
    def _phi(p, Q, ys, h) -> list[Jet]:
        cols = ys + [h]
        return [sum((Q[a, i] * cols[i] for i in range(len(cols))), start=cols[0] * 0.0) + p[a]
                for a in range(len(p))]


@dataclass(frozen=True)
class ParametrizedSurface:
    """Σ = X(U); the normal is the Euclidean unit normal ν with (∂X, ν) positive."""

    d: int
    X: tuple[Expression, ...] | None = None
    func: Callable[[Sequence[Jet]], Sequence[Jet]] | None = field(default=None, compare=False)

    @classmethod
    def from_text(cls, d: int, X: Sequence[str], params: Sequence[str] = ("u", "v", "r")) -> ParametrizedSurface:
        params = tuple(params)[: d - 1]
        return cls(d, tuple(parse(e, params) for e in X))

    def position(self, us: Sequence[Jet]) -> list[Jet]:
        if self.func is not None:
            return list(self.func(us))
        cache: dict = {}
        return [evaluate(e, dict(zip(e.variables, us)), cache) for e in self.X]

    def chart_map(self, base: Sequence[float], order: int) -> Jet:
        d = self.d
        us = [Jet.variable(i, d - 1, order + 1, base[i]) for i in range(d - 1)]
        X = Jet.stack(self.position(us))
        nu = _normal_of(X)
        t = Jet.variable(d - 1, d, order)
        return X.truncate(order).extend() + t * nu.extend()


def _normal_of(X: Jet) -> Jet:
    """Unit normal of X(u) with jets in the d - 1 parameters only."""
    return euclidean_normal(X, X.dim)


def euclidean_normal(X: Jet, nparams: int | None = None) -> Jet:
    """Unit normal to the tangent columns ∂_i X, i < d - 1 (order drops by one)."""
    d = X.shape[0]
    tang = [X.d(i) for i in range(d - 1 if nparams is None else nparams)]
    comps = []
    for k in range(d):
        e = np.zeros(d)
        e[k] = 1.0
        cols = tang + [Jet.constant(e, X.dim, X.order - 1)]
        comps.append(jets.det(Jet.stack(cols, axis=1)))
    nu = Jet.stack(comps)
    norm2 = einsum("a,a->", nu, nu)
    if norm2.value() < 1e-24:
        raise DegenerateChartError("parametrization is not immersive at the base point")
    return nu * jets.power(norm2, -0.5)


# adapted charts ----------------------------------------------------------------

@dataclass(frozen=True)
class Chart:
    """Metric jets in adapted coordinates (y_1..y_{d-1}, t) with Σ = {t = 0}.

    ``phi`` is the chart map into the original ambient coordinates when known.
    """

    g: Jet
    phi: Jet | None = None
    flat: bool = False
    reduced: Jet | None = None  # t-free part of a graph chart map

    @property
    def d(self) -> int:
        return self.g.shape[0]

    @property
    def order(self) -> int:
        return self.g.order

    @cached_property
    def geometry(self) -> AmbientGeometry:
        if self.flat and self.reduced is not None:
            return flat_pullback_package(self.reduced)
        if self.flat and self.phi is not None:
            return flat_pullback_package(self.phi, self.g)
        return curvature_package(self.g)

    def t(self, order: int | None = None) -> Jet:
        """The adapted coordinate t (the canonical initial defining function)."""
        return Jet.variable(self.d - 1, self.d, self.order if order is None else order)

    @property
    def jacobian(self) -> np.ndarray:
        """∂Φ^a/∂(y, t)^α at the base point (rows α, columns a)."""
        if self.phi is None:
            raise ValueError("abstract chart has no ambient map")
        return np.asarray(self.phi.grad().value())


def adapted_chart(metric: MetricSpec, surface, base: Sequence[float], order: int,
                  orientation: int = 1) -> Chart:
    """Pull the ambient metric back to the adapted chart of ``surface`` at ``base``.

    ``order`` is the jet order of the resulting metric components.
    """
    if metric.d != surface.d:
        raise ValueError("metric and hypersurface dimensions differ")
    phi = surface.chart_map(base, order + 1)
    if orientation == -1:
        d = metric.d
        flip = [Jet.variable(i, d, order + 1) for i in range(d - 1)]
        flip.append(-Jet.variable(d - 1, d, order + 1))
        phi = jets.compose_polynomial(phi, flip)
    elif orientation != 1:
        raise ValueError("orientation must be +1 or -1")
    dphi = phi.grad()  # dphi[α, a]
    if metric.kind == "euclidean":
        g = einsum("ia,ja->ij", dphi, dphi)
    else:
        gx = metric.at([phi[a] for a in range(metric.d)])
        g = einsum("ia,ab,jb->ij", dphi, gx, dphi)
    reduced = None
    if metric.kind == "euclidean" and orientation == 1 and hasattr(surface, "tangential_map"):
        reduced = surface.tangential_map(base, order + 1)
    return Chart(0.5 * (g + g.T), phi, flat=metric.kind == "euclidean", reduced=reduced)
