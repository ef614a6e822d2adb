"""Riemannian data carried as jets.

Conventions (used everywhere in the package):

* ``R_{ab}{}^c{}_d v^d = [∇_a, ∇_b] v^c``; the stored Riemann tensor is
  ``R_{abcd} = g_{ce} R_{ab}{}^e{}_d``.
* ``Ric_{ab} = R_{ca}{}^c{}_b``, so round spheres have positive scalar curvature.
* ``Δ = g^{ab} ∇_a ∇_b``.
* ``J = Sc / (2(d-1))``, ``P = (Ric - J g)/(d-2)``, ``G = Ric - Sc g / 2``.
* Christoffel symbols are stored as ``gamma[c, a, b] = Γ^c_{ab}``.
* Covariant derivatives put the new index first: ``(∇T)[a, ...] = ∇_a T_{...}``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import jets
from .jets import Jet, einsum

_LETTERS = "abcdefghijklmnop"


class UnsupportedDimensionError(ValueError):
    pass


@dataclass(frozen=True)
class AmbientGeometry:
    g: Jet
    ginv: Jet
    gamma: Jet
    riemann: Jet
    ricci: Jet
    sc: Jet
    J: Jet
    P: Jet | None
    W: Jet | None
    G: Jet

    @property
    def d(self) -> int:
        return self.g.shape[0]

    @property
    def order(self) -> int:
        return self.g.order

    def raise_index(self, T: Jet, axis: int = 0) -> Jet:
        n = T.ndim
        idx = _LETTERS[:n]
        out = idx[:axis] + "z" + idx[axis + 1 :]
        return einsum(f"z{idx[axis]},{idx}->{out}", self.ginv, T)

    def dot(self, u: Jet, v: Jet) -> Jet:
        """g^{ab} u_a v_b for covectors."""
        return einsum("ab,a,b->", self.ginv, u, v)


def curvature_package(g: Jet) -> AmbientGeometry:
    """Connection and curvature jets of the metric jet ``g`` (shape (d, d))."""
    d = g.shape[0]
    if g.shape != (d, d):
        raise ValueError("metric must be a square matrix of jets")
    if g.order < 2:
        raise ValueError("curvature needs metric jets of order >= 2")
    g0 = np.asarray(g.value())
    if not np.allclose(g0, g0.T) or np.linalg.eigvalsh(0.5 * (g0 + g0.T)).min() <= 0:
        raise jets.SingularJetError("metric is not positive definite at the base point")
    ginv = jets.inv(g)
    dg = g.grad()  # dg[e, a, b] = ∂_e g_ab
    lower = 0.5 * (dg.transpose(1, 0, 2) + dg.transpose(1, 2, 0) - dg)
    gamma = einsum("cd,dab->cab", ginv, lower)
    dgam = gamma.grad()  # dgam[a, c, b, d] = ∂_a Γ^c_bd
    gg = einsum("cae,ebd->abcd", gamma, gamma)  # the second ΓΓ term is gg with a, b swapped
    rup = dgam.transpose(0, 2, 1, 3) - dgam.transpose(2, 0, 1, 3) + gg - gg.transpose(1, 0, 2, 3)
    riemann = einsum("ce,abed->abcd", g, rup)
    ricci = einsum("cacb->ab", rup)
    sc = einsum("ab,ab->", ginv, ricci)
    J = sc / (2.0 * (d - 1)) if d > 1 else sc * 0.0
    G = ricci - 0.5 * sc * g
    P = W = None
    if d >= 3:
        P = (ricci - J * g) / (d - 2.0)
        W = riemann - kulkarni_nomizu(g, P)
    return AmbientGeometry(g, ginv, gamma, riemann, ricci, sc, J, P, W, G)


def flat_pullback_package(phi: Jet, g: Jet | None = None) -> AmbientGeometry:
    """Geometry of Φ*δ for a chart map Φ into Euclidean space.

    Γ^c_ab = g^{cd} ∂_dΦ·∂_a∂_bΦ and all curvature vanishes; this
    skips the curvature contractions of :func:`curvature_package`.

    A jet ``phi`` in d - 1 variables stands for Φ(y) + t e_last (graph
    charts); the metric and Christoffel symbols are then t-independent and are
    computed in y alone before extending.
    """
    d = phi.shape[0]
    if phi.dim == d - 1:
        rows = [phi.d(i) for i in range(d - 1)]
        e = np.zeros(d)
        e[-1] = 1.0
        dphi = Jet.stack(rows + [Jet.constant(e, d - 1, rows[0].order)])
        second = dphi.grad()  # no t-derivatives: pad a zero column
        c = np.zeros((d, d, d) + second.c.shape[-1:])
        c[: d - 1] = second.c
        second = Jet(second.space, c)
        gr = einsum("ax,bx->ab", dphi, dphi)
        ginv, gamma = _flat_christoffel(dphi, second, 0.5 * (gr + gr.T))
        g, ginv, gamma = gr.extend(), ginv.extend(), gamma.extend()
        g = 0.5 * (g + g.T)
    else:
        dphi = phi.grad()  # dphi[a, x]
        if g is None:
            g = einsum("ax,bx->ab", dphi, dphi)
            g = 0.5 * (g + g.T)
        ginv, gamma = _flat_christoffel(dphi, dphi.grad(), g)
    order = g.order
    if order < 2:
        raise ValueError("curvature needs metric jets of order >= 2")
    zero = lambda shape, o: Jet.zeros(shape, d, o)
    r = order - 2
    ricci = zero((d, d), r)
    sc = zero((), r)
    P = W = None
    if d >= 3:
        P, W = zero((d, d), r), zero((d, d, d, d), r)
    return AmbientGeometry(g, ginv, gamma, zero((d, d, d, d), r), ricci, sc, sc, P, W, ricci)


def _flat_christoffel(dphi: Jet, second: Jet, g: Jet) -> tuple[Jet, Jet]:
    ginv = jets.inv(g)
    lower = einsum("dx,abx->dab", dphi, second)  # Γ_dab = ∂_dΦ · ∂_a∂_bΦ
    return ginv, einsum("cd,dab->cab", ginv, lower)


def kulkarni_nomizu(g: Jet, P: Jet) -> Jet:
    """Schouten part of the curvature: g_ac P_bd - g_bc P_ad + g_bd P_ac - g_ad P_bc."""
    O = einsum("ac,bd->abcd", g, P)
    return O - O.transpose(1, 0, 2, 3) + O.transpose(1, 0, 3, 2) - O.transpose(0, 1, 3, 2)


def schouten_decompose(geom: AmbientGeometry) -> tuple[Jet, Jet, Jet, Jet]:
    """(P, J, W, G) of the geometry."""
    if geom.d < 3:
        raise UnsupportedDimensionError(f"Schouten tensor needs d >= 3, got d={geom.d}")
    return geom.P, geom.J, geom.W, geom.G


@dataclass(frozen=True)
class ConformalFactor:
    omega: Jet

    def __post_init__(self):
        if np.any(np.asarray(self.omega.value()) <= 0):
            raise ValueError("conformal factor must be positive at the base point")

    @property
    def upsilon(self) -> Jet:
        return jets.log(self.omega).grad()


def conformal_rescale(geom: AmbientGeometry, omega: ConformalFactor | Jet) -> AmbientGeometry:
    """Geometry of Ω² g."""
    if isinstance(omega, ConformalFactor):
        omega = omega.omega
    ConformalFactor(omega)
    return curvature_package((omega * omega) * geom.g)


def covariant_derivative(
    T: Jet, geom: AmbientGeometry, kinds: str, tractor: Jet | None = None
) -> Jet:
    """∇_a T with the new index first.

    ``kinds`` names each axis of ``T``: ``l`` covariant, ``u`` contravariant,
    ``T`` tractor and ``t`` dual tractor (both need the tractor connection
    matrix ``tractor[a, B, C]``), ``x`` passive (no connection, e.g. a batch of test sections).
    """
    if len(kinds) != T.ndim:
        raise ValueError(f"kinds {kinds!r} do not match tensor rank {T.ndim}")
    out = T.grad()
    idx = _LETTERS[: T.ndim]
    for p, kind in enumerate(kinds):
        b = idx[p]
        dummy_t = idx[:p] + "r" + idx[p + 1 :]
        if kind == "l":
            out = out - einsum(f"rq{b},{dummy_t}->q{idx}", geom.gamma, T)
        elif kind == "u":
            out = out + einsum(f"{b}qr,{dummy_t}->q{idx}", geom.gamma, T)
        elif kind == "T":
            if tractor is None:
                raise ValueError("tractor index needs the tractor connection")
            out = out + einsum(f"q{b}r,{dummy_t}->q{idx}", tractor, T)
        elif kind == "t":
            if tractor is None:
                raise ValueError("tractor index needs the tractor connection")
            out = out - einsum(f"qr{b},{dummy_t}->q{idx}", tractor, T)
        elif kind != "x":
            raise ValueError(f"unknown index kind {kind!r}")
    return out


def laplacian(T: Jet, geom: AmbientGeometry, kinds: str, tractor: Jet | None = None) -> Jet:
    dT = covariant_derivative(T, geom, kinds, tractor)
    ddT = covariant_derivative(dT, geom, "l" + kinds, tractor)
    rest = _LETTERS[2 : 2 + T.ndim]
    return einsum(f"ab,ab{rest}->{rest}", geom.ginv, ddT)


def curvature_commutator_action(geom: AmbientGeometry, T: Jet, kinds: str) -> Jet:
    """[∇_a, ∇_b] T from curvature contractions (tensor indices only)."""
    rup = einsum("ce,abed->abcd", geom.ginv, geom.riemann)  # R_ab^c_d
    d = geom.d
    out = Jet.zeros((d, d) + T.shape, T.dim, min(T.order, rup.order))
    idx = _LETTERS[2 : 2 + T.ndim]
    for p, kind in enumerate(kinds):
        c = idx[p]
        dummy = idx[:p] + "z" + idx[p + 1 :]
        if kind == "u":
            out = out + einsum(f"ab{c}z,{dummy}->ab{idx}", rup, T)
        elif kind == "l":
            out = out - einsum(f"abz{c},{dummy}->ab{idx}", rup, T)
        elif kind != "x":
            raise ValueError(f"unsupported index kind {kind!r}")
    return out
