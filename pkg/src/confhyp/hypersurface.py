"""Riemannian hypersurface geometry in an adapted chart.

Σ is {t = 0} in the chart, with y the intrinsic coordinates, so intrinsic
tensors are jets in d - 1 variables obtained by restriction.  Tangential
covariant tensors on Σ are embedded in the ambient cotangent space by
annihilating the unit normal vector (see :meth:`HypersurfaceFrame.embed`).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import jets
from .ambient import AmbientGeometry, covariant_derivative, curvature_package, laplacian
from .jets import Jet, einsum
from .report import Report

_LETTERS = "abcdefghijklmnop"


class RecursionFailureError(RuntimeError):
    """An improvement step did not raise the residual order."""


@dataclass(frozen=True)
class DefiningFunction:
    """A defining function s (Σ = {t = 0} in the chart) with |∇s|² = 1 + O(s^{ℓ+1})."""

    s: Jet
    improvement_order: int = -1

    def __post_init__(self):
        if abs(self.s.value()) > 1e-12:
            raise ValueError("defining function must vanish at the base point")
        if self.s.low_last_residual(1) > 1e-10:
            raise ValueError("defining function must vanish on {t = 0}")

    def quotient(self) -> Jet:
        """u = s / t, a unit along Σ."""
        return self.s.divide_last(1)


def unit_residual(s: Jet, geom: AmbientGeometry) -> Jet:
    n = s.grad()
    return geom.dot(n, n) - 1.0


def unit_improve(s0: DefiningFunction | Jet, geom: AmbientGeometry, target_order: int,
                 tol: float = 1e-8) -> DefiningFunction:
    """Unit defining function with |∇s|² = 1 + O(s^{target+1})."""
    s = s0.s if isinstance(s0, DefiningFunction) else s0
    if s.order < target_order + 2:
        raise ValueError(f"jet order {s.order} too low for target {target_order}")
    n2 = geom.dot(s.grad(), s.grad())
    s = jets.power(n2, -0.5).mul_vanishing(s, 1)
    for j in range(1, target_order + 1):
        R = unit_residual(s, geom)
        scale = max(1.0, R.max_abs())
        if R.low_last_residual(j) > tol * scale:
            raise RecursionFailureError(
                f"unit recursion lost order before step {j}: residual {R.low_last_residual(j):.3e}"
            )
        a = R.divide_last(j) * jets.power(s.divide_last(1), -j)
        beta = a * (-1.0 / (2 * (j + 1)))
        s = s + beta.mul_vanishing(s ** (j + 1), j + 1)
    R = unit_residual(s, geom)
    if R.low_last_residual(target_order + 1) > tol * max(1.0, R.max_abs()):
        raise RecursionFailureError(
            f"unit recursion failed at order {target_order}: residual "
            f"{R.low_last_residual(target_order + 1):.3e}"
        )
    return DefiningFunction(s, target_order)


class HypersurfaceFrame:
    """Extrinsic and intrinsic data of Σ = {t = 0} from any defining function."""

    def __init__(self, geom: AmbientGeometry, s: Jet):
        self.geom = geom
        self.s = s
        self.d = geom.d
        d = self.d
        n = s.grad()
        self.n = n
        self.nhat = n * jets.power(geom.dot(n, n), -0.5)
        self.nhat_up = geom.raise_index(self.nhat)
        dn = covariant_derivative(self.nhat, geom, "l")
        self.grad_nhat = dn
        tan = slice(0, d - 1)
        self.gbar = geom.g.restrict()[tan, tan]
        II = dn.restrict()[tan, tan]
        self.II = 0.5 * (II + II.T)

    # intrinsic data ----------------------------------------------------------
    @cached_property
    def intrinsic(self) -> AmbientGeometry:
        return curvature_package(self.gbar)

    @cached_property
    def gbar_inv(self) -> Jet:
        return jets.inv(self.gbar)

    @cached_property
    def H(self) -> Jet:
        return einsum("ab,ab->", self.gbar_inv, self.II) / (self.d - 1.0)

    @cached_property
    def IIo(self) -> Jet:
        return self.II - self.H * self.gbar

    @cached_property
    def K(self) -> Jet:
        return einsum("ac,bd,ab,cd->", self.gbar_inv, self.gbar_inv, self.IIo, self.IIo)

    def tangential(self, T: Jet) -> Jet:
        """Restriction to Σ of an ambient covariant tensor, tangential slots only."""
        tan = slice(0, self.d - 1)
        return T.restrict()[(tan,) * T.ndim]

    @cached_property
    def P_tan(self) -> Jet:
        return self.tangential(self.geom.P)

    @cached_property
    def F(self) -> Jet:
        """Fialkow tensor P⊤ - P̄ + H II̊ + ½ ḡ H² (invariant only for d >= 4)."""
        return self.P_tan - self.intrinsic.P + self.H * self.IIo + 0.5 * (self.H * self.H) * self.gbar

    @cached_property
    def L(self) -> Jet:
        return einsum("ac,bd,ab,cd->", self.gbar_inv, self.gbar_inv, self.IIo, self.F)

    @cached_property
    def grad_IIo(self) -> Jet:
        return covariant_derivative(self.IIo, self.intrinsic, "ll")

    @cached_property
    def div_IIo(self) -> Jet:
        """∇̄^b II̊_{ba}."""
        return einsum("bc,bca->a", self.gbar_inv, self.grad_IIo)

    @cached_property
    def divdiv_IIo(self) -> Jet:
        ddiv = covariant_derivative(self.div_IIo, self.intrinsic, "l")
        return einsum("ab,ab->", self.gbar_inv, ddiv)

    def normal_component(self, T: Jet, axis: int = -1) -> Jet:
        """Restriction to Σ of T contracted with n̂^a on ``axis``, tangential elsewhere."""
        n = self.nhat_up.truncate(min(T.order, self.nhat_up.order))
        idx = "abcdefgh"[: T.ndim]
        axis = axis % T.ndim
        out = idx[:axis] + idx[axis + 1 :]
        return self.tangential(einsum(f"{idx[axis]},{idx}->{out}", n, T))

    # embedding tangential tensors into the ambient space at the base point -------
    @cached_property
    def embedding(self) -> np.ndarray:
        """E[a, i]: ambient covector components of the tangential covector dy^i."""
        d = self.d
        nu = np.asarray(self.nhat_up.value())
        E = np.zeros((d, d - 1))
        E[: d - 1, :] = np.eye(d - 1)
        E[d - 1, :] = -nu[: d - 1] / nu[d - 1]
        return E

    def embed(self, T) -> np.ndarray:
        """Ambient covariant components of a tangential covariant tensor (base point)."""
        T = np.asarray(T.value() if isinstance(T, Jet) else T, dtype=float)
        E = self.embedding
        for ax in range(T.ndim):
            T = np.moveaxis(np.tensordot(E, T, axes=([1], [ax])), 0, ax)
        return T

    # calculus along Σ ---------------------------------------------------------
    @cached_property
    def embedding_jet(self) -> Jet:
        """E[a, i] as jets along Σ (see :attr:`embedding`)."""
        d = self.d
        nu = self.nhat_up.restrict()
        last = -nu[: d - 1] / nu[d - 1]
        E = Jet.zeros((d, d - 1), d - 1, last.order)
        c = E.c.copy()
        c[: d - 1, :, 0] = np.eye(d - 1)
        c[d - 1] = last.c
        return Jet(E.space, c)

    def embed_jet(self, T: Jet) -> Jet:
        """Ambient covariant components, along Σ, of a tangential covariant tensor."""
        out = T
        idx = _LETTERS[: T.ndim]
        for ax in range(T.ndim):
            res = idx[:ax] + "Q" + idx[ax + 1 :]
            out = einsum(f"Q{idx[ax]},{idx}->{res}", self.embedding_jet, out)
        return out

    @cached_property
    def gamma_top(self) -> Jet:
        """γ^{ab} = g^{ab} - n̂^a n̂^b along Σ."""
        nu = self.nhat_up.restrict()
        return self.geom.ginv.restrict() - einsum("a,b->ab", nu, nu)

    def nabla_top(self, F: Jet, kinds: str, tractor: Jet | None = None) -> Jet:
        """∇⊤_a F for F known only along Σ (jets in y); new ambient covector index first.

        Only derivatives along Σ enter, so F needs no extension off Σ.
        """
        if F.dim != self.d - 1:
            raise ValueError("nabla_top acts on fields restricted to Σ")
        t = self.d - 1
        gam = self.geom.gamma.restrict()[:, :t, :]
        A = tractor.restrict()[:t] if tractor is not None else None
        out = F.grad()
        idx = _LETTERS[: F.ndim]
        for p, kind in enumerate(kinds):
            b = idx[p]
            dummy = idx[:p] + "r" + idx[p + 1 :]
            if kind == "l":
                out = out - einsum(f"rq{b},{dummy}->q{idx}", gam, F)
            elif kind == "u":
                out = out + einsum(f"{b}qr,{dummy}->q{idx}", gam, F)
            elif kind == "T":
                out = out + einsum(f"q{b}r,{dummy}->q{idx}", A, F)
            elif kind == "t":
                out = out - einsum(f"qr{b},{dummy}->q{idx}", A, F)
            elif kind != "x":
                raise ValueError(f"unknown index kind {kind!r}")
        return einsum(f"Qq,q{idx}->Q{idx}", self.embedding_jet, out)

    @property
    def nhat0(self) -> np.ndarray:
        return np.asarray(self.nhat.value())

    @property
    def nhat_up0(self) -> np.ndarray:
        return np.asarray(self.nhat_up.value())


def second_fundamental_form(s: DefiningFunction | Jet, geom: AmbientGeometry) -> HypersurfaceFrame:
    s = s.s if isinstance(s, DefiningFunction) else s
    return HypersurfaceFrame(geom, s)


def intrinsic_geometry(frame: HypersurfaceFrame) -> AmbientGeometry:
    return frame.intrinsic


def fialkow_tensor(frame: HypersurfaceFrame) -> tuple[Jet, Jet, bool]:
    """(F, L, invariant) with ``invariant`` False in d = 3."""
    return frame.F, frame.L, frame.d >= 4


def gauss_fialkow_trace_residual(frame: HypersurfaceFrame) -> float:
    """II̊²_ab - ½ ḡ_ab K/(d-2) - W_cabd n̂^c n̂^d - (d-3) F_ab at the base point."""
    from .report import residual

    d = frame.d
    gi = np.asarray(frame.gbar_inv.value())
    IIo = np.asarray(frame.IIo.value())
    lhs = IIo @ gi @ IIo - 0.5 * np.asarray(frame.gbar.value()) * frame.K.value() / (d - 2)
    nu = frame.nhat_up0
    W = np.asarray(frame.geom.W.value())
    Wn = np.einsum("cabd,c,d->ab", W, nu, nu)[: d - 1, : d - 1]
    return residual(lhs - Wn, (d - 3) * np.asarray(frame.F.value()))


def graph_mean_curvature(fx: float, fy: float, fxx: float, fxy: float, fyy: float) -> float:
    """H of the Euclidean graph z = f(x, y), normal along ∇(z - f)."""
    num = fxx + fyy + fy * fy * fxx - 2.0 * fx * fy * fxy + fx * fx * fyy
    return -0.5 * num / (1.0 + fx * fx + fy * fy) ** 1.5


def graph_mean_curvature_check(surface, base, tol: float = 1e-10) -> Report:
    """H from the adapted-chart frame against the graph formula at (x, y)."""
    from .charts import MetricSpec, adapted_chart
    from .expressions import evaluate

    if surface.d != 3:
        raise ValueError("the graph formula is for surfaces in 3 dimensions")
    ch = adapted_chart(MetricSpec.euclidean(3), surface, base, 2)
    H = float(HypersurfaceFrame(ch.geometry, ch.t()).H.value())
    xs = [Jet.variable(i, 2, 2, base[i]) for i in range(2)]
    f = evaluate(surface.f, dict(zip(surface.f.variables, xs)))
    c = lambda a, b: f.coeff(np.array([a, b]))
    ref = graph_mean_curvature(c(1, 0), c(0, 1), 2 * c(2, 0), c(1, 1), 2 * c(0, 2))
    rep = Report("graph mean curvature")
    rep.add("H vs graph formula", H, ref, tol)
    rep.values["H"] = H
    return rep


# identity suite ------------------------------------------------------------------

def riemannian_identity_suite(s: DefiningFunction, geom: AmbientGeometry, tol: float = 1e-8,
                              rng: np.random.Generator | None = None) -> Report:
    """Two-sided checks of the classical hypersurface identities at the base point."""
    if s.improvement_order < 3:
        raise ValueError("identity suite needs a unit defining function improved to order >= 3")
    rng = rng or np.random.default_rng(0)
    rep = Report("riemannian identities")
    fr = HypersurfaceFrame(geom, s.s)
    d = fr.d
    t = d - 1
    gi0 = np.asarray(geom.ginv.value())
    nu = fr.nhat_up0
    nl = fr.nhat0
    II0 = np.asarray(fr.II.value())
    IIa = fr.embed(II0)
    H0 = fr.H.value()
    Rm = np.asarray(geom.riemann.value())
    Ric = np.asarray(geom.ricci.value())

    n = s.s.grad()
    nup = geom.raise_index(n)
    dn = covariant_derivative(n, geom, "l")
    rep.add("unit n.grad n", einsum("a,ba->b", nup, dn).value(), 0.0, tol)

    # Gauss equation
    Rbar = np.asarray(fr.intrinsic.riemann.value())
    Rtan = Rm[:t, :t, :t, :t]
    gauss = Rtan + np.einsum("ac,bd->abcd", II0, II0) - np.einsum("ad,bc->abcd", II0, II0)
    rep.add("gauss", Rbar, gauss, tol)

    # Codazzi-Mainardi
    dII = np.asarray(covariant_derivative(fr.II, fr.intrinsic, "ll").value())
    cod = np.einsum("abcd,d->abc", Rm, nu)[:t, :t, :t]
    rep.add("codazzi", dII - dII.transpose(1, 0, 2), cod, tol)

    # Ricci relation
    gbi = np.asarray(fr.gbar_inv.value())
    IIsq = np.einsum("ac,bd,ab,cd->", gbi, gbi, II0, II0)
    lhs = IIsq - (d - 1) ** 2 * H0**2
    rhs = geom.sc.value() - 2 * nu @ Ric @ nu - fr.intrinsic.sc.value()
    rep.add("ricci relation", lhs, rhs, tol)

    # mean curvature as divergence of the unit normal
    div_n = einsum("ab,ab->", geom.ginv, dn)
    rep.add("H unit", div_n.value(), (d - 1) * H0, tol)

    # third derivatives of s along Σ
    ddd = covariant_derivative(dn, geom, "ll")
    IIsq_amb = IIa @ gi0 @ IIa
    rhs3 = (
        fr.embed(dII)
        - np.einsum("b,ca->abc", nl, IIsq_amb)
        - np.einsum("c,ab->abc", nl, IIsq_amb)
        - np.einsum("a,bc->abc", nl, IIsq_amb)
        - np.einsum("a,bdce,d,e->abc", nl, Rm, nu, nu)
    )
    rep.add("third derivatives", ddd.value(), rhs3, tol)

    # ∇_n ∇_b n_c
    nn_dn = einsum("a,abc->bc", nup, ddd)
    rhs = -IIsq_amb + np.einsum("abcd,a,d->bc", Rm, nu, nu)
    rep.add("II2 unit", nn_dn.value(), rhs, tol)

    # trace: ∇_n ∇·n
    ndiv = einsum("a,a->", nup, div_n.grad())
    rep.add("trII2 unit", ndiv.value(), -IIsq - nu @ Ric @ nu, tol)

    # Laplacians
    f = random_jet((), d, geom.order, rng)
    df = f.grad()
    lap = laplacian(f, geom, "")
    nf = einsum("a,a->", nup, df)
    nnf = einsum("a,a->", nup, nf.grad())
    lhs = lap - div_n * nf - nnf
    rhs = laplacian(f.restrict(), fr.intrinsic, "")
    rep.add("laplace unit", lhs.value(), rhs.value(), tol)

    # Mainardi trace and Laplacian of H
    Pn = fr.normal_component(geom.P, axis=1)
    Ricn = fr.normal_component(geom.ricci, axis=1)
    dH = fr.H.grad()
    mt_lhs = fr.div_IIo - (d - 2) * dH
    rep.add("mainardi trace", mt_lhs.value(), (d - 2) * np.asarray(Pn.value()), tol)

    lapH = laplacian(fr.H, fr.intrinsic, "").value()
    divII = einsum("bc,bca->a", fr.gbar_inv, covariant_derivative(fr.II, fr.intrinsic, "ll"))
    v1 = divII - Ricn
    box1 = einsum("ab,ab->", fr.gbar_inv, covariant_derivative(v1, fr.intrinsic, "l")) / (d - 1.0)
    rep.add("box H (Ricci form)", lapH, box1.value(), tol)
    if d >= 3:
        v2 = fr.div_IIo - (d - 2) * Pn
        box2 = einsum("ab,ab->", fr.gbar_inv, covariant_derivative(v2, fr.intrinsic, "l")) / (d - 2.0)
        rep.add("box H (Schouten form)", lapH, box2.value(), tol)
    rep.values.update({"H": float(H0), "K": float(fr.K.value())})
    return rep


def random_jet(shape: tuple[int, ...], dim: int, order: int, rng: np.random.Generator,
               scale: float = 1.0) -> Jet:
    """Coefficients uniform in [-1/2, 1/2], damped by 1/|α|! for conditioning."""
    sp = jets.jet_space(dim, order)
    from math import factorial

    damp = np.array([1.0 / factorial(int(k)) for k in sp.degree])
    c = rng.uniform(-0.5, 0.5, tuple(shape) + (sp.size,)) * damp * scale
    return Jet(sp, c)
