"""Extrinsic conformal Laplacian powers along Σ.

The holographic operators P_k = (-I⁻² I·D)^k act on weight (k-d+1)/2
tractors; their restrictions to Σ are compared with the closed forms for
k = 2, 3 and with the invariant tractor form of P₃.  Operators are applied
to batches of random jet sections (a passive ``x`` axis) rather than
composed symbolically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import jets
from .ambient import AmbientGeometry
from .hypersurface import HypersurfaceFrame, random_jet
from .jets import Jet, einsum
from .report import Report
from .tractor import (
    ExcludedDimensionError,
    TractorField,
    WeightMismatchError,
    I_dot_D,
    X_tractor,
    connection_matrix,
    scale_tractor,
    tangential_D_scale,
    to_ambient,
    tractor_L,
    tractor_curvature,
    tractor_metric,
    yamabe_weight_operator,
)

_LETTERS = "abcdefghijklmnop"


class NonCanonicalOrderWarning(UserWarning):
    """k exceeds d - 1: the operator depends on the non-canonical part of σ."""


@dataclass(frozen=True)
class ExtrinsicLaplacian:
    """P_k = (-I⁻² I·D)^k for the conformal unit density σ."""

    k: int
    sigma: Jet
    geom: AmbientGeometry
    canonical: bool = True

    @property
    def d(self) -> int:
        return self.geom.d

    @property
    def weight(self) -> float:
        return (self.k - self.d + 1) / 2

    @property
    def target_weight(self) -> float:
        return (-self.k - self.d + 1) / 2

    def __call__(self, T: TractorField) -> TractorField:
        if abs(T.weight - self.weight) > 1e-12:
            raise WeightMismatchError(
                f"P_{self.k} acts on weight {self.weight:g}, got {T.weight:g}"
            )
        return holographic_power(self.sigma, self.geom, T, self.k)


def holographic_power(sigma: Jet, geom: AmbientGeometry, T: TractorField, k: int) -> TractorField:
    """(-I⁻² I·D)^k T, recomputing I·D at each intermediate weight."""
    I = scale_tractor(sigma, geom)
    I2inv = jets.reciprocal(I.square())
    out = T
    for _ in range(k):
        out = I_dot_D(I, out).scaled(-I2inv)
    return out


def build_Pk(dd, k: int) -> ExtrinsicLaplacian:
    """P_k for a conformal unit defining density; flags k > d - 1 as non-canonical."""
    import warnings

    d = dd.geom.d
    if k < 1:
        raise ValueError("k must be a positive integer")
    canonical = k <= d - 1
    if not canonical:
        warnings.warn(
            f"P_{k} in d={d} exceeds the order d-1 at which σ is canonical; the result is not natural",
            NonCanonicalOrderWarning,
            stacklevel=2,
        )
    return ExtrinsicLaplacian(k, dd.sigma, dd.geom, canonical)


def tangentiality_residual(op, sigma: Jet, T: TractorField) -> float:
    """max |(op∘σ)T|_Σ| for T one weight below the operator's domain, relative to max |T|."""
    out = op(T.scaled(sigma, 1.0))
    out = out.comps if isinstance(out, TractorField) else out
    return out.restrict().max_abs() / max(1.0, T.comps.max_abs())


# closed forms ------------------------------------------------------------------------

def _tractor_of(T: TractorField) -> Jet | None:
    return connection_matrix(T.geom) if "T" in T.kinds else None


def laplacian_top(frame: HypersurfaceFrame, T: TractorField) -> Jet:
    """Δ⊤ T = γ^{ab} ∇⊤_a ∇⊤_b T along Σ."""
    A = _tractor_of(T)
    d1 = frame.nabla_top(T.restrict(), T.kinds, A)
    d2 = frame.nabla_top(d1, "l" + T.kinds, A)
    rest = _LETTERS[: T.comps.ndim]
    return einsum(f"PQ,PQ{rest}->{rest}", frame.gamma_top, d2)


def P2_closed(frame: HypersurfaceFrame, T: TractorField) -> Jet:
    """Δ⊤ + ((3-d)/2)(J̄ - K/(2(d-2))) on weight (3-d)/2, along Σ."""
    d = frame.d
    if d < 3:
        raise ExcludedDimensionError("P_2 closed form needs d >= 3")
    w = (3 - d) / 2
    if abs(T.weight - w) > 1e-12:
        raise WeightMismatchError(f"P_2 acts on weight {w:g}, got {T.weight:g}")
    pot = (frame.intrinsic.J - frame.K / (2 * (d - 2))) * w
    rest = _LETTERS[: T.comps.ndim]
    return laplacian_top(frame, T) + einsum(f",{rest}->{rest}", pot, T.restrict())


def yamabe_top(frame: HypersurfaceFrame, T: TractorField) -> Jet:
    """□⊤_Y = Δ⊤ + (3/2 - d/2)(J̄ - K/(2(d-2))) at the boundary Yamabe weight."""
    return P2_closed(frame, T)


def _embedded_up(frame: HypersurfaceFrame, t: Jet) -> Jet:
    """Ambient contravariant components along Σ of a tangential covariant tensor."""
    E = frame.embed_jet(t)
    ginv = frame.geom.ginv.restrict()
    idx = _LETTERS[: E.ndim]
    for ax in range(E.ndim):
        res = idx[:ax] + "Q" + idx[ax + 1 :]
        E = einsum(f"Q{idx[ax]},{idx}->{res}", ginv, E)
    return E


def P3_closed(frame: HypersurfaceFrame, T: TractorField, f_coefficient: float | None = None) -> Jet:
    """The closed form of P₃ on weight (4-d)/2, along Σ (d >= 4).

    ``f_coefficient`` is the coefficient of II̊·𝓕 inside the bracket; the
    default is d - 2.
    """
    d = frame.d
    if d < 4:
        raise ExcludedDimensionError("P_3 closed form needs d >= 4")
    w = (4 - d) / 2
    if abs(T.weight - w) > 1e-12:
        raise WeightMismatchError(f"P_3 acts on weight {w:g}, got {T.weight:g}")
    cF = d - 2 if f_coefficient is None else f_coefficient
    geom = T.geom
    A = connection_matrix(geom)
    kinds = T.kinds
    rest = _LETTERS[2 : 2 + T.comps.ndim]
    Tr = T.restrict()
    d1 = frame.nabla_top(Tr, kinds, A)
    d2 = frame.nabla_top(d1, "l" + kinds, A)
    nu = frame.nhat_up.restrict()
    IIo_up = _embedded_up(frame, frame.IIo)
    div_up = _embedded_up(frame, frame.div_IIo)
    Omega = tractor_curvature(geom)
    Om_r = Omega.restrict()
    ginv = geom.ginv.restrict()
    # n^a Ω_a^b acting on ∇⊤_b T
    nOm = einsum("a,bc,acYZ->bYZ", nu, ginv, Om_r)
    t1 = einsum(f"ab,ab{rest}->{rest}", IIo_up, d2)
    t2 = einsum(f"b,b{rest}->{rest}", div_up, d1) - _act_on(nOm, d1, kinds, lead=1)
    divOm = _curvature_divergence_on_sigma(Omega, geom, A)
    t3 = -0.5 * _act_on(einsum("a,aYZ->YZ", nu, divOm), Tr, kinds, lead=0)
    gbi = frame.gbar_inv
    IIoPbar = einsum("ac,bd,ab,cd->", gbi, gbi, frame.IIo, frame.intrinsic.P)
    scal = frame.divdiv_IIo - (d - 4) * IIoPbar + cF * frame.L
    r0 = _LETTERS[: Tr.ndim]
    t4 = einsum(f",{r0}->{r0}", scal * (-0.5 * (2 - d / 2) / (d - 3)), Tr)
    return -8.0 * (t1 + t2 + t3 + t4)


def _curvature_divergence_on_sigma(Omega: Jet, geom, A: Jet) -> Jet:
    """g^{cb} ∇_c Ω_ab along Σ; contracts before restricting instead of forming ∇Ω."""
    gi, gam, Ar, Om = (j.restrict() for j in (geom.ginv, geom.gamma, A, Omega))
    return (einsum("cb,cabYZ->aYZ", gi, Omega.grad().restrict())
            - einsum("cb,rca,rbYZ->aYZ", gi, gam, Om)
            - einsum("cb,rcb,arYZ->aYZ", gi, gam, Om)
            + einsum("cb,cYr,abrZ->aYZ", gi, Ar, Om)
            - einsum("cb,crZ,abYr->aYZ", gi, Ar, Om))


def _act_on(M: Jet, F: Jet, kinds: str, lead: int) -> Jet:
    """Endomorphism M[(lead axes), Y, Z] acting on every tractor axis of F.

    With ``lead`` = 1 the first axis of M is contracted with the first axis
    of F (a derivative index).
    """
    off = lead
    idx = _LETTERS[: F.ndim]
    out = None
    for p, k in enumerate(kinds):
        if k != "T":
            continue
        pos = p + off
        src = idx[:pos] + "Z" + idx[pos + 1 :]
        res = idx[:pos] + "Y" + idx[pos + 1 :]
        if lead:
            spec = f"{idx[0]}YZ,{src}->{res[1:]}"
        else:
            spec = f"YZ,{src}->{res}"
        term = einsum(spec, M, F)
        out = term if out is None else out + term
    if out is None:  # no tractor axes: the curvature acts trivially
        shape = F.shape[1:] if lead else F.shape
        return Jet.zeros(shape, F.dim, F.order)
    return out


def P3_invariant(frame: HypersurfaceFrame, T: TractorField) -> Jet:
    """-8 L'^{AB} D̂^T_A D̂^T_B + 4 n^a[ℛ♯_a^b∘∇⊤_b + ∇⊤_b∘ℛ♯_a^b] - 4(d-4)L, along Σ.

    L' = L + X X L/(d-3).  The inner D̂^T_B sits at weight 2 - d/2 (where the
    operator formula has a pole) and is taken from the scale formula; the
    outer one is the Yamabe-weight operator.
    """
    d = frame.d
    if d < 4:
        raise ExcludedDimensionError("the invariant form of P_3 needs d >= 4")
    w = (4 - d) / 2
    if abs(T.weight - w) > 1e-12:
        raise WeightMismatchError(f"P_3 acts on weight {w:g}, got {T.weight:g}")
    geom = T.geom
    A = connection_matrix(geom)
    kinds = T.kinds
    U = tangential_D_scale(frame, T)
    Lamb = to_ambient(tractor_L(frame).comps, "TT", frame)
    Xr = X_tractor(geom).restrict()
    Lp = Lamb + einsum(",A,B->AB", frame.L / (d - 3), Xr, Xr)
    core = yamabe_weight_operator(frame, Lp, U, "T" + kinds, A)  # [B, B', rest]
    h = tractor_metric(geom).restrict()
    rest = _LETTERS[: T.comps.ndim]
    core = einsum(f"BC,BC{rest}->{rest}", h, core)
    Tr = T.restrict()
    d1 = frame.nabla_top(Tr, kinds, A)
    nu = frame.nhat_up.restrict()
    Om_r = tractor_curvature(geom).restrict()
    ginv = geom.ginv.restrict()
    Om_up = einsum("bc,acYZ->abYZ", ginv, Om_r)  # Ω_a^b
    nOm = einsum("a,abYZ->bYZ", nu, Om_up)
    first = _act_on(nOm, d1, kinds, lead=1)
    # ∇⊤_b (Ω_a^b T), then contract b and n^a
    OmT = _act_on_pair(Om_up, Tr, kinds)  # [a, b, rest]
    dOmT = frame.nabla_top(OmT, "lu" + kinds, A)  # [c, a, b, rest]
    second = einsum(f"P,QPQ{rest}->{rest}", nu, dOmT)
    r0 = rest
    return (-8.0 * core + 4.0 * (first + second)
            - 4.0 * (d - 4) * einsum(f",{r0}->{r0}", frame.L, Tr))


def _act_on_pair(M: Jet, F: Jet, kinds: str) -> Jet:
    """M[a, b, Y, Z] acting on the tractor axes of F, keeping a, b in front."""
    idx = _LETTERS[2 : 2 + F.ndim]
    out = None
    for p, k in enumerate(kinds):
        if k != "T":
            continue
        src = idx[:p] + "Z" + idx[p + 1 :]
        res = idx[:p] + "Y" + idx[p + 1 :]
        term = einsum(f"abYZ,{src}->ab{res}", M, F)
        out = term if out is None else out + term
    if out is None:
        return Jet.zeros(M.shape[:2] + F.shape, F.dim, F.order)
    return out


# suites ----------------------------------------------------------------------------

def random_sections(geom: AmbientGeometry, weight: float, n: int, order: int,
                    rng: np.random.Generator, tractor: bool = True) -> TractorField:
    """A batch of ``n`` random sections (passive axis last)."""
    d = geom.d
    if tractor:
        return TractorField(random_jet((d + 2, n), d, order, rng), "Tx", weight, geom)
    return TractorField(random_jet((n,), d, order, rng), "x", weight, geom)


def laplacian_suite(dd, n_sections: int = 20, tol: float = 1e-8, rng: np.random.Generator | None = None,
                    frame: HypersurfaceFrame | None = None, tractor: bool = True,
                    tangential_tol: float = 1e-9) -> Report:
    """Closed forms vs holographic P_k, tangentiality, and the negative control."""
    rng = rng or np.random.default_rng(0)
    geom = dd.geom
    d = geom.d
    sig = dd.sigma
    frame = frame or HypersurfaceFrame(geom, sig)
    rep = Report(f"extrinsic Laplacians d={d}")
    for k in (2, 3):
        if k == 3 and d < 4:
            continue
        Pk = ExtrinsicLaplacian(k, sig, geom, k <= d - 1)
        T = random_sections(geom, Pk.weight, n_sections, 2 * k, rng, tractor)
        holo = Pk(T).restrict()
        closed = P2_closed(frame, T) if k == 2 else P3_closed(frame, T)
        o = min(holo.order, closed.order)
        rep.add(f"P{k} closed vs holographic", holo.truncate(o).c, closed.truncate(o).c, tol)
        if k == 3:
            inv = P3_invariant(frame, T)
            o = min(inv.order, closed.order)
            rep.add("P3 invariant form vs closed", inv.truncate(o).c, closed.truncate(o).c, tol)
            if d >= 5:
                alt = P3_closed(frame, T, f_coefficient=-2.0 * (d - 3))
                o = min(holo.order, alt.order)
                res = float(np.max(np.abs(holo.truncate(o).c - alt.truncate(o).c)))
                rep.values["P3 with -2(d-3) F coefficient: residual"] = res
        Ts = random_sections(geom, Pk.weight - 1, n_sections, 2 * k + 1, rng, tractor)
        rep.add_value(f"P{k} tangential", tangentiality_residual(Pk, sig, Ts), tangential_tol)
    # negative control: the plain (tractor-coupled) Laplacian is not tangential
    T = random_sections(geom, (1 - d) / 2, n_sections, 3, rng, tractor)
    lap = lambda F: TractorField(F.laplacian(), F.kinds, F.weight - 2, F.geom)
    ctrl = tangentiality_residual(lap, sig, T)
    rep.values["negative control residual"] = ctrl
    rep.add_value("negative control fails tangentiality", float(ctrl < 1e-2), 0.5,
                  note=f"indicator of residual < 1e-2; residual={ctrl:.3g}")
    return rep
