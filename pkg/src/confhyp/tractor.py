"""Standard tractors in a fixed scale.

A rank-r tractor field is stored with upper tractor indices; each tractor
axis has d + 2 slots ``(v+, v_a, v-)`` where the middle block holds the
*covector* components v_a.  The tractor metric in these components is

    h(V, W) = v+ w- + v- w+ + g^{ab} v_a w_b,

and the connection is

    ∇_a (v+, v_b, v-) = (∇_a v+ - v_a,  ∇_a v_b + g_ab v- + P_ab v+,  ∇_a v- - P_a^c v_c).

Weights are tracked explicitly; jets are the function representatives of
densities in the scale g of the attached geometry.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import jets
from .ambient import AmbientGeometry, conformal_rescale, covariant_derivative, laplacian
from .hypersurface import HypersurfaceFrame, random_jet
from .jets import Jet, einsum

_LETTERS = "abcdefghijklmnop"


class TractorError(ValueError):
    pass


class ExcludedWeightError(TractorError):
    pass


class WeightMismatchError(TractorError):
    pass


class KernelViolationError(TractorError):
    pass


class PreconditionError(TractorError):
    pass


class ExcludedDimensionError(TractorError):
    pass


# structure -----------------------------------------------------------------------

@lru_cache(maxsize=64)
def connection_matrix(geom: AmbientGeometry) -> Jet:
    """A[a, B, C] with ∇_a V^B = ∂_a V^B + A[a, B, C] V^C."""
    d = geom.d
    if geom.P is None:
        raise ExcludedDimensionError("tractor calculus needs d >= 3")
    order = geom.P.order
    gam = geom.gamma.truncate(order)
    P = geom.P
    g = geom.g.truncate(order)
    Pup = einsum("ac,ce->ae", P, geom.ginv)
    c = np.zeros((d, d + 2, d + 2, P.c.shape[-1]))
    for a in range(d):
        c[a, 0, 1 + a, 0] = -1.0
    c[:, 1 : d + 1, 1 : d + 1] = -np.transpose(gam.c, (1, 2, 0, 3))
    c[:, 1 : d + 1, d + 1] = g.c
    c[:, 1 : d + 1, 0] = P.c
    c[:, d + 1, 1 : d + 1] = Pup.c
    c[:, d + 1, 1 : d + 1] *= -1.0
    return Jet(P.space, c)


def tractor_metric(geom: AmbientGeometry, upper: bool = False) -> Jet:
    """h_{AB} acting on upper-stored components (or h^{AB} with ``upper``)."""
    d = geom.d
    mid = geom.g if upper else geom.ginv
    c = np.zeros((d + 2, d + 2, mid.c.shape[-1]))
    c[0, d + 1, 0] = c[d + 1, 0, 0] = 1.0
    c[1 : d + 1, 1 : d + 1] = mid.c
    return Jet(mid.space, c)


def _slots(top: Jet, mid: Jet, bot: Jet) -> Jet:
    """Assemble a new leading tractor axis from its three slot blocks."""
    order = min(top.order, mid.order, bot.order)
    top, mid, bot = top.truncate(order), mid.truncate(order), bot.truncate(order)
    return Jet(top.space, np.concatenate([top.c[None], mid.c, bot.c[None]], axis=0))


def _check_weight(w: float, forbidden: dict[float, str], op: str) -> None:
    for bad, why in forbidden.items():
        if abs(w - bad) < 1e-12:
            raise ExcludedWeightError(f"{op} is undefined at weight w = {bad:g} ({why})")


@dataclass(frozen=True)
class TractorField:
    """Jet components with index kinds (``T`` tractor, ``l`` covector, ``x`` batch) and a weight."""

    comps: Jet
    kinds: str
    weight: float
    geom: AmbientGeometry

    def __post_init__(self):
        if len(self.kinds) != self.comps.ndim:
            raise ValueError(f"kinds {self.kinds!r} do not match components of shape {self.comps.shape}")

    @property
    def d(self) -> int:
        return self.geom.d

    @property
    def rank(self) -> int:
        return self.kinds.count("T")

    def _same(self, other: TractorField) -> None:
        if self.kinds != other.kinds:
            raise TractorError(f"index structure {self.kinds!r} vs {other.kinds!r}")
        if abs(self.weight - other.weight) > 1e-12:
            raise WeightMismatchError(f"cannot combine weights {self.weight:g} and {other.weight:g}")

    def __add__(self, other: TractorField) -> TractorField:
        self._same(other)
        return TractorField(self.comps + other.comps, self.kinds, self.weight, self.geom)

    def __sub__(self, other: TractorField) -> TractorField:
        self._same(other)
        return TractorField(self.comps - other.comps, self.kinds, self.weight, self.geom)

    def __neg__(self) -> TractorField:
        return TractorField(-self.comps, self.kinds, self.weight, self.geom)

    def scaled(self, f, weight: float = 0.0) -> TractorField:
        """Product with a scalar jet (or number) carrying weight ``weight``."""
        if isinstance(f, Jet):
            idx = _LETTERS[: self.comps.ndim]
            comps = einsum(f",{idx}->{idx}", f, self.comps)
        else:
            comps = self.comps * f
        return TractorField(comps, self.kinds, self.weight + weight, self.geom)

    def nabla(self) -> TractorField:
        A = connection_matrix(self.geom) if "T" in self.kinds else None
        comps = covariant_derivative(self.comps, self.geom, self.kinds, A)
        return TractorField(comps, "l" + self.kinds, self.weight, self.geom)

    def laplacian(self) -> Jet:
        A = connection_matrix(self.geom) if "T" in self.kinds else None
        return laplacian(self.comps, self.geom, self.kinds, A)

    def restrict(self) -> Jet:
        return self.comps.restrict()

    def square(self) -> Jet:
        """h(V, V) over the leading tractor axis (other axes kept)."""
        return contract(self, 0, self, 0).comps if self.kinds == "T" else _self_dot(self)

    def to_scale(self, omega: Jet) -> TractorField:
        """Components of the same field in the scale Ω² g."""
        if set(self.kinds) - {"T", "x"}:
            raise TractorError("scale change implemented for tractor and batch indices only")
        geom2 = _rescaled(self.geom, omega)
        M = transition_matrix(self.geom, omega)
        comps = self.comps
        idx = _LETTERS[: comps.ndim]
        for p, k in enumerate(self.kinds):
            if k == "T":
                src = idx[:p] + "Z" + idx[p + 1 :]
                comps = einsum(f"{idx[p]}Z,{src}->{idx}", M, comps)
        comps = einsum(f",{idx}->{idx}", jets.power(omega, self.weight), comps)
        return TractorField(comps, self.kinds, self.weight, geom2)


@lru_cache(maxsize=16)
def _rescaled(geom: AmbientGeometry, omega: Jet) -> AmbientGeometry:
    return conformal_rescale(geom, omega)


def _self_dot(V: TractorField) -> Jet:
    """h(V, V) over the leading tractor axis, remaining axes kept diagonal."""
    h = tractor_metric(V.geom)
    rest = _LETTERS[2 : 1 + V.comps.ndim]
    return einsum(f"AB,A{rest},B{rest}->{rest}", h, V.comps, V.comps)


def transition_matrix(geom: AmbientGeometry, omega: Jet) -> Jet:
    """M with [V]_{Ω²g} = Ω^w M [V]_g on each tractor index."""
    d = geom.d
    ups = jets.log(omega).grad()
    up2 = geom.dot(ups, ups)
    order = up2.order
    om = omega.truncate(order)
    omi = jets.reciprocal(om)
    c = np.zeros((d + 2, d + 2, up2.c.shape[-1]))
    c[0, 0] = om.c
    for a in range(d):
        c[1 + a, 1 + a] = om.c
    c[1 : d + 1, 0] = (ups.truncate(order) * om).c
    c[d + 1, 0] = (-0.5 * up2 * omi).c
    c[d + 1, 1 : d + 1] = (-geom.raise_index(ups).truncate(order) * omi).c
    c[d + 1, d + 1] = omi.c
    return Jet(up2.space, c)


def contract(A: TractorField, ia: int, B: TractorField, ib: int) -> TractorField:
    """h-contraction of tractor axis ``ia`` of A with axis ``ib`` of B."""
    if A.kinds[ia] != "T" or B.kinds[ib] != "T":
        raise TractorError("contraction needs tractor axes")
    h = tractor_metric(A.geom)
    na, nb = A.comps.ndim, B.comps.ndim
    sa = list(_LETTERS[:na])
    sb = list(_LETTERS[na : na + nb])
    sa[ia], sb[ib] = "Y", "Z"
    out_a = [c for i, c in enumerate(sa) if i != ia]
    out_b = [c for i, c in enumerate(sb) if i != ib]
    spec = f"YZ,{''.join(sa)},{''.join(sb)}->{''.join(out_a + out_b)}"
    comps = einsum(spec, h, A.comps, B.comps)
    kinds = A.kinds[:ia] + A.kinds[ia + 1 :] + B.kinds[:ib] + B.kinds[ib + 1 :]
    return TractorField(comps, kinds, A.weight + B.weight, A.geom)


def trace(T: TractorField, i: int, j: int) -> TractorField:
    h = tractor_metric(T.geom)
    n = T.comps.ndim
    s = list(_LETTERS[:n])
    s[i], s[j] = "Y", "Z"
    out = "".join(c for k, c in enumerate(s) if k not in (i, j))
    comps = einsum(f"YZ,{''.join(s)}->{out}", h, T.comps)
    kinds = "".join(k for m, k in enumerate(T.kinds) if m not in (i, j))
    return TractorField(comps, kinds, T.weight, T.geom)


def outer(A: TractorField, B: TractorField) -> TractorField:
    na, nb = A.comps.ndim, B.comps.ndim
    sa, sb = _LETTERS[:na], _LETTERS[na : na + nb]
    comps = einsum(f"{sa},{sb}->{sa}{sb}", A.comps, B.comps)
    return TractorField(comps, A.kinds + B.kinds, A.weight + B.weight, A.geom)


# canonical tractors and the Thomas D-operator --------------------------------------

def X_tractor(geom: AmbientGeometry, order: int | None = None) -> TractorField:
    d = geom.d
    order = geom.order if order is None else order
    c = np.zeros(d + 2)
    c[d + 1] = 1.0
    return TractorField(Jet.constant(c, d, order), "T", 1.0, geom)


def density(f: Jet, weight: float, geom: AmbientGeometry, kinds: str = "") -> TractorField:
    return TractorField(f, kinds, weight, geom)


def thomas_D(V: TractorField, hatted: bool = False) -> TractorField:
    """D^A V = ((d+2w-2) w V, (d+2w-2) ∇V, -(Δ + wJ) V); D̂ = D/(d+2w-2)."""
    d, w = V.d, V.weight
    fac = d + 2 * w - 2
    if hatted:
        _check_weight(w, {1 - d / 2: "d + 2w - 2 = 0"}, "D-hat")
    dV = V.nabla().comps
    lap = V.laplacian()
    top = V.comps * (fac * w)
    mid = dV * fac
    bot = -(lap + einsum(f",{_LETTERS[:V.comps.ndim]}->{_LETTERS[:V.comps.ndim]}",
                         V.geom.J * w, V.comps))
    comps = _slots(top, mid, bot)
    if hatted:
        comps = comps * (1.0 / fac)
    return TractorField(comps, "T" + V.kinds, w - 1, V.geom)


def scale_tractor(sigma: Jet, geom: AmbientGeometry) -> TractorField:
    """I_σ = D̂σ = (σ, ∇σ, ρ) for σ of weight 1."""
    return thomas_D(density(sigma, 1.0, geom), hatted=True)


def I_dot_D(I: TractorField, V: TractorField, hatted: bool = False) -> TractorField:
    """Laplace-Robin operator I·D (or I·D̂) on V."""
    return contract(I, 0, thomas_D(V, hatted), 0)


def I_inv_ID(I: TractorField, V: TractorField, I2inv: Jet | None = None) -> TractorField:
    """(1/I²) I·D V."""
    I2inv = jets.reciprocal(I.square()) if I2inv is None else I2inv
    return I_dot_D(I, V).scaled(I2inv)


def P_tractor(I: TractorField) -> TractorField:
    """P^{AB} = D̂^A I^B (weight -1)."""
    return thomas_D(I, hatted=True)


# splitting maps ------------------------------------------------------------------

def q_split(t: Jet, w: float, geom: AmbientGeometry) -> TractorField:
    """Rank-two tractor of weight w from a trace-free symmetric t_ab of weight w + 2."""
    d = geom.d
    _check_weight(w, {1 - d: "d + w - 1 = 0", -d: "d + w = 0"}, "the splitting map q")
    A = d + w
    dt = covariant_derivative(t, geom, "ll")
    div = einsum("bc,bca->a", geom.ginv, dt)
    ddiv = einsum("ab,ab->", geom.ginv, covariant_derivative(div, geom, "l"))
    Pt = einsum("ac,bd,ab,cd->", geom.ginv, geom.ginv, geom.P, t)
    corner = (ddiv + A * Pt) / (A * (A - 1))
    order = corner.order
    c = np.zeros((d + 2, d + 2, corner.c.shape[-1]))
    c[1 : d + 1, 1 : d + 1] = t.truncate(order).c
    c[1 : d + 1, d + 1] = c[d + 1, 1 : d + 1] = (-div.truncate(order) / A).c
    c[d + 1, d + 1] = corner.c
    return TractorField(Jet(corner.space, c), "TT", w, geom)


def q_star(T: TractorField, along_sigma: bool = False, tol: float = 1e-9) -> Jet:
    """Middle block of T ∈ ker(X⌟) (or ker_Σ with ``along_sigma``)."""
    d = T.d
    top = T.comps[0]
    resid = (top.restrict() if along_sigma else top).max_abs()
    if resid > tol * max(1.0, T.comps.max_abs()):
        raise KernelViolationError(f"X⌟T does not vanish{' along Σ' if along_sigma else ''} ({resid:.3e})")
    return T.comps[1 : d + 1, 1 : d + 1]


def tractor_L(frame: HypersurfaceFrame) -> TractorField:
    """Tractor second fundamental form q(II̊) on Σ, in the intrinsic scale ḡ."""
    if frame.d < 4:
        raise ExcludedDimensionError("the tractor second fundamental form has a pole at d = 3")
    return q_split(frame.IIo, -1.0, frame.intrinsic)


# ambient and hypersurface tractors along Σ ----------------------------------------------

def _apply_on_tractor_axes(M: Jet, comps: Jet, kinds: str) -> Jet:
    idx = _LETTERS[: comps.ndim]
    for p, k in enumerate(kinds):
        if k == "T":
            src = idx[:p] + "Z" + idx[p + 1 :]
            comps = einsum(f"{idx[p]}Z,{src}->{idx}", M, comps)
    return comps


def intrinsic_map(frame: HypersurfaceFrame) -> Jet:
    """U: N⊥ ⊂ ambient tractors along Σ → intrinsic tractors, shape (d+1, d+2)."""
    d = frame.d
    H = frame.H
    nl = frame.nhat.restrict()
    nu = frame.nhat_up.restrict()
    order = min(H.order, nl.order)
    c = np.zeros((d + 1, d + 2, H.c.shape[-1]))
    c[0, 0, 0] = 1.0
    for i in range(d - 1):
        c[1 + i, 1 + i, 0] = 1.0
    c[1:d, 0] = (-(nl[: d - 1] * H)).truncate(order).c
    c[d, 0] = (-0.5 * H * H).truncate(order).c
    c[d, 1 : d + 1] = (nu * H).truncate(order).c
    c[d, d + 1, 0] = 1.0
    return Jet(jets.jet_space(d - 1, order), c)


def ambient_map(frame: HypersurfaceFrame) -> Jet:
    """Inverse of :func:`intrinsic_map` onto N⊥, shape (d+2, d+1)."""
    d = frame.d
    H = frame.H
    nl = frame.nhat.restrict()
    E = frame.embedding_jet
    order = min(H.order, nl.order, E.order)
    c = np.zeros((d + 2, d + 1, H.c.shape[-1]))
    c[0, 0, 0] = 1.0
    c[1 : d + 1, 1:d] = E.truncate(order).c
    c[1 : d + 1, 0] = (nl * H).truncate(order).c
    c[d + 1, 0] = (-0.5 * H * H).truncate(order).c
    c[d + 1, d, 0] = 1.0
    return Jet(jets.jet_space(d - 1, order), c)


def to_intrinsic(comps: Jet, kinds: str, frame: HypersurfaceFrame) -> Jet:
    return _apply_on_tractor_axes(intrinsic_map(frame), comps, kinds)


def to_ambient(comps: Jet, kinds: str, frame: HypersurfaceFrame) -> Jet:
    return _apply_on_tractor_axes(ambient_map(frame), comps, kinds)


def normal_tractor(frame: HypersurfaceFrame) -> Jet:
    """N = (0, n̂, -H) along Σ."""
    return _slots(frame.H * 0.0, frame.nhat.restrict(), -frame.H)


# tangential Thomas D ------------------------------------------------------------------

def tangential_D(I: TractorField, V: TractorField, I2inv: Jet | None = None) -> TractorField:
    """D̂^T = D̂ - Î(Î·D̂) + I²/(h(h-1)(h-2)) X (I⁻² I·D)², h = d + 2w - 2."""
    d, w = V.d, V.weight
    _check_weight(w, {1 - d / 2: "h = 0", 1.5 - d / 2: "h = 1", 2 - d / 2: "h = 2"},
                  "the tangential Thomas D-operator")
    h = d + 2 * w - 2
    I2 = I.square()
    I2inv = jets.reciprocal(I2) if I2inv is None else I2inv
    DV = thomas_D(V, hatted=True)
    IDV = contract(I, 0, DV, 0)
    term2 = outer(I, IDV).scaled(I2inv)
    sq = I_inv_ID(I, I_inv_ID(I, V, I2inv), I2inv)
    X = X_tractor(V.geom, I.comps.order)
    term3 = outer(X, sq).scaled(I2 / (h * (h - 1) * (h - 2)))
    out = DV - TractorField(term2.comps, DV.kinds, DV.weight, DV.geom)
    return out + TractorField(term3.comps, DV.kinds, DV.weight, DV.geom)


def tangential_D_scale(frame: HypersurfaceFrame, V: TractorField) -> Jet:
    """The scale formula for D̂^T along Σ (conformal unit σ), as jets on Σ.

    Only ∇⊤ enters, so V is used through its restriction; valid whenever
    d + 2w - 3 ≠ 0, including the weights excluded by the operator form.
    """
    d, w = V.d, V.weight
    if abs(d + 2 * w - 3) < 1e-12:
        raise ExcludedWeightError(f"scale formula for D-hat^T is singular at w = {(3 - d) / 2:g}")
    A = connection_matrix(V.geom) if "T" in V.kinds else None
    Vr = V.restrict()
    dV = frame.nabla_top(Vr, V.kinds, A)
    ddV = frame.nabla_top(dV, "l" + V.kinds, A)
    rest = _LETTERS[2 : 2 + Vr.ndim]
    lapV = einsum(f"PQ,PQ{rest}->{rest}", frame.gamma_top, ddV)
    scal = -(frame.intrinsic.J * w) / (d + 2 * w - 3) + frame.K * (w / (2 * (d - 2) * (d + 2 * w - 3)))
    idx = _LETTERS[: Vr.ndim]
    top = Vr * w
    bot = -lapV / (d + 2 * w - 3) + einsum(f",{idx}->{idx}", scal, Vr)
    H = frame.H
    nl = frame.nhat.restrict()
    nu = frame.nhat_up.restrict()
    mid = dV + einsum(f"Q,{idx}->Q{idx}", nl * H, top)
    bot = bot - einsum(f",{idx}->{idx}", 0.5 * H * H, top) - einsum(f"Q,Q{idx}->{idx}", nu * H, dV)
    return _slots(top, mid, bot)


def yamabe_weight_operator(frame: HypersurfaceFrame, V: Jet, U: Jet, kinds: str,
                           tractor: Jet | None = None, tol: float = 1e-8) -> Jet:
    """V^A D̂^T_A U = v^a ∇⊤_a U + (1 - d/2) v⁻ U along Σ, U of weight 1 - d/2.

    V is a coefficient (not differentiated) with its tractor index first;
    the result has V's remaining axes followed by U's axes.  Requires
    X·V = 0 and N·V = 0 on Σ.
    """
    d = frame.d
    scale = max(1.0, V.max_abs())
    if V[0].max_abs() > tol * scale:
        raise PreconditionError("X·V must vanish for the Yamabe-weight operator")
    vr = _LETTERS[1 : V.ndim]
    nv = einsum(f"A,A{vr}->{vr}", _lower(frame, normal_tractor(frame)), V)
    if nv.max_abs() > tol * scale:
        raise PreconditionError("N·V must vanish along Σ for the Yamabe-weight operator")
    dU = frame.nabla_top(U, kinds, tractor)
    ginv = frame.geom.ginv.restrict()
    ur = "qrstuvw"[: U.ndim]
    first = einsum(f"PQ,Q{vr},P{ur}->{vr}{ur}", ginv, V[1 : d + 1], dU)
    second = einsum(f"{vr},{ur}->{vr}{ur}", V[d + 1], U) * (1 - d / 2)
    return first + second


def _lower(frame: HypersurfaceFrame, V: Jet) -> Jet:
    """h_{AB} V^B along Σ for a rank-one tractor."""
    h = tractor_metric(frame.geom).restrict()
    return einsum("AB,B->A", h, V)


def tractor_curvature(geom: AmbientGeometry) -> Jet:
    """Ω[a, b, C, D] = ([∇_a, ∇_b] V)^C for V = e_D."""
    d = geom.d
    A = connection_matrix(geom)
    E = Jet.constant(np.eye(d + 2), d, A.order)
    dd_ = covariant_derivative(covariant_derivative(E, geom, "Tx", A), geom, "lTx", A)
    return dd_ - dd_.transpose(1, 0, 2, 3)


def laplace_robin_sigma(I: TractorField, V: TractorField) -> Jet:
    """I·D̂ V along Σ = {σ = 0}, as jets on Σ.

    Away from w = 1 - d/2 this is the restriction of the full operator.  At
    that weight only the σ-free part survives on Σ, and the restriction is
    the limit (∇_n + wρ)V with n = ∇σ.
    """
    d, w = V.d, V.weight
    if abs(d + 2 * w - 2) > 1e-12:
        return I_dot_D(I, V, hatted=True).restrict()
    geom = V.geom
    dV = V.nabla().comps
    n_up = geom.raise_index(I.comps[1 : d + 1])
    idx = _LETTERS[: V.comps.ndim]
    out = einsum(f"Q,Q{idx}->{idx}", n_up, dV) + einsum(f",{idx}->{idx}", I.comps[d + 1] * w, V.comps)
    return out.restrict()


def fialkow_gauss_transport(frame: HypersurfaceFrame, V: TractorField,
                            tol: float = 1e-8) -> tuple[Jet, Jet, Jet]:
    """Both sides of the Fialkow–Gauß formula for a rank-one V ⟂ N along Σ.

    Returns U Σ∇⊤V, U(∇⊤V + N L_c^B V_B) and ∇̄V̄ + F̄V̄, each with the
    derivative index tangential (first axis, d - 1 slots) and the tractor
    index intrinsic.
    """
    d = frame.d
    if d < 4:
        raise ExcludedDimensionError("the Fialkow–Gauß formula needs d >= 4")
    if V.kinds != "T":
        raise TractorError("transport is implemented for rank-one tractors")
    N = normal_tractor(frame)
    Nl = _lower(frame, N)
    Vr = V.restrict()
    if einsum("A,A->", Nl, Vr).max_abs() > tol * max(1.0, Vr.max_abs()):
        raise PreconditionError("V must be orthogonal to the normal tractor along Σ")
    dV = frame.nabla_top(Vr, "T", connection_matrix(V.geom))[: d - 1]
    proj = dV - einsum("A,B,cB->cA", N, Nl, dV)
    # L_c^B: middle slot of the first index of L, pulled back to Σ
    Lc = to_ambient(tractor_L(frame).comps, "TT", frame)[1:d]
    alt = dV + einsum("A,cB,B->cA", N, Lc, _lower(frame, Vr))
    U = intrinsic_map(frame)
    Vbar = einsum("AB,B->A", U, Vr)
    ig = frame.intrinsic
    dVbar = covariant_derivative(Vbar, ig, "T", connection_matrix(ig))
    F = frame.F
    Fup = einsum("cb,ab->ca", F, frame.gbar_inv)
    FV = _slots(F[0] * 0.0, einsum("ca,->ac", F, Vbar[0]), -einsum("cb,b->c", Fup, Vbar[1:d]))
    return (einsum("AB,cB->cA", U, proj), einsum("AB,cB->cA", U, alt),
            dVbar + FV.transpose(1, 0))


# identity suite -------------------------------------------------------------------

def _jet_residual(a: Jet, b: Jet) -> tuple[np.ndarray, np.ndarray]:
    """Coefficient arrays of a and b at their common order (all Taylor data compared)."""
    o = min(a.order, b.order)
    return a.truncate(o).c, b.truncate(o).c


def _generic_weight(rng: np.random.Generator, d: int, avoid_shift: float = 0.0) -> float:
    """A weight at distance > 0.15 from every pole used in the suite."""
    poles = [1 - d / 2, 1.5 - d / 2, 2 - d / 2, -d / 2, (3 - d) / 2, 1 - d, -d, 0.5 - d / 2]
    poles += [p - avoid_shift for p in poles] + [p - 1 for p in poles] + [p - 2 for p in poles]
    while True:
        w = float(rng.uniform(-1.5, 1.5))
        if min(abs(w - p) for p in poles) > 0.15:
            return w


def tractor_identity_suite(dd, tol: float = 1e-9, rng: np.random.Generator | None = None,
                           frame: HypersurfaceFrame | None = None, section_order: int = 6):
    """Residuals of the tractor identities for a conformal unit defining density ``dd``.

    Every comparison uses all Taylor coefficients available at the common
    jet order (along Σ for the hypersurface statements).
    """
    from .report import Report

    rng = rng or np.random.default_rng(0)
    geom = dd.geom
    d = geom.d
    sig = dd.sigma
    frame = frame or HypersurfaceFrame(geom, sig)
    rep = Report(f"tractor identities d={d}")
    add = lambda name, a, b, t=tol: rep.add(name, *_jet_residual(a, b), t)
    addj = lambda name, a, t=tol: rep.add_value(name, a.max_abs(), t)

    def section(w, kinds="T"):
        shape = tuple(d + 2 if k == "T" else 3 for k in kinds)
        return TractorField(random_jet(shape, d, section_order, rng), kinds, w, geom)

    def dens(w):
        return TractorField(random_jet((), d, section_order, rng), "", w, geom)

    I = scale_tractor(sig, geom)
    X = X_tractor(geom)
    I2 = I.square()
    I2inv = jets.reciprocal(I2)
    h = tractor_metric(geom)

    # structure
    eig = np.linalg.eigvalsh(np.asarray(h.value()))
    rep.add_value("metric signature", float((eig > 0).sum() != d + 1 or (eig < 0).sum() != 1), 0.5)
    addj("metricity", covariant_derivative(h, geom, "tt", connection_matrix(geom)))
    addj("X.X = 0", contract(X, 0, X, 0).comps)
    add("X.I = sigma", contract(X, 0, I, 0).comps, sig)
    from .yamabe import s_functional
    add("I^2 = S", I2, s_functional(geom, sig))
    add("I|Σ = N", I.restrict(), normal_tractor(frame))
    nablaX = X.nabla().comps
    # middle slot holds covector components: g_ab, i.e. δ_a^b with the index raised
    add("grad X", nablaX, _slots(geom.g[0] * 0.0, geom.g, geom.g[0] * 0.0).transpose(1, 0))

    rep.extend(scale_covariance_checks(geom, sig, rng, tol, section_order))

    # weights and the Thomas operator
    w = _generic_weight(rng, d)
    V = section(w)
    DV = thomas_D(V, hatted=True)
    add("X.D̂V = wV", contract(X, 0, DV, 0).comps, V.comps * w)
    f = dens(w)
    DXf = trace(thomas_D(outer(X, f)), 0, 1)
    add("D.X = (d+w)(d+2w+2)", DXf.comps, f.comps * ((d + w) * (d + 2 * w + 2)))

    # sl(2)
    sV = V.scaled(sig, 1.0)
    add("sl2 [d+2w, σ] = 2σ", sV.comps * (d + 2 * sV.weight) - einsum(",a->a", sig, V.comps) * (d + 2 * w),
        2.0 * sV.comps)
    lhs = I_inv_ID(I, sV, I2inv).comps - einsum(",a->a", sig, I_inv_ID(I, V, I2inv).comps)
    add("sl2 [I.D/I², σ] = d+2w", lhs, V.comps * (d + 2 * w))
    Y = I_inv_ID(I, V, I2inv)
    add("sl2 [d+2w, I.D/I²] = -2 I.D/I²", Y.comps * (d + 2 * Y.weight) - Y.comps * (d + 2 * w), -2.0 * Y.comps)

    # modified Leibniz rule
    w1, w2 = _generic_weight(rng, d), _generic_weight(rng, d)
    while min(abs(w1 + w2 - (1 - d / 2)), abs(d + 2 * (w1 + w2) - 2)) < 0.2:
        w2 = _generic_weight(rng, d)
    T1, T2 = section(w1), dens(w2)
    lhs = (thomas_D(outer(T1, T2), True).comps - outer(thomas_D(T1, True), T2).comps
           - outer(T1, thomas_D(T2, True)).comps.transpose(1, 0))
    cross = contract(thomas_D(T1, True), 0, thomas_D(T2, True), 0)
    rhs = outer(X, cross).comps * (-2.0 / (d + 2 * w1 + 2 * w2 - 2))
    add("modified Leibniz", lhs, rhs)

    # [D̂, σ^k]
    for k in (1, 2, 3):
        wk = w
        while min(abs(wk - (1 - d / 2)), abs(wk - (1 - k - d / 2))) < 0.2:
            wk = _generic_weight(rng, d)
        Vk = section(wk)
        sk = sig**k
        lhs = thomas_D(Vk.scaled(sk, k), True).comps - einsum(",AB->AB", sk, thomas_D(Vk, True).comps)
        sk1 = sig ** (k - 1) if k > 1 else sig * 0.0 + 1.0
        IDV = I_dot_D(I, Vk).comps
        rhs = einsum(",A,B->AB", sk1 * k, I.comps, Vk.comps)
        rhs = rhs - einsum(",A,B->AB", sk1, X.comps, IDV) * (
            2 * k / ((d + 2 * k + 2 * wk - 2) * (d + 2 * wk - 2)))
        if k >= 2:
            sk2 = sig ** (k - 2) if k > 2 else sig * 0.0 + 1.0
            rhs = rhs - einsum(",A,B->AB", sk2 * I2, X.comps, Vk.comps) * (k * (k - 1) / (d + 2 * k + 2 * wk - 2))
        add(f"[D̂, σ^{k}]", lhs, rhs)

    # hypersurface statements
    P = P_tractor(I)
    addj("X⌟P = 0", contract(X, 0, P, 0).comps)
    addj("P symmetric", P.comps - P.comps.transpose(1, 0))
    addj("P trace-free", trace(P, 0, 1).comps)
    K_ext = TractorField(_full_square(P), "", -2.0, geom)
    add("q*(P) = II̊", q_star(P, along_sigma=True).restrict(), frame.embed_jet(frame.IIo))
    add("P.P = K", K_ext.restrict(), frame.K)
    IP = contract(I, 0, P, 0)
    rhs = thomas_D(TractorField(I2, "", 0.0, geom), True).comps * 0.5 + einsum(",A->A", K_ext.comps / (d - 2), X.comps)
    add("I.P exact", IP.comps, rhs)
    add("I.P on Σ", IP.restrict(), einsum(",A->A", frame.K / (d - 2), X.restrict()))

    gradI = I.nabla().restrict()
    nl = frame.nhat.restrict()
    IIo_amb = frame.embed_jet(frame.IIo)
    div_amb = frame.embed_jet(frame.div_IIo)
    bottom = -(div_amb - nl * frame.K) / (d - 2)
    add("grad I on Σ", gradI, _slots(nl * 0.0, IIo_amb.transpose(1, 0), bottom).transpose(1, 0))

    nabla_K = laplace_robin_sigma(I, K_ext)
    if d >= 4:
        add("Kdot", nabla_K, -2.0 * (d - 3) * frame.L)
    else:
        addj("Kdot", nabla_K)

    if d >= 4:
        hup = tractor_metric(geom, upper=True)
        inner = laplace_robin_sigma(I, P) + einsum(",AB->AB", K_ext.restrict() / (d - 2), hup.restrict())
        q = inner[1 : d + 1, 1 : d + 1][: d - 1, : d - 1]
        add("holographic Fialkow", q, -(d - 3) * frame.F + frame.gbar * (3 * frame.K / (2 * (d - 2))))

        L = tractor_L(frame)
        Lamb = to_ambient(L.comps, "TT", frame)
        Xr, Ir = X.restrict(), I.restrict()
        XX = einsum("A,B->AB", Xr, Xr)
        lhs = (P.restrict()
               - einsum(",A,B->AB", K_ext.restrict() / (d - 2), Ir, Xr)
               - einsum(",A,B->AB", K_ext.restrict() / (d - 2), Xr, Ir)
               + einsum(",AB->AB", nabla_K / ((d - 2) * (d - 3)), XX))
        rhs = Lamb + einsum(",AB->AB", frame.L / (d - 3), XX)
        add("holographic L", lhs, rhs)
        add("q*(L) = II̊", q_star(L), frame.IIo)
        addj("L trace-free", trace(L, 0, 1).comps)

        # DTII: the tangential operator on N (extended by I)
        if abs(d - 4) < 1e-12:
            DTN = tangential_D_scale(frame, I)
        else:
            DTN = tangential_D(I, I, I2inv).restrict()
        rhs = Lamb + einsum(",A,B->AB", frame.K / (d - 3), Xr, Ir) + einsum(",AB->AB", frame.L / (d - 3), XX)
        add("D̂^T N", DTN, rhs)

        # ΔI along Σ
        lapI = I.laplacian().restrict()
        IIoPbar = einsum("ac,bd,ab,cd->", frame.gbar_inv, frame.gbar_inv, frame.IIo, frame.intrinsic.P)
        bot = (-(frame.divdiv_IIo + (d - 2) * IIoPbar) / (d - 3) + 2 * frame.H * frame.K
               - (3 * d - 8) / (d - 3) * frame.L)
        add("Laplacian of I", lapI, _slots(frame.H * 0.0, div_amb - nl * frame.K, bot))

        # Fialkow–Gauß transport of a section orthogonal to I
        Vt = section(w)
        Vt = TractorField(Vt.comps - einsum(",A->A", contract(I, 0, Vt, 0).comps * I2inv, I.comps), "T", w, geom)
        a, b, c = fialkow_gauss_transport(frame, Vt)
        add("Fialkow-Gauss (projector)", a, c)
        add("Fialkow-Gauss (L form)", b, c)

    # Robin, tangentiality and the scale formula
    f = dens(w)
    nu = frame.nhat_up.restrict()
    dnf = einsum("a,a->", nu, f.nabla().restrict())
    add("Robin I.D̂", laplace_robin_sigma(I, f), dnf - frame.H * f.restrict() * w)
    T0 = section(w)
    add_dt = tangential_D(I, T0.scaled(sig, 1.0), I2inv).restrict()
    addj("D̂^T∘σ = 0 on Σ", add_dt)
    add("D̂^T scale form", tangential_D(I, T0, I2inv).restrict(), tangential_D_scale(frame, T0))
    wb = w
    while min(abs(wb + 1 + d / 2 - p) for p in (1, 1.5, 2)) < 0.2 or abs(d + 2 * wb - 1) < 0.2:
        wb = _generic_weight(rng, d)
    Tb = section(wb)
    DXT = trace(tangential_D(I, outer(X, Tb), I2inv), 0, 1).restrict()
    add("D̂^T(XT)", DXT, Tb.restrict() * ((d + 2 * wb + 1) * (d + wb - 1) / (d + 2 * wb - 1)))

    # (I.D)^2 along Σ
    fw = dens(w)
    ID2 = I_dot_D(I, I_dot_D(I, fw)).restrict()
    nup_full = geom.raise_index(sig.grad())
    dn = lambda F: einsum("a,a->", nup_full, F.grad())
    n1 = dn(fw.comps)
    n2 = dn(n1).restrict()
    H = frame.H
    ddf = frame.nabla_top(frame.nabla_top(fw.restrict(), ""), "l")
    lap_top = einsum("ab,ab->", frame.gamma_top, ddf)
    Pnn = einsum("a,b,ab->", nu, nu, geom.P.restrict())
    Kd = frame.K / (d - 2)
    fr_ = fw.restrict()
    inner = n2 - w * (2 * H * n1.restrict() - (Pnn + Kd + (2 * w - 1) * H * H / 2) * fr_)
    rhs = -(d + 2 * w - 4) * (lap_top + w * (frame.intrinsic.J - 0.5 * Kd) * fr_ - (d + 2 * w - 3) * inner)
    add("(I.D)^2 on Σ", ID2, rhs)
    add("Laplacian split on Σ", fw.laplacian().restrict(), lap_top + n2 + (d - 2) * H * n1.restrict())
    return rep


def _full_square(P: TractorField) -> Jet:
    """P^{AB} P_{AB}."""
    h = tractor_metric(P.geom)
    return einsum("AC,BD,AB,CD->", h, h, P.comps, P.comps)


def scale_covariance_checks(geom: AmbientGeometry, sigma: Jet, rng: np.random.Generator,
                            tol: float = 1e-9, section_order: int = 6):
    """Scale changes g → Ω²g: roundtrip, invariance of V² and of I·D̂ contractions."""
    from .random_instances import random_unit_factor
    from .report import Report

    from .ambient import curvature_package

    d = geom.d
    rep = Report("scale covariance")
    # covariance is order by order, so a truncated geometry suffices
    order = min(geom.order, section_order)
    geom = curvature_package(geom.g.truncate(order))
    sigma = sigma.truncate(order)
    omega = random_unit_factor(d, order, rng)
    w = _generic_weight(rng, d)
    V = TractorField(random_jet((d + 2,), d, section_order, rng), "T", w, geom)
    W = TractorField(random_jet((d + 2,), d, section_order, rng), "T", 0.5, geom)
    Vh = V.to_scale(omega)
    back = Vh.to_scale(jets.reciprocal(omega))
    rep.add("scale roundtrip", *_jet_residual(back.comps, V.comps), tol)
    rep.add("V^2 scale invariant", *_jet_residual(Vh.square(), V.square() * jets.power(omega, 2 * w)), tol)
    I = scale_tractor(sigma, geom)
    Ih = scale_tractor(omega * sigma, Vh.geom)  # same geometry object as the converted fields
    rep.add("I_σ covariant", *_jet_residual(Ih.comps, I.to_scale(omega).comps), tol)
    s = contract(W, 0, I_dot_D(I, V, hatted=True), 0)
    sh = contract(W.to_scale(omega), 0, I_dot_D(Ih, Vh, hatted=True), 0)
    rep.add("W.(I.D̂V) scale invariant", *_jet_residual(sh.comps, s.comps * jets.power(omega, s.weight)), tol)
    rep.add("D̂ covariant", *_jet_residual(thomas_D(Vh, True).comps, thomas_D(V, True).to_scale(omega).comps), tol)
    return rep
