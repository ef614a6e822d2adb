"""Asymptotic singular Yamabe problem: conformal unit defining densities.

For a defining density σ (represented in the chart's scale g)

    S(g, σ) = |∇σ|² - (2/d) σ (Δ + J) σ,      ρ = -(Δσ + Jσ)/d,

and a conformal unit defining density has S = 1 + σ^d B.  The recursion
raises the order of S - 1 one step at a time.  If S - 1 = A_k σ^k + ..., then
adding α σ^{k+1} changes S by 2(k+1)(d-k)/d · α σ^k + O(σ^{k+1}), so

    α_k = -d A_k / (2 (k+1)(d-k)),

which is singular exactly at k = d: the obstruction B = (S - 1)/σ^d|_Σ.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import jets
from .ambient import AmbientGeometry, covariant_derivative, laplacian
from .hypersurface import HypersurfaceFrame, RecursionFailureError, random_jet
from .jets import Jet, einsum
from .report import Report


class ObstructionError(ValueError):
    """Improvement beyond order d was requested."""


class UnsupportedComparisonError(ValueError):
    pass


def s_functional(geom: AmbientGeometry, sigma: Jet) -> Jet:
    """S(g, σ) = |∇σ|² - (2/d) σ (Δσ + Jσ)."""
    d = geom.d
    n = sigma.grad()
    lap = laplacian(sigma, geom, "")
    return geom.dot(n, n) - (2.0 / d) * sigma * (lap + geom.J * sigma)


def rho_of(geom: AmbientGeometry, sigma: Jet) -> Jet:
    return -(laplacian(sigma, geom, "") + geom.J * sigma) / geom.d


@dataclass(frozen=True)
class DefiningDensity:
    sigma: Jet
    geom: AmbientGeometry
    improvement_order: int = 0
    alphas: tuple[Jet, ...] = ()
    B: Jet | None = None
    step_residuals: tuple[float, ...] = field(default=())

    @property
    def rho(self) -> Jet:
        return rho_of(self.geom, self.sigma)

    @property
    def d(self) -> int:
        return self.geom.d


def _quotient_by_sigma(R: Jet, sigma: Jet, k: int) -> Jet:
    """R / σ^k for R vanishing to order k on Σ = {t = 0}."""
    u = sigma.divide_last(1)
    return R.divide_last(k) * jets.power(u, -k)


def conformal_unit_improve(sigma0: Jet | DefiningDensity, geom: AmbientGeometry,
                           target_order: int | None = None, tol: float = 1e-8) -> DefiningDensity:
    """Conformal unit defining density with S = 1 + O(σ^target); B recorded at target = d."""
    d = geom.d
    target = d if target_order is None else target_order
    if target > d:
        raise ObstructionError(
            f"S - 1 cannot be pushed beyond O(σ^{d}) in general: the order-{d} "
            "coefficient is the obstruction density"
        )
    s0 = sigma0.sigma if isinstance(sigma0, DefiningDensity) else sigma0
    if abs(s0.value()) > 1e-12 or s0.low_last_residual(1) > 1e-10:
        raise ValueError("σ0 must vanish on Σ = {t = 0}")
    S = s_functional(geom, s0)
    sigma_hat = jets.power(S, -0.5).mul_vanishing(s0, 1)
    sigma = sigma_hat
    alphas: list[Jet] = []
    residuals: list[float] = []
    B = None
    for k in range(1, target + 1):
        R = s_functional(geom, sigma) - 1.0
        low = R.low_last_residual(k)
        residuals.append(low)
        if low > tol * max(1.0, R.max_abs()):
            raise RecursionFailureError(
                f"conformal recursion: S - 1 not O(σ^{k}) (low coefficients {low:.3e})"
            )
        if k == target:
            if k == d:
                B = _quotient_by_sigma(R, sigma, d).restrict()
            break
        A = _quotient_by_sigma(R, sigma, k)
        alpha = A * (-d / (2.0 * (k + 1) * (d - k)))
        alphas.append(alpha.restrict())
        sigma = sigma + alpha.mul_vanishing(sigma_hat ** (k + 1), k + 1)
    return DefiningDensity(sigma, geom, target, tuple(alphas), B, tuple(residuals))


# normal-derivative calculus ------------------------------------------------------

class NormalCalculus:
    """n = ∇σ, n^a, γ^{ab} = g^{ab} - n^a n^b, and ∇_n on scalars/tensors."""

    def __init__(self, geom: AmbientGeometry, sigma: Jet):
        self.geom = geom
        self.sigma = sigma
        self.n = sigma.grad()
        self.nup = geom.raise_index(self.n)
        self.gamma = geom.ginv - einsum("a,b->ab", self.nup, self.nup)
        self.rho = rho_of(geom, sigma)

    def dn(self, f: Jet, kinds: str = "") -> Jet:
        """∇_n of a tensor with the given index kinds."""
        if not kinds:
            return einsum("a,a->", self.nup, f.grad())
        idx = "bcdefgh"[: len(kinds)]
        return einsum(f"a,a{idx}->{idx}", self.nup, covariant_derivative(f, self.geom, kinds))

    def nabla(self, f: Jet, kinds: str = "") -> Jet:
        return covariant_derivative(f, self.geom, kinds)


def obstruction_density(dd: DefiningDensity, frame: HypersurfaceFrame | None = None,
                        closed_forms: bool = True) -> Report:
    """B|_Σ at the base point with every applicable closed-form cross-check."""
    if dd.B is None:
        raise ValueError("σ must be improved to order d to define B")
    geom = dd.geom
    d = geom.d
    rep = Report("obstruction density")
    B0 = float(dd.B.value())
    rep.values["B"] = B0
    if not closed_forms:
        return rep
    if d not in (3, 4):
        raise UnsupportedComparisonError(f"no closed-form obstruction for d={d}")
    frame = frame or HypersurfaceFrame(geom, dd.sigma)
    for name, val in closed_form_obstructions(frame).items():
        rep.values[name] = val
        rep.add(name, B0, val, 1e-7)
    return rep


def closed_form_obstructions(frame: HypersurfaceFrame) -> dict[str, float]:
    """Closed forms of B applicable to the ambient geometry of ``frame``."""
    d = frame.d
    geom = frame.geom
    out: dict[str, float] = {}
    W_zero = geom.W is not None and geom.W.max_abs() < 1e-11 if d >= 4 else None
    gbi = frame.gbar_inv
    if d == 3:
        ddIIo = covariant_derivative(frame.grad_IIo, frame.intrinsic, "lll")
        term = einsum("ac,bd,abcd->", gbi, gbi, ddIIo)
        PI = einsum("ac,bd,ab,cd->", gbi, gbi, frame.P_tan, frame.IIo)
        out["curved d=3"] = float(-(term.value() + (frame.H * frame.K).value() + PI.value()) / 3.0)
        if geom.riemann.truncate(0).max_abs() < 1e-11 and _conformally_flat_3d(geom):
            # the Willmore form is the flat-scale value; it is not invariant alone
            lapH = laplacian(frame.H, frame.intrinsic, "")
            out["willmore d=3"] = float(-(lapH.value() + (frame.H * frame.K).value()) / 3.0)
    if d == 4 and W_zero:
        g = gbi
        gI = frame.grad_IIo
        t1 = einsum("ad,be,cf,abc,def->", g, g, g, gI, gI)
        lapI = laplacian(frame.IIo, frame.intrinsic, "ll")
        t2 = einsum("ac,bd,ab,cd->", g, g, frame.IIo, lapI)
        t3 = einsum("ab,a,b->", g, frame.div_IIo, frame.div_IIo)
        K = frame.K
        val = t1 + 2.0 * t2 + 1.5 * t3 - 2.0 * frame.intrinsic.J * K + K * K
        out["willmore d=4"] = float(val.value() / 6.0)
    return out


def _conformally_flat_3d(geom: AmbientGeometry) -> bool:
    """Cotton tensor test (d = 3 conformal flatness) at the base point."""
    dP = covariant_derivative(geom.P, geom, "ll")
    cotton = dP - dP.transpose(1, 0, 2)
    return cotton.truncate(0).max_abs() < 1e-10 if cotton.order >= 0 else False


def euclidean_unit_expansion(s: Jet, geom: AmbientGeometry) -> tuple[Jet, float]:
    """σ(s) and B|_Σ from the closed forms for a unit s in flat space (d = 3, 4)."""
    d = geom.d
    nc = NormalCalculus(geom, s)
    n = nc.n
    dn = covariant_derivative(n, geom, "l")
    divn = einsum("ab,ab->", geom.ginv, dn)
    n_divn = nc.dn(divn)
    nn_divn = nc.dn(n_divn)
    lap_divn = laplacian(divn, geom, "")
    if d == 3:
        sigma = (
            s
            + (s * s) * divn / 4.0
            + (s * s * s) * (n_divn + 2.0 * divn * divn) / 12.0
        )
        B = -(2 * lap_divn + 2 * nn_divn + 8 * divn * n_divn + 3 * divn**3) / 12.0
    elif d == 4:
        sigma = (
            s
            + (s * s) * divn / 6.0
            + (s**3) * divn * divn / 18.0
            + (s**4) * (6 * lap_divn + 4 * divn * n_divn + (14.0 / 3.0) * divn**3) / 144.0
        )
        grad_divn = divn.grad()
        B = -(
            9 * nc.dn(lap_divn)
            + 12 * divn * lap_divn
            + 6 * divn * nn_divn
            + 3 * geom.dot(grad_divn, grad_divn)
            + 6 * n_divn * n_divn
            + 18 * divn * divn * n_divn
            + 4 * divn**4
        ) / 108.0
    else:
        raise UnsupportedComparisonError(f"flat-space expansion only for d = 3, 4, not {d}")
    return sigma, float(B.value())


def flat_expansion_check(s: Jet, geom: AmbientGeometry, tol: float = 1e-10) -> Report:
    """σ(s) and B from the flat closed forms against the recursion, for unit s.

    σ is compared on every Taylor coefficient of t-degree <= d, where the
    recursion fixes it.
    """
    d = geom.d
    rep = Report(f"flat expansion d={d}")
    sigma_cf, B_cf = euclidean_unit_expansion(s, geom)
    dd = conformal_unit_improve(s, geom, d)
    o = min(sigma_cf.order, dd.sigma.order)
    a, b = sigma_cf.truncate(o), dd.sigma.truncate(o)
    mask = a.space.exps[:, -1] <= d
    rep.add("sigma(s) coefficients", a.c[..., mask], b.c[..., mask], tol)
    rep.add("B closed form", B_cf, float(dd.B.value()), tol)
    rep.values.update({"B": float(dd.B.value()), "alphas": [float(x.value()) for x in dd.alphas]})
    return rep


def covariance_check(s0: Jet, geom: AmbientGeometry, omega: Jet, tol: float = 1e-8,
                     dd: DefiningDensity | None = None) -> Report:
    """Weights of σ (1), n̂ (1), II̊ (1) and B (-d) under g → Ω² g.

    σ is compared on its coefficients of t-degree <= d, where the recursion
    determines it uniquely.
    """
    from .ambient import conformal_rescale

    d = geom.d
    rep = Report(f"conformal covariance d={d}")
    gh = conformal_rescale(geom, omega)
    dd = dd or conformal_unit_improve(s0, geom, d)
    ddh = conformal_unit_improve(omega.truncate(s0.order) * s0, gh, d)
    diff = ddh.sigma - omega.truncate(dd.sigma.order) * dd.sigma
    mask = diff.space.exps[:, -1] <= d
    rep.add_value("sigma weight 1", float(np.max(np.abs(diff.c[..., mask]))), tol)
    om = omega.restrict()
    rep.add("B weight -d", float(ddh.B.value()), float((dd.B * om ** (-d)).value()), tol)
    f, fh = HypersurfaceFrame(geom, dd.sigma), HypersurfaceFrame(gh, dd.sigma)
    o = 1
    nh, n = fh.nhat.restrict().truncate(o), (f.nhat.restrict() * om).truncate(o)
    rep.add("n-hat weight 1", nh.c, n.c, tol)
    Ih, I = fh.IIo.truncate(o), (f.IIo * om).truncate(o)
    rep.add("trace-free II weight 1", Ih.c, I.c, tol)
    return rep


# ρ ladder and auxiliary identities ---------------------------------------------------

def _tangent_tensors(frame: HypersurfaceFrame):
    geom = frame.geom
    gi = np.asarray(geom.ginv.value())
    IIo = frame.embed(frame.IIo)
    IIo_up = gi @ IIo @ gi
    tr3 = float(np.trace(IIo @ gi @ IIo @ gi @ IIo @ gi))
    return IIo, IIo_up, tr3


def rho_ladder(dd: DefiningDensity, tol: float = 1e-8) -> Report:
    """ρ|_Σ = -H, ∇_nρ = K/(d-2) + P(n,n), and the third-order ρ identity."""
    geom = dd.geom
    d = geom.d
    rep = Report("rho ladder")
    frame = HypersurfaceFrame(geom, dd.sigma)
    nc = NormalCalculus(geom, dd.sigma)
    H = frame.H.value()
    K = frame.K.value()
    nu = frame.nhat_up0
    rep.add("rho = -H", nc.rho.value(), -H, tol)
    # ½∇_n²I² + (d-2)∇_nρ = K + (d-2)P(n,n), valid for d >= 2
    I2 = s_functional(geom, dd.sigma)
    lhs = 0.5 * nc.dn(nc.dn(I2)) + (d - 2) * nc.dn(nc.rho)
    Pnn = float(nu @ np.asarray(geom.P.value()) @ nu) if d >= 3 else 0.0
    rep.add("line willmore", lhs.value(), K + (d - 2) * Pnn, tol)
    if d >= 3:
        rep.add("grad_n rho", nc.dn(nc.rho).value(), K / (d - 2) + Pnn, tol)
        IIo, IIo_up, tr3 = _tangent_tensors(frame)
        gbi = frame.gbar_inv
        PI = einsum("ac,bd,ab,cd->", gbi, gbi, frame.P_tan, frame.IIo).value()
        W = np.asarray(geom.W.value())
        Wnn = np.einsum("ab,cabd,c,d->", IIo_up, W, nu, nu)
        # ∇_n applied to the scalar G(n, n), n = ∇σ
        nGnn = nc.dn(einsum("a,b,ab->", nc.nup, nc.nup, geom.G)).value()
        nJ = nc.dn(geom.J).value()
        lhs3 = 0.5 * nc.dn(nc.dn(nc.dn(I2))) + (d - 3) * nc.dn(nc.dn(nc.rho))
        rhs3 = (
            -(frame.divdiv_IIo.value() + (d - 2) * (H * K + PI)) / (d - 2)
            - 2 * tr3
            + 2 * Wnn
            + (d - 3) / (d - 2) * nGnn
            + (d - 3) * (nJ + 2 * H * geom.J.value())
        )
        rep.add("W3", lhs3.value(), rhs3, tol)
        if d >= 4:
            Pbar = frame.intrinsic.P
            IIoPbar = einsum("ac,bd,ab,cd->", gbi, gbi, frame.IIo, Pbar).value()
            Pn = frame.normal_component(geom.P, axis=1)
            divPn = einsum("ab,ab->", gbi, covariant_derivative(Pn, frame.intrinsic, "l")).value()
            rhs = (
                # sign of the (d-4) term fixed by the d = 5, 6 numerics (it is invisible in d = 4)
                -(frame.divdiv_IIo.value() - (d - 2) * (d - 4) * IIoPbar) / ((d - 2) * (d - 3))
                - (d - 2) / (d - 3) * frame.L.value()
                - divPn
                - H * ((d - 2) * Pnn + K)
                + nJ
                + H * geom.J.value()
            )
            rep.add("grad_n^2 rho (Fialkow form)", nc.dn(nc.dn(nc.rho)).value(), rhs, tol)
    rep.values.update({"H": float(H), "K": float(K)})
    return rep


def auxiliary_identity_suite(dd: DefiningDensity, tol: float = 1e-8,
                            rng: np.random.Generator | None = None) -> Report:
    """Both sides of each auxiliary identity behind the third-order ρ formula."""
    geom = dd.geom
    d = geom.d
    rng = rng or np.random.default_rng(0)
    rep = Report("auxiliary identities")
    frame = HypersurfaceFrame(geom, dd.sigma)
    nc = NormalCalculus(geom, dd.sigma)
    n, nup, gam, rho = nc.n, nc.nup, nc.gamma, nc.rho
    H = frame.H.value()
    K = frame.K.value()
    nu = frame.nhat_up0
    J = geom.J
    I2 = s_functional(geom, dd.sigma)
    dn = covariant_derivative(n, geom, "l")
    trg = einsum("ab,ab->", gam, dn)

    lhs = 0.5 * nc.dn(nc.dn(nc.dn(I2))) + (d - 3) * nc.dn(nc.dn(rho))
    rhs = -nc.dn(nc.dn(trg)) - nc.dn(5 * rho * rho + 2 * J) + 4 * rho**3 + 2 * rho * J
    rep.add("three derivs", lhs.value(), rhs.value(), tol)

    f = random_jet((), d, geom.order, rng)
    lhs = laplacian(f, geom, "") - nc.dn(nc.dn(f)) - (d - 2) * H * nc.dn(f)
    rep.add("laplaces", lhs.value(), laplacian(f.restrict(), frame.intrinsic, "").value(), tol)

    nn_n = nc.dn(nc.dn(n, "l"), "l")
    lead = einsum("ab,ab->", gam, covariant_derivative(nn_n, geom, "l"))
    lapH = laplacian(frame.H, frame.intrinsic, "").value()
    nrho = nc.dn(rho).value()
    rep.add("leading laplace", lead.value(), lapH - 2 * (d - 1) * H * nrho + (d - 1) * H**3, tol)

    nn_dn = nc.dn(nc.dn(dn, "ll"), "ll")
    c1 = nc.dn(nc.dn(trg)) - einsum("ab,ab->", gam, nn_dn)
    rep.add("commutator 1", c1.value(), 12 * H * nrho - 4 * H**3, tol)

    IIo, IIo_up, tr3 = _tangent_tensors(frame)
    Rm = np.asarray(geom.riemann.value())
    IIoRnn = np.einsum("ab,cabd,c,d->", IIo_up, Rm, nu, nu)
    Ric = geom.ricci
    Ricnn = float(nu @ np.asarray(Ric.value()) @ nu)
    # here ∇_n acts on the scalar Ric(n, n) with n = ∇σ, not on Ric alone
    nRic_nn = nc.dn(einsum("a,b,ab->", nup, nup, Ric)).value()
    c2 = einsum("ab,ab->", gam, nn_dn - covariant_derivative(nn_n, geom, "l"))
    rhs = -(nRic_nn - H * Ricnn) + 2 * tr3 + 3 * H * K - (d - 1) * H**3 - 2 * IIoRnn
    rep.add("commutator 2", c2.value(), rhs, tol)

    lhs = 0.5 * nc.dn(nc.dn(nc.dn(I2))) + (d - 3) * nc.dn(nc.dn(rho))
    nG = nc.dn(einsum("a,b,ab->", nup, nup, geom.G)).value()
    rhs = (-lapH - H * K - 2 * tr3 + nG + (d - 3) * (nc.dn(J).value() + 2 * H * J.value())
           + 2 * IIoRnn + H * Ricnn)
    rep.add("rho nnn", lhs.value(), rhs, tol)

    Ricn = frame.normal_component(Ric, axis=1)
    divRicn = einsum("ab,ab->", frame.gbar_inv, covariant_derivative(Ricn, frame.intrinsic, "l")).value()
    IIoRic = float(np.sum(IIo_up * np.asarray(Ric.value())))
    rep.add("einstein", nG, -divRicn + IIoRic - (d - 2) * H * Ricnn, tol)
    return rep
