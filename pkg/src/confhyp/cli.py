"""Command-line front end: ``confhyp <command> [--scene FILE] ...``.

Exit status is 0 when every check passes, 1 when a check fails and 2 on
usage or scene errors.  JSON reports are deterministic for a fixed scene
and seed apart from the ``timing`` block.
"""

from __future__ import annotations

import csv
import io
import json
import math
import sys
import time
from typing import Callable

import click
import numpy as np

from . import acceptance
from .ambient import UnsupportedDimensionError
from .charts import GraphSurface, adapted_chart
from .energy import (
    UnsupportedEnergyError,
    energy_general,
    gradient_check,
    random_variations,
    rigidity_energy_3d,
    willmore_energy_2d,
)
from .hypersurface import (
    HypersurfaceFrame,
    graph_mean_curvature_check,
    riemannian_identity_suite,
    unit_improve,
)
from .laplacians import laplacian_suite
from .report import Report
from .scene import Scene, SceneError, load, shipped_scene, shipped_scenes
from .tractor import ExcludedDimensionError, tractor_identity_suite
from .yamabe import (
    UnsupportedComparisonError,
    auxiliary_identity_suite,
    conformal_unit_improve,
    flat_expansion_check,
    obstruction_density,
    rho_ladder,
)

DEFAULT_SCENES = {
    "invariants": "graph_d3",
    "yamabe": "graph_d3",
    "obstruction": "curved_d3",
    "identities": "curved_d4",
    "laplacian": "curved_d4",
    "tractor-check": "curved_d4",
    "energy": "clifford_torus",
    "gradient-check": "perturbed_sphere",
}
_SKIPPABLE = (UnsupportedDimensionError, UnsupportedComparisonError, ExcludedDimensionError, UnsupportedEnergyError)


class Settings:
    def __init__(self, scene: Scene, order: int | None, tol: float | None, seed: int | None, samples: bool = False):
        self.scene = scene
        self.order = order if order is not None else scene.order
        self.tol = tol if tol is not None else scene.tolerance
        self.seed = seed if seed is not None else scene.seed
        self.samples = samples

    def tol_or(self, default: float) -> float:
        return self.tol if self.tol is not None else default

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)

    def chart(self, order: int | None = None):
        sc = self.scene
        return adapted_chart(sc.metric(), sc.hypersurface(), sc.base_point, order or self.order, sc.orientation)

    def config(self) -> dict:
        return {"scene": self.scene.as_dict(), "order": self.order, "tolerance": self.tol, "seed": self.seed}


# commands --------------------------------------------------------------------

def _guarded(rep: Report, label: str, run: Callable[[], Report | None], prefix: str = "") -> None:
    """Merge a sub-report; unsupported combinations become notes, failures become checks."""
    try:
        sub = run()
    except SceneError:
        raise
    except _SKIPPABLE as exc:
        rep.values.setdefault("skipped", {})[label] = str(exc)
        return
    except Exception as exc:  # numerical failure: a failing check, not a crash
        rep.add_value(f"{label} ran", math.inf, 1.0, note=f"{type(exc).__name__}: {exc}")
        return
    if sub is not None:
        rep.extend(sub, prefix)


def cmd_invariants(st: Settings) -> Report:
    rep = Report("invariants")
    ch = st.chart()
    fr = HypersurfaceFrame(ch.geometry, ch.t())
    d = fr.d
    gi = np.asarray(fr.gbar_inv.value())
    II = np.asarray(fr.II.value())
    kappa = np.sort(np.linalg.eigvals(gi @ II).real)
    rep.values.update({
        "point": np.asarray(ch.phi.value()).tolist() if ch.phi is not None else None,
        "H": float(fr.H.value()),
        "K": float(fr.K.value()),
        "principal curvatures": kappa.tolist(),
        "gbar": np.asarray(fr.gbar.value()).tolist(),
        "IIo": np.asarray(fr.IIo.value()).tolist(),
        "nhat (chart)": np.asarray(fr.nhat.value()).tolist(),
    })
    if d >= 4:
        rep.values["L"] = float(fr.L.value())
    rep.add("H = mean principal curvature", float(fr.H.value()), float(kappa.mean()), st.tol_or(1e-10))
    surf = st.scene.hypersurface()
    metric = st.scene.metric()
    if isinstance(surf, GraphSurface) and d == 3 and metric.kind == "euclidean" and st.scene.orientation == 1:
        rep.extend(graph_mean_curvature_check(surf, st.scene.base_point, st.tol_or(1e-10)))
    return rep


def _density(st: Settings, target: int | None = None):
    ch = st.chart()
    return ch, conformal_unit_improve(ch.t(), ch.geometry, target)


def cmd_yamabe(st: Settings) -> Report:
    rep = Report("yamabe")
    ch, dd = _density(st)
    d = ch.d
    rep.values["B"] = float(dd.B.value())
    rep.values["alpha"] = {f"alpha_{k + 1}": float(a.value()) for k, a in enumerate(dd.alphas)}
    for k, r in enumerate(dd.step_residuals, start=1):
        rep.add_value(f"S - 1 = O(sigma^{k})", r, st.tol_or(1e-8))
    if st.scene.metric().kind == "euclidean" and d in (3, 4):
        target = {3: 5, 4: 4}[d]

        def flat():
            s = unit_improve(ch.t(), ch.geometry, target).s
            sub = flat_expansion_check(s, ch.geometry, st.tol_or(1e-10))
            rep.values["alpha(s) for unit s"] = sub.values.pop("alphas")
            return sub

        _guarded(rep, "flat expansion", flat)
    return rep


def cmd_obstruction(st: Settings) -> Report:
    rep = Report("obstruction")
    ch, dd = _density(st)
    d = ch.d
    _guarded(rep, "closed forms", lambda: _obstruction(dd, st))
    metric = st.scene.metric()
    if d == 3 and metric.kind == "conformally_flat" and st.scene.orientation == 1:
        _guarded(rep, "flat-scale willmore", lambda: acceptance.willmore_transport_check(ch, metric, st.tol_or(1e-7)))
    return rep


def _obstruction(dd, st: Settings) -> Report:
    sub = obstruction_density(dd)
    for c in sub.checks:
        c.tol = st.tol_or(c.tol)
        c.__post_init__()
    return sub


def cmd_identities(st: Settings) -> Report:
    rep = Report("identities")
    ch = st.chart()
    g = ch.geometry
    d = ch.d
    rng = st.rng()
    tol = st.tol_or(1e-8)
    _guarded(rep, "riemannian", lambda: riemannian_identity_suite(unit_improve(ch.t(), g, 3), g, tol, rng), "riemannian: ")
    dd = conformal_unit_improve(ch.t(), g, min(d, 4))
    _guarded(rep, "rho ladder", lambda: rho_ladder(dd, tol), "rho ladder: ")
    _guarded(rep, "auxiliary", lambda: auxiliary_identity_suite(dd, tol), "auxiliary: ")
    _guarded(rep, "tractor", lambda: tractor_identity_suite(dd, tol, rng), "tractor: ")
    return rep


def cmd_laplacian(st: Settings) -> Report:
    rep = Report("laplacian")
    ch, dd = _density(st, min(st.scene.d, 4))
    _guarded(rep, "extrinsic laplacians", lambda: laplacian_suite(dd, rng=st.rng(), tol=st.tol_or(1e-8)))
    return rep


def cmd_tractor(st: Settings) -> Report:
    rep = Report("tractor identities")
    ch, dd = _density(st, min(st.scene.d, 4))
    _guarded(rep, "tractor", lambda: tractor_identity_suite(dd, st.tol_or(1e-8), st.rng()))
    return rep


def cmd_energy(st: Settings) -> Report:
    sc = st.scene
    spec = sc.closed_surface()
    metric = sc.metric()
    d = sc.d
    which = sc.raw.get("energy", "all")
    rep = Report("energy")
    tol = st.tol_or(1e-6)
    reports = {}
    if which in ("willmore", "all") and d == 3:
        reports["willmore"] = willmore_energy_2d(spec, metric, n=sc.nodes or 64)
    if which in ("rigidity", "all") and d == 4:
        reports["rigidity"] = rigidity_energy_3d(spec, metric, n=sc.nodes or 32)
    if which in ("general", "all"):
        reports["general"] = energy_general(spec, metric, n=sc.raw.get("samples"))
    if not reports:
        raise UnsupportedEnergyError(f"energy {which!r} is not defined for d={d}")
    for name, E in reports.items():
        rep.values[name] = E.as_dict(st.samples)
        if E.route == "flat":  # per-node grids are too small for a meaningful halving estimate
            rep.add_value(f"{name}: refinement error estimate", E.error, tol)
    if "general" in reports and len(reports) == 2:
        other = "willmore" if d == 3 else "rigidity"
        factor = -1.0 if d == 3 else 1.0
        rep.add(f"general = {'-' if d == 3 else ''}{other}", reports["general"].energy,
                factor * reports[other].energy, tol)
    rep.energy_samples = reports  # per-node data for CSV output
    return rep


def cmd_gradient(st: Settings) -> Report:
    sc = st.scene
    variations = sc.raw.get("variations") or random_variations(st.rng(), 5)
    return gradient_check(sc.closed_surface(), variations, n=sc.nodes or 64, tol=st.tol_or(1e-3))


COMMANDS: dict[str, Callable[[Settings], Report]] = {
    "invariants": cmd_invariants,
    "yamabe": cmd_yamabe,
    "obstruction": cmd_obstruction,
    "identities": cmd_identities,
    "laplacian": cmd_laplacian,
    "tractor-check": cmd_tractor,
    "energy": cmd_energy,
    "gradient-check": cmd_gradient,
}


def run(command: str, st: Settings) -> tuple[Report, float, dict | None]:
    """Run one command; returns the report, wall time and any per-node samples."""
    t0 = time.perf_counter()
    rep = Report(command)
    inner: list[Report] = []
    _guarded(rep, command, lambda: inner.append(COMMANDS[command](st)) or inner[0])
    samples = getattr(inner[0], "energy_samples", None) if inner else None
    return rep, time.perf_counter() - t0, samples


# output ---------------------------------------------------------------------------

def _plain(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    raise TypeError(f"cannot serialize {type(x).__name__}")


def _finite(x):
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    if isinstance(x, dict):
        return {k: _finite(v) for k, v in x.items()}
    if isinstance(x, list):
        return [_finite(v) for v in x]
    return x


def document(command: str, config: dict, rep: Report, seconds: float) -> dict:
    body = rep.as_dict()
    return _finite({
        "command": command,
        "config": config,
        "passed": body["passed"],
        "checks": body["checks"],
        "values": json.loads(json.dumps(body["values"], default=_plain)),
        "timing": {"seconds": round(seconds, 3)},
    })


def render(doc: dict, fmt: str, samples: dict | None = None) -> str:
    if fmt == "json":
        return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if samples:
            w.writerow(["energy", "node", "integrand", "dA"])
            for name, E in samples.items():
                for u, f, a in zip(E.nodes, E.integrand, E.dA):
                    w.writerow([name, " ".join(repr(float(x)) for x in u), repr(float(f)), repr(float(a))])
            return buf.getvalue()
        w.writerow(["check", "residual", "tol", "passed", "note"])
        for c in doc["checks"]:
            w.writerow([c["name"], c["residual"], c["tol"], c["passed"], c["note"]])
        return buf.getvalue()
    lines = [f"{doc['command']}: {'PASS' if doc['passed'] else 'FAIL'} ({doc['timing']['seconds']:.2f}s)"]
    for c in doc["checks"]:
        res = c["residual"] if isinstance(c["residual"], str) else f"{c['residual']:.3e}"
        note = f"  [{c['note']}]" if c["note"] else ""
        lines.append(f"  {'PASS' if c['passed'] else 'FAIL'} {c['name']}: residual={res} tol={c['tol']:.1e}{note}")
    for k, v in doc["values"].items():
        lines.append(f"  {k} = {json.dumps(v, ensure_ascii=False)}")
    return "\n".join(lines) + "\n"


def emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        click.echo(text, nl=False)


# click wiring ------------------------------------------------------------------------

def _common(f):
    opts = [
        click.option("--scene", "scene_path", type=click.Path(exists=True, dir_okay=False),
                     help="Scene JSON file (default: a shipped scene for the command)."),
        click.option("--seed", type=click.IntRange(min=0), help="Seed for randomized checks."),
        click.option("--order", type=click.IntRange(2, 14), help="Jet order of the adapted chart."),
        click.option("--tol", type=click.FloatRange(min=0, min_open=True), help="Override every tolerance."),
        click.option("--format", "fmt", type=click.Choice(["json", "table", "csv"]), default="table",
                     show_default=True),
        click.option("--out", type=click.Path(dir_okay=False, writable=True), help="Write the report here."),
    ]
    for o in reversed(opts):
        f = o(f)
    return f


def _load_scene(path: str | None, command: str) -> Scene:
    try:
        return load(path) if path else shipped_scene(DEFAULT_SCENES[command])
    except SceneError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)


def _execute(command: str, scene_path, seed, order, tol, fmt, out, samples=False) -> None:
    scene = _load_scene(scene_path, command)
    st = Settings(scene, order, tol, seed, samples)
    try:
        rep, secs, samples = run(command, st)
    except SceneError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    doc = document(command, st.config(), rep, secs)
    emit(render(doc, fmt, samples if fmt == "csv" and st.samples else None), out)
    sys.exit(0 if doc["passed"] else 1)


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
def main() -> None:
    """Conformal hypersurface invariants from jets of metrics and defining functions."""


def _make(command: str, help_text: str, samples: bool = False):
    def body(scene_path, seed, order, tol, fmt, out, **kw):
        _execute(command, scene_path, seed, order, tol, fmt, out, kw.get("samples", False))

    body.__name__ = command.replace("-", "_")
    body.__doc__ = help_text
    cmd = _common(body)
    if samples:
        cmd = click.option("--samples", is_flag=True, help="Include per-node integrands (CSV with --format csv).")(cmd)
    main.command(command)(cmd)


_make("invariants", "Hypersurface frame quantities at the scene's base point.")
_make("yamabe", "Singular Yamabe expansion: alpha coefficients and B.")
_make("obstruction", "Obstruction density B against its closed forms.")
_make("identities", "Riemannian, rho-ladder, normal-derivative and tractor identity suites.")
_make("laplacian", "Extrinsic Laplacians P2, P3: closed vs holographic, tangentiality.")
_make("tractor-check", "Tractor identity suite on the scene.")
_make("energy", "Energies of the scene's closed surface.", samples=True)
_make("gradient-check", "Finite-difference energy gradient against the obstruction density.")


@main.command("selftest")
@click.option("--seed", type=click.IntRange(min=0), default=0, show_default=True)
@click.option("--format", "fmt", type=click.Choice(["json", "table", "csv"]), default="table", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False, writable=True))
@click.option("--quick", is_flag=True, help="Skip the acceptance criteria; shipped scenes only.")
def selftest(seed: int, fmt: str, out: str | None, quick: bool) -> None:
    """Acceptance criteria plus every shipped scene."""
    t0 = time.perf_counter()
    rep = Report("selftest")
    timing = {}
    if not quick:
        for c in acceptance.CRITERIA:
            r = acceptance.run_criterion(c, seed)
            key = f"criterion {c.number}"
            timing[key] = round(r.seconds, 3)
            for ch in r.report.merged():
                ch.name = f"{key}: {ch.name}"
                rep.checks.append(ch)
            if r.error:
                rep.add_value(f"{key} ran", math.inf, 1.0, note=r.error)
            rep.add_value(f"{key} runtime (s)", r.seconds, c.budget)
            rep.values[f"{key} ({c.title})"] = "PASS" if r.passed else "FAIL"
            if fmt == "table":
                click.echo(r.line(), err=True)
    try:
        scenes = shipped_scenes()
    except SceneError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    for name, scene in scenes.items():
        for command in scene_commands(scene):
            st = Settings(scene, None, None, seed)
            try:
                sub, secs, _ = run(command, st)
            except SceneError as exc:
                click.echo(f"error: {exc}", err=True)
                sys.exit(2)
            timing[f"{name} {command}"] = round(secs, 3)
            for ch in sub.merged():
                ch.name = f"{name} {command}: {ch.name}"
                rep.checks.append(ch)
    doc = document("selftest", {"seed": seed, "quick": quick}, rep, time.perf_counter() - t0)
    doc["timing"]["parts"] = timing
    emit(render(doc, fmt), out)
    sys.exit(0 if doc["passed"] else 1)


def scene_commands(scene: Scene) -> list[str]:
    """The commands a shipped scene exercises during ``selftest``."""
    cmds = []
    if "hypersurface" in scene.raw:
        cmds += ["invariants", "yamabe"]
        if scene.d in (3, 4):
            cmds.append("obstruction")
    if "closed_surface" in scene.raw:
        cmds.append("energy")
        if scene.d == 3 and "variations" in scene.raw:
            cmds.append("gradient-check")
    return cmds


if __name__ == "__main__":  # pragma: no cover
    main()
