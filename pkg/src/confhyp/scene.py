"""Scene files: JSON descriptions of an ambient metric and a hypersurface.

Validation is schema-driven (``jsonschema``) with unknown keys rejected;
every error carries the line and column of the offending entry.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Any

import jsonschema

from .charts import GraphSurface, LevelSetSurface, MetricSpec, ParametrizedSurface
from .energy import Axis, ClosedSurfaceSpec
from .expressions import ExpressionSyntaxError, default_variables, parse

_EXPR = {"type": "string", "minLength": 1}
_NUM = {"type": "number"}

SCHEMA: dict = {
    "type": "object",
    "additionalProperties": False,
    "required": ["d"],
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "d": {"type": "integer", "minimum": 2, "maximum": 6},
        "metric": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["euclidean", "conformally_flat", "general"]},
                "omega": _EXPR,
                "components": {"type": "array", "items": {"type": "array", "items": _EXPR}},
            },
        },
        "hypersurface": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["graph", "level_set", "parametrized"]},
                "f": _EXPR,
                "s": _EXPR,
                "X": {"type": "array", "items": _EXPR},
                "params": {"type": "array", "items": {"type": "string"}},
                "orientation": {"enum": [1, -1]},
            },
        },
        "base_point": {"type": "array", "items": _NUM},
        "order": {"type": "integer", "minimum": 2, "maximum": 14},
        "seed": {"type": "integer", "minimum": 0},
        "tolerance": {"type": "number", "exclusiveMinimum": 0},
        "closed_surface": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "stock": {"enum": ["sphere", "torus", "spun_torus"]},
                "radius": {"type": "number", "exclusiveMinimum": 0},
                "R": {"type": "number", "exclusiveMinimum": 0},
                "r": {"type": "number", "exclusiveMinimum": 0},
                "perturbation": _EXPR,
                "X": {"type": "array", "items": _EXPR},
                "axes": {
                    "type": "array",
                    "items": {
                        "type": "array",
                        "prefixItems": [{"enum": ["periodic", "interval"]}, _NUM, _NUM],
                        "minItems": 3,
                        "maxItems": 3,
                    },
                },
                "nodes": {"type": "integer", "minimum": 2},
            },
        },
        "energy": {"enum": ["willmore", "rigidity", "general", "all"]},
        "variations": {"type": "array", "items": _EXPR},
        "samples": {"type": "integer", "minimum": 1},
    },
}


class SceneError(ValueError):
    """Invalid scene file; ``line``/``column`` locate the problem (1-based)."""

    def __init__(self, message: str, line: int = 0, column: int = 0, source: str = "<scene>"):
        self.message, self.line, self.column, self.source = message, line, column, source
        where = f"{source}:{line}:{column}" if line else source
        super().__init__(f"{where}: {message}")


def _locate(text: str, path) -> tuple[int, int]:
    """Line and column of the JSON entry at ``path`` (keys matched in sequence)."""
    pos = 0
    for key in path:
        if isinstance(key, int):
            continue
        m = re.compile(r'"%s"\s*:' % re.escape(str(key))).search(text, pos)
        if m is None:
            break
        pos = m.start()
    line = text.count("\n", 0, pos) + 1
    return line, pos - (text.rfind("\n", 0, pos) + 1) + 1


def _string_position(text: str, path, value: str) -> tuple[int, int]:
    """Position of the string ``value`` at or after the key of ``path``."""
    line, col = _locate(text, path)
    offset = sum(len(l) + 1 for l in text.split("\n")[: line - 1]) + col - 1
    i = text.find(json.dumps(value), offset)
    if i < 0:
        return line, col
    return text.count("\n", 0, i) + 1, i - (text.rfind("\n", 0, i) + 1) + 2  # inside the quote


@dataclass
class Scene:
    raw: dict
    source: str = "<scene>"
    text: str = field(default="", repr=False)

    @property
    def d(self) -> int:
        return self.raw["d"]

    @property
    def name(self) -> str:
        return self.raw.get("name", self.source)

    @property
    def order(self) -> int:
        return self.raw.get("order", 6)

    @property
    def seed(self) -> int:
        return self.raw.get("seed", 0)

    @property
    def tolerance(self) -> float | None:
        return self.raw.get("tolerance")

    @property
    def base_point(self) -> list[float]:
        return list(self.raw.get("base_point", [0.0] * (self.d - 1)))

    @property
    def orientation(self) -> int:
        return self.raw.get("hypersurface", {}).get("orientation", 1)

    def metric(self) -> MetricSpec:
        m = self.raw.get("metric", {"kind": "euclidean"})
        return _build(self, ["metric"], lambda: _metric(self.d, m))

    def hypersurface(self):
        if "hypersurface" not in self.raw:
            raise SceneError("this command needs a 'hypersurface' entry", source=self.source)
        h = self.raw["hypersurface"]
        return _build(self, ["hypersurface"], lambda: _surface(self.d, h))

    def closed_surface(self) -> ClosedSurfaceSpec:
        if "closed_surface" not in self.raw:
            raise SceneError("this command needs a 'closed_surface' entry", source=self.source)
        c = self.raw["closed_surface"]
        return _build(self, ["closed_surface"], lambda: _closed(self.d, c))

    @property
    def nodes(self) -> int | None:
        return self.raw.get("closed_surface", {}).get("nodes")

    def as_dict(self) -> dict:
        return json.loads(json.dumps(self.raw))


def _need(entry: dict, key: str, kind: str) -> Any:
    if key not in entry:
        raise KeyError(key, f"{kind} needs '{key}'")
    return entry[key]


def _build(scene: Scene, path: list, make):
    try:
        return make()
    except ExpressionSyntaxError as exc:
        line, col = _string_position(scene.text, path, exc.text) if scene.text else (0, 0)
        raise SceneError(f"expression error: {exc}", line, col + max(exc.column - 1, 0), scene.source) from None
    except KeyError as exc:
        key, msg = exc.args if len(exc.args) == 2 else (exc.args[0], f"missing '{exc.args[0]}'")
        line, col = _locate(scene.text, path) if scene.text else (0, 0)
        raise SceneError(msg, line, col, scene.source) from None
    except ValueError as exc:
        line, col = _locate(scene.text, path) if scene.text else (0, 0)
        raise SceneError(str(exc), line, col, scene.source) from None


def _metric(d: int, m: dict) -> MetricSpec:
    kind = m["kind"]
    if kind == "euclidean":
        return MetricSpec.euclidean(d)
    if kind == "conformally_flat":
        return MetricSpec.conformally_flat(d, _need(m, "omega", "a conformally flat metric"))
    return MetricSpec.general(d, _need(m, "components", "a general metric"))


def _surface(d: int, h: dict):
    kind = h["kind"]
    if kind == "graph":
        return GraphSurface.from_text(d, _need(h, "f", "a graph"))
    if kind == "level_set":
        return LevelSetSurface.from_text(d, _need(h, "s", "a level set"))
    X = _need(h, "X", "a parametrized hypersurface")
    if len(X) != d:
        raise ValueError(f"X needs {d} components, got {len(X)}")
    return ParametrizedSurface.from_text(d, X, tuple(h.get("params", ("u", "v", "r"))))


def _closed(d: int, c: dict) -> ClosedSurfaceSpec:
    stock = c.get("stock")
    if stock == "sphere":
        return ClosedSurfaceSpec.sphere(d, c.get("radius", 1.0), c.get("perturbation"))
    if stock == "torus":
        if d != 3:
            raise ValueError("the stock torus lives in d = 3")
        return ClosedSurfaceSpec.torus(c.get("R", math.sqrt(2.0)), c.get("r", 1.0))
    if stock == "spun_torus":
        if d != 4:
            raise ValueError("the stock spun torus lives in d = 4")
        return ClosedSurfaceSpec.spun_torus(c.get("R", 2.0), c.get("r", 1.0))
    X = _need(c, "X", "a closed surface without 'stock'")
    axes = _need(c, "axes", "a closed surface without 'stock'")
    if len(X) != d:
        raise ValueError(f"X needs {d} components, got {len(X)}")
    return ClosedSurfaceSpec(
        ParametrizedSurface.from_text(d, X), tuple(Axis(*a) for a in axes), "custom"
    )


def _check_expressions(scene: Scene) -> None:
    """Parse every expression so that errors surface at load time."""
    raw = scene.raw
    d = raw["d"]
    if "variations" in raw:
        for v in raw["variations"]:
            _build(scene, ["variations"], lambda v=v: parse(v, default_variables(3)))
    if "metric" in raw:
        scene.metric()
    if "hypersurface" in raw:
        scene.hypersurface()
    if "closed_surface" in raw:
        scene.closed_surface()
    if "base_point" in raw and len(raw["base_point"]) not in (d - 1, d):
        line, col = _locate(scene.text, ["base_point"])
        raise SceneError(f"base_point needs {d - 1} coordinates", line, col, scene.source)


def loads(text: str, source: str = "<scene>") -> Scene:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SceneError(f"invalid JSON: {exc.msg}", exc.lineno, exc.colno, source) from None
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        err = errors[0]
        path = list(err.absolute_path)
        if err.validator == "additionalProperties":
            extra = [k for k in err.instance if k not in err.schema.get("properties", {})]
            path = path + extra[:1]
            msg = f"unknown key {extra[0]!r}" + (f" in {'/'.join(map(str, err.absolute_path))}" if err.absolute_path else "")
        else:
            msg = f"{'/'.join(map(str, path)) or 'scene'}: {err.message}"
        line, col = _locate(text, path)
        raise SceneError(msg, line, col, source)
    scene = Scene(raw, source, text)
    _check_expressions(scene)
    return scene


def load(path: str) -> Scene:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read(), path)


def shipped_scenes() -> dict[str, Scene]:
    """The default scenes bundled with the package, by file stem."""
    out = {}
    for entry in sorted(resources.files("confhyp").joinpath("scenes").iterdir(), key=lambda p: p.name):
        if entry.name.endswith(".json"):
            out[entry.name[:-5]] = loads(entry.read_text(encoding="utf-8"), f"scenes/{entry.name}")
    return out


def shipped_scene(name: str) -> Scene:
    path = resources.files("confhyp").joinpath("scenes", f"{name}.json")
    return loads(path.read_text(encoding="utf-8"), f"scenes/{name}.json")
