"""Check records shared by the identity suites, the CLI and the tests."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np


def residual(lhs, rhs) -> float:
    """max |lhs - rhs|, relative when the reference magnitude exceeds 1."""
    lhs = np.asarray(lhs, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    scale = max(1.0, float(np.max(np.abs(rhs), initial=0.0)))
    return float(np.max(np.abs(lhs - rhs), initial=0.0)) / scale


@dataclass
class Check:
    name: str
    residual: float
    tol: float
    passed: bool = field(init=False)
    note: str = ""

    def __post_init__(self):
        self.passed = bool(np.isfinite(self.residual) and self.residual < self.tol)

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"{mark} {self.name}: residual={self.residual:.3e} tol={self.tol:.1e}"


@dataclass
class Report:
    title: str
    checks: list[Check] = field(default_factory=list)
    values: dict = field(default_factory=dict)

    def add(self, name: str, lhs, rhs, tol: float, note: str = "") -> Check:
        c = Check(name, residual(lhs, rhs), tol, note)
        self.checks.append(c)
        return c

    def add_value(self, name: str, value: float, tol: float, note: str = "") -> Check:
        c = Check(name, float(abs(value)), tol, note)
        self.checks.append(c)
        return c

    def extend(self, other: Report, prefix: str = "") -> None:
        for c in other.checks:
            c.name = prefix + c.name
            self.checks.append(c)
        self.values.update({prefix + k: v for k, v in other.values.items()})

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def worst(self) -> dict[str, float]:
        """Largest residual per check name."""
        out: dict[str, float] = {}
        for c in self.checks:
            out[c.name] = max(out.get(c.name, 0.0), c.residual)
        return out

    def merged(self) -> list[Check]:
        """One check per name: a failing one if any, else the worst residual."""
        best: dict[str, Check] = {}
        for c in self.checks:
            b = best.get(c.name)
            if b is None or (c.passed, -c.residual) < (b.passed, -b.residual):
                best[c.name] = c
        return list(best.values())

    def as_dict(self) -> dict:
        return {
            "title": self.title,
            "passed": self.passed,
            "checks": [asdict(c) for c in self.merged()],
            "values": self.values,
        }
