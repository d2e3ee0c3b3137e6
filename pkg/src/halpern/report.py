"""Lightweight pass/fail records shared by the checkers."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable


@dataclass(frozen=True)
class Check:
    name: str
    lhs: float
    rhs: float
    ok: bool
    relation: str = "<="
    step: int | None = None
    detail: str = ""

    @property
    def abs_diff(self) -> float:
        return abs(self.lhs - self.rhs)

    def to_json(self, suite: str = "") -> str:
        rec = asdict(self)
        rec["abs_diff"] = self.abs_diff
        if suite:
            rec = {"suite": suite, **rec}
        return json.dumps({k: _jsonable(v) for k, v in rec.items()}, sort_keys=False)


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    return v


def check_le(name: str, lhs: float, rhs: float, rel: float = 0.0, abs_tol: float = 0.0, step: int | None = None) -> Check:
    ok = lhs <= rhs * (1.0 + rel) + abs_tol if rhs >= 0 else lhs <= rhs * (1.0 - rel) + abs_tol
    return Check(name, float(lhs), float(rhs), bool(ok), "<=", step)


def check_eq(name: str, lhs: float, rhs: float, tol: float, step: int | None = None) -> Check:
    return Check(name, float(lhs), float(rhs), bool(abs(lhs - rhs) <= tol), "==", step, f"tol={tol:g}")


@dataclass
class Report:
    checks: list = field(default_factory=list)

    def add(self, c: Check) -> Check:
        self.checks.append(c)
        return c

    def extend(self, cs: Iterable[Check]) -> None:
        self.checks.extend(cs)

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    @property
    def failures(self) -> list:
        return [c for c in self.checks if not c.ok]

    def __len__(self) -> int:
        return len(self.checks)

    def summary(self) -> str:
        f = self.failures
        if not f:
            return f"{len(self.checks)} checks passed"
        c = f[0]
        return f"{len(f)}/{len(self.checks)} checks failed; first: {c.name} step={c.step} lhs={c.lhs!r} rhs={c.rhs!r}"
