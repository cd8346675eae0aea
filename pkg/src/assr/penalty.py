"""Sparsity penalties g(x) on x >= 0 with closed-form derivatives.

Four kinds are built in: the convex ``l1`` baseline and three concave
penalties (``exp``, ``log``, ``arctan``). Every function here accepts scalars
or numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError, DomainError

KIND_CODES = {"l1": 0, "exp": 1, "log": 2, "arctan": 3}
_ALIASES = {
    "l1": "l1",
    "exponential": "exp",
    "exp": "exp",
    "log": "log",
    "logarithmic": "log",
    "arctan": "arctan",
    "atan": "arctan",
    "arctangent": "arctan",
}
# Rule-1 (non-negativity + subanalyticity) is only asserted for these kinds;
# anything else would have to certify itself.
SUBANALYTIC_KINDS = frozenset(KIND_CODES)


@dataclass(frozen=True)
class Penalty:
    """A penalty kind plus its shape parameter.

    ``param`` is gamma for ``exp``, epsilon for ``log`` and eta for
    ``arctan``; it is ignored (and stored as ``None``) for ``l1``.
    """

    kind: str
    param: Optional[float] = None

    def __post_init__(self):
        kind = _ALIASES.get(str(self.kind).lower())
        if kind is None:
            raise ConfigError(f"unknown penalty kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if kind == "l1":
            object.__setattr__(self, "param", None)
            return
        if self.param is None:
            raise ConfigError(f"penalty {kind!r} needs a positive parameter")
        param = float(self.param)
        if not (math.isfinite(param) and param > 0):
            raise ConfigError(f"penalty {kind!r} parameter must be > 0, got {param}")
        object.__setattr__(self, "param", param)

    @classmethod
    def l1(cls) -> "Penalty":
        return cls("l1")

    @classmethod
    def exponential(cls, gamma: float = 1.0) -> "Penalty":
        return cls("exp", gamma)

    @classmethod
    def logarithmic(cls, eps: float = 1.0) -> "Penalty":
        return cls("log", eps)

    @classmethod
    def arctangent(cls, eta: float = 1.0) -> "Penalty":
        return cls("arctan", eta)

    @classmethod
    def from_dict(cls, d: dict) -> "Penalty":
        """Build from ``{"penalty": "exp", "param": 1.0}``."""
        unknown = set(d) - {"penalty", "param"}
        if unknown:
            raise ConfigError(f"unknown penalty keys: {sorted(unknown)}")
        if "penalty" not in d:
            raise ConfigError("penalty entry needs a 'penalty' name")
        return cls(d["penalty"], d.get("param", 1.0))

    def to_dict(self) -> dict:
        return {"penalty": self.kind, "param": self.param}

    @property
    def code(self) -> int:
        """Integer tag used by the compiled kernels."""
        return KIND_CODES[self.kind]

    @property
    def kernel_param(self) -> float:
        return 0.0 if self.param is None else self.param

    @property
    def is_baseline(self) -> bool:
        return self.kind == "l1"

    @property
    def label(self) -> str:
        if self.kind == "l1":
            return "l1"
        return f"{self.kind}({self.param:g})"

    def __str__(self):
        return self.label

    def g(self, x):
        return g(self, x)

    def g_prime(self, x):
        return g_prime(self, x)

    def g_second(self, x):
        return g_second(self, x)


def _as_nonneg(x):
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise DomainError("penalty is only defined on x >= 0")
    return arr


def _out(arr, x):
    return float(arr) if np.ndim(x) == 0 else arr


def g(p: Penalty, x):
    """Penalty value g(x) for x >= 0."""
    xa = _as_nonneg(x)
    if p.kind == "l1":
        val = xa.copy()
    elif p.kind == "exp":
        val = -np.expm1(-p.param * xa)
    elif p.kind == "log":
        val = np.log(xa + p.param)
    else:
        val = np.arctan(xa / p.param)
    return _out(val, x)


def g_prime(p: Penalty, x):
    """First derivative g'(x) for x >= 0."""
    xa = _as_nonneg(x)
    if p.kind == "l1":
        val = np.ones_like(xa)
    elif p.kind == "exp":
        val = p.param * np.exp(-p.param * xa)
    elif p.kind == "log":
        val = 1.0 / (xa + p.param)
    else:
        val = p.param / (p.param**2 + xa**2)
    return _out(val, x)


def g_second(p: Penalty, x):
    """Second derivative g''(x) for x >= 0 (never positive for built-ins)."""
    xa = _as_nonneg(x)
    if p.kind == "l1":
        val = np.zeros_like(xa)
    elif p.kind == "exp":
        val = -(p.param**2) * np.exp(-p.param * xa)
    elif p.kind == "log":
        val = -1.0 / (xa + p.param) ** 2
    else:
        val = -2.0 * p.param * xa / (p.param**2 + xa**2) ** 2
    return _out(val, x)


@dataclass
class RuleReport:
    """Outcome of :func:`validate_rules`.

    ``violations`` holds ``(rule_id, x, value)`` triples. ``baseline_exempt``
    is set for the l1 baseline, which fails strict concavity by design.
    """

    penalty: Penalty
    lam: float
    violations: list = field(default_factory=list)
    sup_second_derivative_magnitude: float = 0.0
    baseline_exempt: bool = False

    @property
    def passed(self) -> bool:
        return not self.violations

    @property
    def usable(self) -> bool:
        """True when the penalty may drive the dynamics at this lambda."""
        return self.passed or self.baseline_exempt

    def summary(self) -> str:
        if self.passed:
            return f"{self.penalty.label} at lambda={self.lam:g}: all rules hold"
        rules = sorted({v[0] for v in self.violations})
        msg = f"{self.penalty.label} at lambda={self.lam:g}: violates {', '.join(rules)}"
        if self.baseline_exempt:
            msg += " (baseline-exempt)"
        return msg

    def to_dict(self) -> dict:
        return {
            "penalty": self.penalty.kind,
            "param": self.penalty.param,
            "lambda": self.lam,
            "passed": self.passed,
            "baseline_exempt": self.baseline_exempt,
            "sup_second_derivative_magnitude": self.sup_second_derivative_magnitude,
            "violations": [
                {"rule": r, "x": float(x), "value": float(v)} for r, x, v in self.violations
            ],
        }


def default_grid(n: int = 10_000, x_min: float = 1e-6, x_max: float = 1e3) -> np.ndarray:
    return np.logspace(math.log10(x_min), math.log10(x_max), n)


def sup_second_derivative(p: Penalty, grid=None) -> float:
    """sup over x > 0 of |g''(x)|.

    Closed form where the maximiser is at x -> 0+, grid maximum otherwise.
    """
    if p.kind == "l1":
        return 0.0
    if p.kind == "exp":
        return p.param**2
    if p.kind == "log":
        return 1.0 / p.param**2
    xs = default_grid() if grid is None else np.asarray(grid, dtype=float)
    return float(np.max(np.abs(g_second(p, xs))))


def validate_rules(p: Penalty, lam: float, grid=None) -> RuleReport:
    """Check the admissibility rules for penalty ``p`` at weight ``lam``.

    rule-1: g >= 0 (subanalyticity is asserted for the built-in kinds).
    rule-2: g' >= 0 and finite.
    rule-3: -1/lam < g''(x) < 0 for every x > 0.

    Failures are reported, never raised.
    """
    if not lam > 0:
        raise ConfigError(f"lambda must be > 0, got {lam}")
    xs = default_grid() if grid is None else np.asarray(grid, dtype=float)
    report = RuleReport(penalty=p, lam=float(lam), baseline_exempt=p.is_baseline)

    if p.kind not in SUBANALYTIC_KINDS:
        report.violations.append(("rule-1", float("nan"), float("nan")))

    pts = np.concatenate([[0.0], xs])
    gv = g(p, pts)
    bad = np.flatnonzero(~(gv >= 0))
    if bad.size:
        i = bad[0]
        report.violations.append(("rule-1", float(pts[i]), float(gv[i])))

    gp = g_prime(p, pts)
    bad = np.flatnonzero(~(np.isfinite(gp) & (gp >= 0)))
    if bad.size:
        i = bad[0]
        report.violations.append(("rule-2", float(pts[i]), float(gp[i])))

    gpp = g_second(p, xs)
    gp_x = gp[1:]
    # g'' underflows to exactly 0 once g' itself has underflowed (exp at large
    # x); only a zero where g' is still representable breaks strict concavity.
    flat = (gpp == 0) & (gp_x > np.finfo(float).tiny)
    bad = np.flatnonzero((gpp > 0) | flat)
    if bad.size:
        i = bad[0]
        report.violations.append(("rule-3", float(xs[i]), float(gpp[i])))

    sup = sup_second_derivative(p, xs)
    report.sup_second_derivative_magnitude = sup
    if p.kind in ("exp", "log"):
        if sup >= 1.0 / lam:
            report.violations.append(("rule-3", 0.0, -sup))
    else:
        bad = np.flatnonzero(gpp <= -1.0 / lam)
        if bad.size:
            i = int(np.argmin(gpp))
            report.violations.append(("rule-3", float(xs[i]), float(gpp[i])))
    return report


def check_derivatives(p: Penalty, xs, h: float = 1e-5) -> float:
    """Largest gap between the analytic derivatives and central differences."""
    xs = np.asarray(xs, dtype=float)
    if np.any(xs < h) or h <= 0:
        raise DomainError("sample points must satisfy x >= h > 0")
    d1 = (g(p, xs + h) - g(p, xs - h)) / (2 * h)
    d2 = (g_prime(p, xs + h) - g_prime(p, xs - h)) / (2 * h)
    dev1 = np.abs(d1 - g_prime(p, xs))
    dev2 = np.abs(d2 - g_second(p, xs))
    return float(max(dev1.max(initial=0.0), dev2.max(initial=0.0)))
