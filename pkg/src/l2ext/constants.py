"""Extension constants, their optimisation over delta, and the family table."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from . import denomcore as dc
from .denomcore import DenominatorSpec
from .search import golden_section_min

__all__ = [
    "GENERIC",
    "AS_PRINTED",
    "ExtensionBound",
    "FamilyForms",
    "DemaillyComparison",
    "ReportRow",
    "Report",
    "extension_bound",
    "optimal_delta",
    "family_closed_forms",
    "fn1_sharp_k_bound",
    "fn1_weight_identity",
    "demailly_comparison",
    "reproduce_report",
    "REPORT_HEADER",
]

GENERIC = "generic"
AS_PRINTED = "as_printed"

DELTA_BRACKET = (1e-3, 1e3)
DELTA_SCAN_POINTS = 256
DELTA_REL_TOL = 1e-6

REPORT_HEADER = ("family", "s", "N", "delta", "K_numeric", "K_bound", "C", "generic_bound",
                 "as_printed_bound", "discrepancy")

NORMS = {
    "fn1": "|w|^{2-2s} weight",
    "fn2": "1/(|w|^2 g(log(e/|w|^2))) weight",
    "fn3": "1/(|w|^2 g(log(e/|w|^2))) weight",
    "fn4": "1/(|w|^2 g(log(e/|w|^2))) weight",
    "expr": "1/(|w|^2 g(log(e/|w|^2))) weight",
}


@dataclass(frozen=True)
class FamilyForms:
    family: str
    s: float | None
    delta: float
    K_bound: float
    as_printed: float

    def generic_at_bound(self, C: float = 1.0) -> float:
        """``4(K + (1+delta)/delta C)`` with the closed-form K-bound, in the same
        norm as :attr:`as_printed` (for fn1 that divides by ``s``)."""
        value = 4.0 * (self.K_bound + (1.0 + self.delta) / self.delta * C)
        return value / self.s if self.family == "fn1" else value


def family_closed_forms(family: str, s: float | None, delta: float) -> FamilyForms:
    """Closed-form K-bound and stated constant for a built-in family."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    d = float(delta)
    if family in ("fn1", "fn3", "fn4"):
        if s is None or not 0 < s <= 1:
            raise ValueError(f"{family} needs s in (0, 1]")
    if family == "fn1":
        return FamilyForms(family, s, d, 1.0 + d, (1.0 + d) ** 2 / d * 4.0 / s)
    if family == "fn2":
        return FamilyForms(family, None, d, (1.0 + d) ** 2 / (4.0 * d), (2.0 + d) * (1.0 + d) / d)
    if family in ("fn3", "fn4"):
        return FamilyForms(family, s, d, s * (1.0 + d), 4.0 * (1.0 + d * s) * (1.0 + d) / d)
    raise ValueError(f"no closed forms for family {family!r}")


def fn1_sharp_k_bound(s: float, delta: float) -> float:
    """The sharper fn1 bound ``(1+delta) exp(-(1+delta-s)/(1+delta))``."""
    return (1.0 + delta) * math.exp(-(1.0 + delta - s) / (1.0 + delta))


def fn1_weight_identity(s: float, w_abs) -> tuple[np.ndarray, np.ndarray]:
    """Both sides of ``|w|^2 g(log(e/|w|^2)) = |w|^{2-2s}/s`` for fn1(s)."""
    w = np.asarray(w_abs, dtype=float)
    lhs = w * w * np.asarray(dc.eval_g(DenominatorSpec.fn1(s), 1.0 - np.log(w * w)))
    rhs = w ** (2.0 - 2.0 * s) / s
    return lhs, rhs


@dataclass(frozen=True)
class ExtensionBound:
    spec_id: str
    delta: float
    K: float
    C: float
    generic_bound: float
    as_printed_bound: float | None
    norm_description: str
    K_bound: float | None = None
    witness_x: float = math.nan

    def to_json(self) -> dict:
        return {k: (v if not isinstance(v, float) or math.isfinite(v) else None) for k, v in asdict(self).items()}


def extension_bound(spec: DenominatorSpec, delta: float) -> ExtensionBound:
    """``4(K_delta + (1+delta)/delta C)`` for the normalised ``spec``.

    A spec that is not normalised is normalised first, so the result only
    depends on the shape of ``g``.
    """
    spec = dc.normalize(spec)
    C = dc.c_of_g(spec)
    kd = dc.k_delta(spec, delta)
    bound = 4.0 * (kd.K + (1.0 + delta) / delta * C) if kd.finite else math.inf
    printed = kb = None
    if spec.builtin:
        forms = family_closed_forms(spec.kind, spec.s, delta)
        printed, kb = forms.as_printed, forms.K_bound
    return ExtensionBound(spec.spec_id, float(delta), kd.K, C, bound, printed, NORMS[spec.kind], kb, kd.witness_x)


def _objective(spec: DenominatorSpec, objective: str):
    if objective == GENERIC:
        spec = dc.normalize(spec)
        C = dc.c_of_g(spec)

        def f(delta: float) -> float:
            kd = dc.k_delta(spec, delta)
            return 4.0 * (kd.K + (1.0 + delta) / delta * C) if kd.finite else math.inf

        return f
    if objective == AS_PRINTED:
        if not spec.builtin:
            raise ValueError("the as-printed constant exists only for the built-in families")
        return lambda delta: family_closed_forms(spec.kind, spec.s, delta).as_printed
    raise ValueError(f"unknown objective {objective!r}")


def optimal_delta(spec: DenominatorSpec, objective: str = GENERIC,
                  bracket: tuple[float, float] = DELTA_BRACKET) -> tuple[float, float]:
    """Minimise the constant over delta: log-spaced scan, then golden section.

    Returns ``(delta_star, value)``.
    """
    f = _objective(spec, objective)
    logs = np.linspace(math.log(bracket[0]), math.log(bracket[1]), DELTA_SCAN_POINTS)
    values = np.array([f(math.exp(t)) for t in logs])
    finite = np.isfinite(values)
    if not np.any(finite):
        raise ValueError(f"{objective} constant is not finite anywhere on delta in {bracket}")
    i = int(np.argmin(np.where(finite, values, np.inf)))
    lo, hi = logs[max(i - 1, 0)], logs[min(i + 1, logs.size - 1)]
    t, v = golden_section_min(lambda t: f(math.exp(t)), lo, hi, rel_tol=0.0, abs_tol=DELTA_REL_TOL / 10)
    if values[i] < v:
        t, v = logs[i], values[i]
    return math.exp(t), float(v)


@dataclass(frozen=True)
class DemaillyComparison:
    s: float
    direct_route: float
    demailly_route: float
    inequality_holds: bool
    points: int
    min_gap: float


def demailly_comparison(s: float, points: int = 10_000) -> DemaillyComparison:
    """Compare ``16/s`` with ``(3+2 sqrt 2)/s^2`` and check ``s log(e/x) <= x^-s`` on (0, 1]."""
    if not 0 < s <= 1:
        raise ValueError("s must be in (0, 1]")
    x = np.geomspace(1e-12, 1.0, points)
    lhs = s * (1.0 - np.log(x))
    rhs = x ** (-s)
    gap = rhs - lhs
    holds = bool(np.all(gap >= -1e-12 * np.maximum(1.0, rhs)))
    return DemaillyComparison(s, 16.0 / s, (3.0 + 2.0 * math.sqrt(2.0)) / s**2, holds, points, float(np.min(gap)))


@dataclass(frozen=True)
class ReportRow:
    family: str
    s: float | None
    N: int | None
    delta: float
    K_numeric: float
    K_bound: float
    C: float
    generic_bound: float
    as_printed_bound: float
    discrepancy: bool


@dataclass(frozen=True)
class Report:
    rows: tuple[ReportRow, ...]
    demailly: tuple[DemaillyComparison, ...]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_HEADER)
        for r in self.rows:
            w.writerow([r.family, "" if r.s is None else repr(r.s), "" if r.N is None else r.N, repr(r.delta),
                        repr(r.K_numeric), repr(r.K_bound), repr(r.C), repr(r.generic_bound),
                        repr(r.as_printed_bound), str(r.discrepancy).lower()])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"rows": [asdict(r) for r in self.rows],
                           "demailly": [asdict(d) for d in self.demailly]}, indent=2)


REPORT_SPECS = (
    DenominatorSpec.fn1(1.0),
    DenominatorSpec.fn2(),
    DenominatorSpec.fn3(0.25),
    DenominatorSpec.fn4(0.25, 3),
)


def _stated_optimum(spec: DenominatorSpec) -> float:
    if spec.kind == "fn1":
        return 1.0
    if spec.kind == "fn2":
        return math.sqrt(2.0)
    return spec.s ** -0.5


def report_row(spec: DenominatorSpec, delta: float) -> ReportRow:
    """One table row; ``generic_bound`` uses the closed-form K-bound so that it
    is directly comparable with the stated constant."""
    forms = family_closed_forms(spec.kind, spec.s, delta)
    C = dc.c_of_g(spec)
    kd = dc.k_delta(spec, delta)
    generic = forms.generic_at_bound(C)
    gap = abs(generic - forms.as_printed) > 1e-9 * max(abs(generic), abs(forms.as_printed))
    N = spec.N if spec.kind == "fn4" else None
    return ReportRow(spec.kind, spec.s, N, float(delta), kd.K, forms.K_bound, C, generic, forms.as_printed, gap)


def reproduce_report(specs: Sequence[DenominatorSpec] = REPORT_SPECS,
                     demailly_s: Sequence[float] = (0.1, 0.5, 1.0)) -> Report:
    """Rows for each family at its stated optimal delta and at delta = 1."""
    rows = []
    for spec in specs:
        for delta in (_stated_optimum(spec), 1.0):
            rows.append(report_row(spec, delta))
    return Report(tuple(rows), tuple(demailly_comparison(s) for s in demailly_s))
