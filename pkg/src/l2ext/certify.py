"""Pass/fail certificates for denominators and model weights.

Class membership of ``g`` is certified per ``delta``; the hypotheses on the
weight ``R`` and the twist construction ``a``, ``tau``, ``A`` are checked on
polar grids in the punctured ``w``-disk.  ``R`` is always radial in ``|w|``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import denomcore as dc
from .denomcore import DenominatorSpec, TwistSamples
from .exprlang import DomainError, ExprError

__all__ = [
    "RangeError",
    "RModel",
    "WeightModel",
    "BergResult",
    "DeltaCertificate",
    "HConditions",
    "ClassCheck",
    "TwistAt",
    "CurvatureCheck",
    "OhsawaResult",
    "check_class_d",
    "certify_delta",
    "check_h_conditions",
    "a_function",
    "g_inverse",
    "check_berg",
    "tau_and_A",
    "curvature_identity_check",
    "check_ohsawa",
    "DEFAULT_GAMMAS",
    "DEFAULT_EPSILONS",
]

PUNCTURE = 1e-3
STENCIL_FRACTION = 0.01
BISECT_ITERATIONS = 50
BISECT_BRACKET = (1.0, 1e12)
DEFAULT_GAMMAS = (1.01, 1.1, 1.5)
DEFAULT_EPSILONS = (0.01, 0.05, 0.1)
MONOTONE_GRID = np.geomspace(1.0, dc.K_SCAN_XMAX, 401)
H_GRID = np.geomspace(1.0, 100.0, 200)


class RangeError(ArithmeticError):
    """``e^{-R} g(alpha)`` fell below ``g(1)``, so ``g^{-1}`` of it is < 1."""

    def __init__(self, message: str, w_abs2: float | None = None):
        super().__init__(message)
        self.w_abs2 = w_abs2


# --------------------------------------------------------------------------- weights


@dataclass(frozen=True)
class RModel:
    """Radial weight ``R(|w|)``: zero, a constant, or a radial profile.

    A profile is either a callable of ``|w|`` or samples ``(|w|, R)`` on
    (0, 1], linearly interpolated (constant beyond the end samples).
    """

    kind: str = "zero"
    value: float = 0.0
    fn: Callable | None = field(default=None, compare=False)
    samples: tuple[tuple[float, ...], tuple[float, ...]] | None = None
    label: str = ""

    @classmethod
    def zero(cls) -> "RModel":
        return cls("zero")

    @classmethod
    def const(cls, value: float) -> "RModel":
        return cls("const", value=float(value))

    @classmethod
    def radial(cls, fn: Callable, label: str = "radial") -> "RModel":
        return cls("radial", fn=fn, label=label)

    @classmethod
    def radial_samples(cls, r, R, label: str = "radial") -> "RModel":
        r = np.asarray(r, dtype=float)
        R = np.asarray(R, dtype=float)
        if r.ndim != 1 or r.shape != R.shape or r.size < 2:
            raise ValueError("radial R needs matching 1-D arrays of at least two samples")
        if np.any(np.diff(r) <= 0) or r[0] <= 0 or r[-1] > 1:
            raise ValueError("radial R samples must be strictly increasing in (0, 1]")
        if not np.all(np.isfinite(R)):
            raise ValueError("radial R must be finite on (0, 1]")
        return cls("radial", samples=(tuple(r), tuple(R)), label=label)

    def __call__(self, w_abs):
        w_abs = np.asarray(w_abs, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(w_abs)
        if self.kind == "const":
            return np.full_like(w_abs, self.value)
        if self.fn is not None:
            return np.asarray(self.fn(w_abs), dtype=float) + np.zeros_like(w_abs)
        r, R = self.samples
        return np.interp(w_abs, r, R)

    @property
    def weight_id(self) -> str:
        if self.kind == "zero":
            return "R=0"
        if self.kind == "const":
            return f"R={self.value:g}"
        return f"R={self.label}"


@dataclass(frozen=True)
class WeightModel:
    """Model weights ``kappa`` and ``R``.

    ``kappa_w`` (and for the bidisk ``kappa_z``) are polynomial coefficients
    in ``|w|^2`` (``|z|^2``), constant term first; ``coupling`` adds
    ``c Re(z conj(w))`` on the bidisk.
    """

    domain: str = "disk"
    kappa_w: tuple[float, ...] = ()
    kappa_z: tuple[float, ...] = ()
    coupling: float = 0.0
    R: RModel = field(default_factory=RModel.zero)

    def __post_init__(self):
        if self.domain not in ("disk", "bidisk"):
            raise ValueError(f"unknown domain {self.domain!r}")
        if self.domain == "disk" and (self.kappa_z or self.coupling):
            raise ValueError("the disk model has only the w variable")
        if self.coupling:
            a = _levi_min(self.kappa_z)
            b = _levi_min(self.kappa_w)
            if a < 0 or b < 0 or a * b < self.coupling**2 / 4:
                raise ValueError(
                    f"kappa is not plurisubharmonic: need a*b >= c^2/4 with a={a:g}, b={b:g}, c={self.coupling:g}"
                )

    @classmethod
    def bidisk(cls, a: float = 0.0, b: float = 0.0, c: float = 0.0, R: RModel | None = None) -> "WeightModel":
        return cls("bidisk", kappa_w=(0.0, float(b)) if b else (), kappa_z=(0.0, float(a)) if a else (),
                   coupling=float(c), R=R or RModel.zero())

    @classmethod
    def disk(cls, kappa: Sequence[float] = (), R: RModel | None = None) -> "WeightModel":
        return cls("disk", kappa_w=tuple(float(v) for v in kappa), R=R or RModel.zero())

    def kappa_w_at(self, r2):
        return _poly(self.kappa_w, r2)

    def kappa_z_at(self, r2):
        return _poly(self.kappa_z, r2)

    def is_psh(self) -> bool:
        a = _levi_min(self.kappa_z) if self.domain == "bidisk" else 0.0
        b = _levi_min(self.kappa_w)
        return a >= 0 and b >= 0 and a * b >= self.coupling**2 / 4

    @property
    def weight_id(self) -> str:
        def poly(c):
            return "0" if not any(c) else "+".join(f"{v:g}r^{2 * i}" for i, v in enumerate(c) if v)

        parts = [f"kw={poly(self.kappa_w)}"]
        if self.domain == "bidisk":
            parts.insert(0, f"kz={poly(self.kappa_z)}")
            parts.append(f"c={self.coupling:g}")
        parts.append(self.R.weight_id)
        return ";".join(parts)


def _poly(coeffs: Sequence[float], t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    for c in reversed(coeffs):
        out = out * t + c
    return out


def _levi_min(coeffs: Sequence[float]) -> float:
    """min over t = |z|^2 in [0, 1] of d/dt (t p'(t)) = p' + t p''."""
    if len(coeffs) < 2:
        return 0.0
    t = np.linspace(0.0, 1.0, 257)
    dp = np.polynomial.polynomial.polyval(t, np.polynomial.polynomial.polyder(coeffs))
    d2p = np.polynomial.polynomial.polyval(t, np.polynomial.polynomial.polyder(coeffs, 2))
    return float(np.min(dp + t * d2p))


# --------------------------------------------------------------------------- certificates


@dataclass(frozen=True)
class BergResult:
    passed: bool
    condition: str | None = None
    witness: tuple[float, float, float, float] | None = None
    min_laplacian: float = math.inf
    detail: str = ""

    def to_json(self) -> dict:
        return {"pass": self.passed, "witness": list(self.witness) if self.witness else None}


@dataclass(frozen=True)
class HConditions:
    ok: tuple[bool, bool, bool]
    witness: tuple[int | None, int | None, int | None] = (None, None, None)

    def __iter__(self):
        return iter(self.ok)

    @property
    def all(self) -> bool:
        return all(self.ok)


@dataclass(frozen=True)
class DeltaCertificate:
    delta: float
    C: float
    K: float
    witness_x: float
    ode_max_residual: float
    h_conditions: tuple[bool, bool, bool]
    bound: float
    berg: BergResult | None = None

    @property
    def finite(self) -> bool:
        return math.isfinite(self.bound)

    def to_json(self) -> dict:
        def num(v):
            return float(v) if math.isfinite(v) else None

        return {
            "delta": self.delta,
            "C": num(self.C),
            "K": num(self.K),
            "witness_x": num(self.witness_x),
            "bound": num(self.bound),
            "ode_max_residual": num(self.ode_max_residual),
            "h_conditions": [bool(v) for v in self.h_conditions],
            "berg": self.berg.to_json() if self.berg else {"pass": None, "witness": None},
        }


@dataclass(frozen=True)
class ClassCheck:
    spec_id: str
    passed: bool
    best: DeltaCertificate | None
    certificates: tuple[DeltaCertificate, ...]
    failed_condition: str | None = None
    reason: str = ""
    witness_x: float | None = None

    def __iter__(self):
        # (best, all), mirroring the documented return pair
        return iter((self.best, list(self.certificates)))


def check_h_conditions(spec_or_samples: DenominatorSpec | TwistSamples, delta: float | None = None,
                       xs=None) -> HConditions:
    """``x + h >= 1``, ``1 + h' >= 1`` and ``h'' < 0`` at every sample."""
    if isinstance(spec_or_samples, TwistSamples):
        smp = spec_or_samples
    else:
        smp = dc.h_delta_samples(spec_or_samples, delta, H_GRID if xs is None else xs)
    conds = (smp.xs + smp.h >= 1.0, 1.0 + smp.hp >= 1.0, smp.hpp < 0.0)
    ok = tuple(bool(np.all(c)) for c in conds)
    wit = tuple(None if o else int(np.flatnonzero(~c)[0]) for o, c in zip(ok, conds))
    return HConditions(ok, wit)


def _representable_grid(spec: DenominatorSpec, xs) -> np.ndarray:
    # h'' is proportional to 1/g; drop points where g overflowed
    xs = np.asarray(xs, dtype=float)
    keep = np.asarray(dc._base_inv_g(spec, xs)) > 0
    return xs[keep]


def certify_delta(spec: DenominatorSpec, delta: float, xs=None, weight: WeightModel | None = None,
                  berg: BergResult | None = None) -> DeltaCertificate:
    """Certificate for one ``delta``: C, K, ODE residuals, h-conditions and bound."""
    C = dc.c_of_g(spec)
    kd = dc.k_delta(spec, delta)
    grid = _representable_grid(spec, H_GRID if xs is None else xs)
    hc = check_h_conditions(spec, delta, grid)
    ode = max(dc.ode_residual(spec, delta, x) for x in grid[:: max(1, grid.size // 50)])
    bound = 4.0 * (kd.K + (1.0 + delta) / delta * C) if kd.finite else math.inf
    if berg is None and weight is not None:
        berg = check_berg(spec, weight)
    return DeltaCertificate(float(delta), float(C), float(kd.K), float(kd.witness_x), float(ode), hc.ok,
                            float(bound), berg)


def _monotone_violation(spec: DenominatorSpec) -> float | None:
    xs = MONOTONE_GRID
    try:
        d = np.asarray(dc.eval_dg(spec, xs))
    except (DomainError, ExprError):
        d = np.empty_like(xs)
        for i, x in enumerate(xs):
            try:
                d[i] = float(dc.eval_dg(spec, x))
            except (DomainError, ExprError):
                g = float(dc.eval_g(spec, x))
                d[i] = math.inf if math.isinf(g) else math.nan
    bad = np.flatnonzero(~(d >= 0))
    return float(xs[bad[0]]) if bad.size else None


def check_class_d(spec: DenominatorSpec, delta_grid: Sequence[float] = (0.5, 1.0, math.sqrt(2), 2.0),
                  weight: WeightModel | None = None) -> ClassCheck:
    """Certify membership of ``g``: increasing, finite tail, finite ``K_delta``.

    Failures are returned as data.  ``best`` is the finite certificate with
    the smallest bound.
    """
    x_bad = _monotone_violation(spec)
    if x_bad is not None:
        return ClassCheck(spec.spec_id, False, None, (), "increasing",
                          f"g is not increasing: g'({x_bad:g}) < 0", x_bad)
    ti = dc.tail_integral(spec)
    if not ti.finite:
        return ClassCheck(spec.spec_id, False, None, (), "integrable",
                          f"int_1^inf dt/g diverges (decay exponent of the decade pieces "
                          f"{ti.decay_exponent:.3g} <= {dc.DIVERGENCE_EXPONENT:g})",
                          10.0 ** ti.decades)
    berg = check_berg(spec, weight) if weight is not None else None
    certs = tuple(certify_delta(spec, d, berg=berg) for d in delta_grid)
    finite = [c for c in certs if c.finite]
    if not finite:
        return ClassCheck(spec.spec_id, False, None, certs, "bounded_ratio",
                          "K_delta is infinite for every delta on the grid", certs[0].witness_x if certs else None)
    best = min(finite, key=lambda c: c.bound)
    return ClassCheck(spec.spec_id, True, best, certs)


# --------------------------------------------------------------------------- a, tau, A


def g_inverse(spec: DenominatorSpec, target):
    """``g^{-1}`` by bisection in ``log x`` on [1, 1e12], 50 halvings."""
    target = np.asarray(target, dtype=float)
    lo = np.full(target.shape, math.log(BISECT_BRACKET[0]))
    hi = np.full(target.shape, math.log(BISECT_BRACKET[1]))
    for _ in range(BISECT_ITERATIONS):
        mid = 0.5 * (lo + hi)
        above = np.asarray(dc.eval_g(spec, np.exp(mid))) >= target
        hi = np.where(above, mid, hi)
        lo = np.where(above, lo, mid)
    return np.exp(0.5 * (lo + hi))


def _alpha(gamma: float, eps: float, w_abs2):
    return gamma - np.log(np.asarray(w_abs2, dtype=float) + eps * eps)


def a_function(spec: DenominatorSpec, weight: WeightModel, gamma: float, eps: float, w_abs2):
    """``a = g^{-1}(e^{-R} g(alpha))`` with ``alpha = gamma - log(|w|^2 + eps^2)``.

    Raises :class:`RangeError` where ``alpha < 1`` or ``e^{-R} g(alpha) < g(1)``.
    """
    if gamma <= 1 or eps <= 0:
        raise ValueError("need gamma > 1 and eps > 0")
    w2 = np.asarray(w_abs2, dtype=float)
    alpha = _alpha(gamma, eps, w2)
    outside = alpha < 1.0
    if np.any(outside):
        bad = float(np.ravel(w2)[int(np.flatnonzero(np.ravel(outside))[0])]) if w2.ndim else float(w2)
        raise RangeError(f"alpha = gamma - log(|w|^2 + eps^2) < 1 at |w|^2 = {bad:g}", bad)
    R = weight.R(np.sqrt(w2))
    target = np.exp(-R) * np.asarray(dc.eval_g(spec, alpha))
    g1 = float(dc.eval_g(spec, 1.0))
    low = target < g1
    if np.any(low):
        i = int(np.flatnonzero(np.ravel(low))[0])
        bad = float(np.ravel(w2)[i]) if w2.ndim else float(w2)
        raise RangeError(f"e^-R g(alpha) < g(1) at |w|^2 = {bad:g}", bad)
    out = g_inverse(spec, target)
    return float(out) if np.ndim(w_abs2) == 0 else out


@dataclass(frozen=True)
class TwistAt:
    tau: float
    A: float
    A_over_g: float


def tau_and_A(spec: DenominatorSpec, delta: float, a_val) -> TwistAt:
    """``tau = a + h(a)`` and ``A = (1+h'(a))^2 / (-h''(a))``."""
    a = float(a_val)
    if a < 1:
        raise ValueError("a must be >= 1")
    tau = a + float(dc.h_delta(spec, delta, a))
    A = (1.0 + float(dc.h_prime(spec, delta, a))) ** 2 / -float(dc.h_second(spec, delta, a))
    return TwistAt(tau, A, A / float(dc.eval_g(spec, a)))


# --------------------------------------------------------------------------- grids


def _polar_grid(n: int, r_min: float = PUNCTURE, r_max: float = 1.0 - PUNCTURE):
    r = np.linspace(r_min, r_max, n)
    theta = np.linspace(0.0, 2 * math.pi, n, endpoint=False)
    rr, tt = np.meshgrid(r, theta, indexing="ij")
    return rr * np.cos(tt), rr * np.sin(tt), (r_max - r_min) / (n - 1)


def _laplacian(fn, x: np.ndarray, y: np.ndarray, h) -> np.ndarray:
    """5-point Laplacian of ``fn(x, y)`` with (possibly per-point) step ``h``."""
    c = fn(x, y)
    return (fn(x + h, y) + fn(x - h, y) + fn(x, y + h) + fn(x, y - h) - 4.0 * c) / (h * h)


def check_berg(spec: DenominatorSpec, weight: WeightModel, gamma_grid: Sequence[float] = DEFAULT_GAMMAS,
               eps_grid: Sequence[float] = DEFAULT_EPSILONS, grid_n: int = 32) -> BergResult:
    """Grid check of the two hypotheses on ``R``.

    For every (gamma, eps): ``a >= 1`` at each grid point, and the 5-point
    Laplacian of ``alpha - g^{-1}(e^{-R} g(alpha))`` is >= ``-1e-6/h^2``.
    Additionally ``g^{-1}(e^{-R} g(1 - log|w|^2)) >= 1`` on the grid radii.
    The stencil step at each point is the grid spacing capped at
    ``STENCIL_FRACTION * min(|w|, eps, 1 - |w|)``, the length scale on which
    ``alpha`` varies, and ``h`` in the tolerance is that local step.
    """
    x, y, spacing = _polar_grid(grid_n)
    r = np.hypot(x, y)
    g1 = float(dc.eval_g(spec, 1.0))

    # eps-free form on the radii
    radii = np.linspace(PUNCTURE, 1.0 - PUNCTURE, grid_n)
    t = 1.0 - np.log(radii**2)
    target = np.exp(-weight.R(radii)) * np.asarray(dc.eval_g(spec, t))
    low = np.flatnonzero(target < g1)
    if low.size:
        rw = float(radii[low[0]])
        return BergResult(False, "a_lower_bound", (rw, 0.0, 1.0, 0.0),
                          detail=f"g^-1(e^-R g(1 - log|w|^2)) < 1 at |w| = {rw:g}")

    min_lap = math.inf
    for gamma in gamma_grid:
        for eps in eps_grid:
            try:
                a_function(spec, weight, gamma, eps, r * r)
            except RangeError as exc:
                i = int(np.argmin(np.abs(r * r - exc.w_abs2)))
                return BergResult(False, "a_lower_bound", (float(x.flat[i]), float(y.flat[i]), gamma, eps),
                                  detail=str(exc))

            def phi(xx, yy, gamma=gamma, eps=eps):
                w2 = xx * xx + yy * yy
                target = np.exp(-weight.R(np.sqrt(w2))) * np.asarray(dc.eval_g(spec, _alpha(gamma, eps, w2)))
                # below g(1) only outside the checked points; clamp for the stencil
                return _alpha(gamma, eps, w2) - g_inverse(spec, np.maximum(target, g1))

            h = np.minimum(spacing, STENCIL_FRACTION * np.minimum(np.minimum(r, eps), 1.0 - r))
            lap = _laplacian(phi, x, y, h)
            tol = 1e-6 / (h * h)
            bad = np.flatnonzero((lap < -tol).ravel())
            min_lap = min(min_lap, float(np.min(lap)))
            if bad.size:
                i = bad[0]
                return BergResult(False, "subharmonic", (float(x.flat[i]), float(y.flat[i]), gamma, eps), min_lap,
                                  detail=f"discrete Laplacian {lap.flat[i]:.3g} < 0")
    return BergResult(True, None, None, min_lap)


# --------------------------------------------------------------------------- curvature identity


@dataclass(frozen=True)
class CurvatureCheck:
    max_residual: float
    lower_bound_ratio: float | None
    witness: tuple[float, float]


def curvature_identity_check(spec: DenominatorSpec, delta: float, weight: WeightModel, gamma: float, eps: float,
                             grid_n: int = 24, step: float = 1e-4) -> CurvatureCheck:
    """Finite-difference check of
    ``-ddbar tau - (1/A) dtau ^ dbar tau = (1 + h'(a)) (-ddbar a)``.

    Both sides are coefficients of ``dw ^ dbar w`` (``ddbar = Laplacian/4``,
    ``|d tau|^2 = |grad tau|^2/4``).  For ``R = 0`` also returns
    ``min (-ddbar a) (|w|^2+eps^2)^2 / eps^2``, which should be 1.
    """
    x, y, _ = _polar_grid(grid_n)

    def a_at(xx, yy):
        return np.asarray(a_function(spec, weight, gamma, eps, xx * xx + yy * yy))

    offsets = [(0, 0), (step, 0), (-step, 0), (0, step), (0, -step)]
    a_vals = [a_at(x + dx, y + dy) for dx, dy in offsets]
    flat = np.concatenate([v.ravel() for v in a_vals])
    h_vals = [v.reshape(x.shape) for v in np.split(np.asarray(dc.h_delta(spec, delta, flat)), len(offsets))]

    def lap(v):
        return (v[1] + v[2] + v[3] + v[4] - 4.0 * v[0]) / (step * step)

    a0 = a_vals[0]
    hp = np.asarray(dc.h_prime(spec, delta, a0.ravel())).reshape(a0.shape)
    hpp = np.asarray(dc.h_second(spec, delta, a0.ravel())).reshape(a0.shape)
    A = (1.0 + hp) ** 2 / -hpp
    # tau = a + h(a); the stencils are linear, so difference the two parts
    # separately instead of rounding their sum first
    lap_tau = lap(a_vals) + lap(h_vals)
    grad2_tau = (((a_vals[1] - a_vals[2]) + (h_vals[1] - h_vals[2])) / (2 * step)) ** 2 + (
        ((a_vals[3] - a_vals[4]) + (h_vals[3] - h_vals[4])) / (2 * step)) ** 2
    lhs = -lap_tau / 4.0 - grad2_tau / 4.0 / A
    rhs = (1.0 + hp) * (-lap(a_vals) / 4.0)
    diff = np.abs(lhs - rhs)
    i = int(np.argmax(diff))
    lower = None
    if weight.R.kind == "zero":
        w2 = x * x + y * y
        lower = float(np.min(-lap(a_vals) / 4.0 * (w2 + eps * eps) ** 2 / (eps * eps)))
    return CurvatureCheck(float(diff.flat[i]), lower, (float(x.flat[i]), float(y.flat[i])))


# --------------------------------------------------------------------------- Ohsawa conditions


@dataclass(frozen=True)
class OhsawaResult:
    below_log: bool
    r_subharmonic: bool
    shifted_subharmonic: bool
    witness: tuple[float, float] | None = None

    @property
    def passed(self) -> bool:
        return self.below_log and self.r_subharmonic and self.shifted_subharmonic


def check_ohsawa(weight: WeightModel, grid_n: int = 32) -> OhsawaResult:
    """``R + log|w|^2 <= 0``, ``R`` subharmonic and ``R + log|w|^2`` subharmonic, on the grid."""
    x, y, spacing = _polar_grid(grid_n)
    r = np.hypot(x, y)
    h = np.minimum(spacing, STENCIL_FRACTION * np.minimum(r, 1.0 - r))
    tol = 1e-6 / (h * h)

    def R(xx, yy):
        return weight.R(np.hypot(xx, yy))

    def shifted(xx, yy):
        return R(xx, yy) + np.log(xx * xx + yy * yy)

    below = R(x, y) + np.log(r * r) <= 1e-12
    lap_r = _laplacian(R, x, y, h) >= -tol
    lap_s = _laplacian(shifted, x, y, h) >= -tol
    witness = None
    for cond in (below, lap_r, lap_s):
        if not np.all(cond):
            i = int(np.flatnonzero(~cond.ravel())[0])
            witness = (float(x.flat[i]), float(y.flat[i]))
            break
    return OhsawaResult(bool(np.all(below)), bool(np.all(lap_r)), bool(np.all(lap_s)), witness)
