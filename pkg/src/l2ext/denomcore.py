"""Admissible denominators ``g`` and their twist functions.

A denominator is one of the four built-in families or a parsed expression,
times a positive scale ``lambda``.  Everything that depends only on the shape
of ``g`` (``G_delta``, ``h_delta`` and its derivatives, the argmax of the
``K_delta`` ratio) is computed from the unscaled base function, so scaling a
spec changes ``C`` and ``K`` by exactly ``1/lambda`` and nothing else.

Built-in families (``s`` in (0, 1], integer ``N >= 2``)::

    fn1  s^-1 exp(s (x-1))
    fn2  x^2
    fn3  s^-1 x^(1+s)
    fn4  s^-1 x L_1 ... L_{N-2} L_{N-1}^(1+s),   L_0 = x,  L_j = 1 + log L_{j-1}

All four have tail integral ``int_1^inf dt/g = 1`` at scale 1.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import exprlang
from .exprlang import DomainError, ExprAst
from .quadrature import (
    QuadratureError,
    adaptive_quad,
    compensated_cumsum,
    cumulative_quad,
    kronrod_rule,
)
from .search import golden_section_max

__all__ = [
    "FAMILIES",
    "DivergenceError",
    "DenominatorSpec",
    "TailIntegral",
    "TwistSamples",
    "KDelta",
    "eval_g",
    "eval_dg",
    "eval_g_inv",
    "iterated_logs",
    "tail_cdf",
    "upper_tail",
    "tail_integral",
    "c_of_g",
    "normalize",
    "g_delta",
    "h_delta",
    "h_prime",
    "h_second",
    "h_delta_samples",
    "ode_residual",
    "k_delta",
    "disk_mass",
    "QuadratureError",
]

FAMILIES = ("fn1", "fn2", "fn3", "fn4", "expr")

QUAD_TOL = 1e-10
LOG10 = math.log(10.0)
# decades of t scanned for expression tails; beyond this doubles cannot follow
TAIL_DECADES = 300
# K_delta scan on u = 1/x in [1e-8, 1]
K_SCAN_POINTS = 2048
K_SCAN_XMAX = 1e8
# power-law decay exponent of the decade pieces at or below which the tail diverges
DIVERGENCE_EXPONENT = 1.1


class DivergenceError(ArithmeticError):
    """``int_1^inf dt/g`` is not finite."""


# --------------------------------------------------------------------------- spec


@dataclass(frozen=True)
class DenominatorSpec:
    kind: str
    s: float | None = None
    N: int | None = None
    expr: ExprAst | None = None
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in FAMILIES:
            raise ValueError(f"unknown denominator kind {self.kind!r}")
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ValueError(f"scale must be positive and finite, got {self.scale!r}")
        if self.kind in ("fn1", "fn3", "fn4"):
            if self.s is None or not 0 < self.s <= 1:
                raise ValueError(f"{self.kind} needs s in (0, 1], got {self.s!r}")
        if self.kind == "fn4":
            if self.N is None or int(self.N) != self.N or self.N < 2:
                raise ValueError(f"fn4 needs an integer N >= 2, got {self.N!r}")
        if self.kind == "expr":
            if self.expr is None:
                raise ValueError("expr kind needs an expression")
            free = self.expr.free_params()
            if free:
                raise exprlang.UnboundParameterError(sorted(free)[0])
            _check_positive_expr(self.expr)

    @classmethod
    def fn1(cls, s: float, scale: float = 1.0) -> "DenominatorSpec":
        return cls("fn1", s=float(s), scale=scale)

    @classmethod
    def fn2(cls, scale: float = 1.0) -> "DenominatorSpec":
        return cls("fn2", scale=scale)

    @classmethod
    def fn3(cls, s: float, scale: float = 1.0) -> "DenominatorSpec":
        return cls("fn3", s=float(s), scale=scale)

    @classmethod
    def fn4(cls, s: float, N: int, scale: float = 1.0) -> "DenominatorSpec":
        return cls("fn4", s=float(s), N=int(N), scale=scale)

    @classmethod
    def from_expr(cls, text: str | ExprAst, params: dict | None = None, scale: float = 1.0) -> "DenominatorSpec":
        ast = exprlang.parse(text) if isinstance(text, str) else text
        if params:
            ast = ast.bind(params)
        return cls("expr", expr=ast, scale=scale)

    @property
    def builtin(self) -> bool:
        return self.kind != "expr"

    def with_scale(self, scale: float) -> "DenominatorSpec":
        return replace(self, scale=float(scale))

    @property
    def spec_id(self) -> str:
        if self.kind == "fn2":
            base = "fn2"
        elif self.kind == "fn4":
            base = f"fn4(s={self.s:g},N={self.N})"
        elif self.kind == "expr":
            args = ",".join(f"{k}={v:g}" for k, v in self.expr.params)
            base = f"expr[{self.expr}]" + (f"({args})" if args else "")
        else:
            base = f"{self.kind}(s={self.s:g})"
        return base if self.scale == 1.0 else f"{self.scale:g}*{base}"


@functools.lru_cache(maxsize=256)
def _check_positive_expr(expr: ExprAst) -> None:
    xs = np.geomspace(1.0, K_SCAN_XMAX, 161)
    g = exprlang.evaluate(expr, xs)
    bad = np.flatnonzero(~(g > 0))
    if bad.size:
        x = xs[bad[0]]
        raise DomainError(f"g({x:g}) = {g[bad[0]]!r} is not positive")


# --------------------------------------------------------------------------- g itself


def iterated_logs(x, n: int) -> list[np.ndarray]:
    """``[L_1(x), ..., L_n(x)]`` with ``L_0 = x`` and ``L_j = 1 + log L_{j-1}``.

    ``L_1 = log(e x)``; every ``L_j`` equals 1 at ``x = 1`` and is >= 1 on x >= 1.
    """
    out = []
    cur = np.asarray(x, dtype=float)
    for _ in range(n):
        cur = 1.0 + np.log(cur)
        out.append(cur)
    return out


def _base_g(spec: DenominatorSpec, x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        if spec.kind == "fn1":
            return np.exp(spec.s * (x - 1.0)) / spec.s
        if spec.kind == "fn2":
            return x * x
        if spec.kind == "fn3":
            return x ** (1.0 + spec.s) / spec.s
        if spec.kind == "fn4":
            logs = iterated_logs(x, spec.N - 1)
            out = x / spec.s
            for L in logs[:-1]:
                out = out * L
            return out * logs[-1] ** (1.0 + spec.s)
    g = exprlang.evaluate(spec.expr, x)
    g = np.asarray(g, dtype=float)
    if np.any(~(g > 0)):
        i = int(np.flatnonzero(~(g > 0))[0])
        raise DomainError(f"g({np.ravel(x)[i]:g}) = {np.ravel(g)[i]!r} is not positive")
    return g


def _base_inv_g(spec: DenominatorSpec, x) -> np.ndarray:
    """``1/g`` of the unscaled base, with overflowed ``g`` mapped to 0."""
    g = _base_g(spec, np.asarray(x, dtype=float))
    with np.errstate(divide="ignore"):
        return np.where(np.isinf(g), 0.0, 1.0 / g)


def _as_output(x, value):
    return float(value) if np.ndim(x) == 0 else np.asarray(value, dtype=float)


def eval_g(spec: DenominatorSpec, x):
    """``lambda * g(x)``; overflow gives ``inf``.  Accepts scalars or arrays."""
    xv = np.asarray(x, dtype=float)
    if np.any(xv < 1):
        raise ValueError("g is defined on x >= 1")
    return _as_output(x, spec.scale * _base_g(spec, xv))


def eval_g_inv(spec: DenominatorSpec, x):
    """``1/(lambda g(x))``, exactly 0 where ``g`` overflows."""
    xv = np.asarray(x, dtype=float)
    if np.any(xv < 1):
        raise ValueError("g is defined on x >= 1")
    return _as_output(x, _base_inv_g(spec, xv) / spec.scale)


def eval_dg(spec: DenominatorSpec, x):
    """Derivative of ``lambda * g``: analytic for built-ins, symbolic for expressions."""
    xv = np.asarray(x, dtype=float)
    with np.errstate(over="ignore"):
        if spec.kind == "fn1":
            d = np.exp(spec.s * (xv - 1.0))
        elif spec.kind == "fn2":
            d = 2.0 * xv
        elif spec.kind == "fn3":
            d = (1.0 + spec.s) / spec.s * xv**spec.s
        elif spec.kind == "fn4":
            logs = iterated_logs(xv, spec.N - 1)
            # L_j' = 1 / (x L_1 ... L_{j-1})
            dlog = 1.0 / xv
            prod = xv.copy()
            for j, L in enumerate(logs):
                weight = (1.0 + spec.s) if j == len(logs) - 1 else 1.0
                dlog = dlog + weight / (prod * L)
                prod = prod * L
            d = _base_g(spec, xv) * dlog
        else:
            d = exprlang.evaluate(exprlang.differentiate(spec.expr), xv)
    return _as_output(x, spec.scale * np.asarray(d, dtype=float))


# --------------------------------------------------------------------------- tails


def _closed_upper_tail(spec: DenominatorSpec, x: np.ndarray) -> np.ndarray:
    """``int_x^inf dt/g`` for the unscaled built-ins."""
    if spec.kind == "fn1":
        return np.exp(-spec.s * (x - 1.0))
    if spec.kind == "fn2":
        return 1.0 / x
    if spec.kind == "fn3":
        return np.exp(-spec.s * np.log(x))
    return np.exp(-spec.s * np.log(iterated_logs(x, spec.N - 1)[-1]))


def _closed_tail(spec: DenominatorSpec, x: np.ndarray) -> np.ndarray:
    """``int_1^x dt/g`` for the unscaled built-ins, without cancellation near x = 1."""
    if spec.kind == "fn1":
        return -np.expm1(-spec.s * (x - 1.0))
    if spec.kind == "fn2":
        return (x - 1.0) / x
    if spec.kind == "fn3":
        return -np.expm1(-spec.s * np.log(x))
    return -np.expm1(-spec.s * np.log(iterated_logs(x, spec.N - 1)[-1]))


def _log_integrand(spec: DenominatorSpec):
    # t = e^y:  dt/g(t) = e^y / g(e^y) dy
    def f(y):
        t = np.exp(y)
        return t * _base_inv_g(spec, t)

    return f


PANELS_PER_DECADE = 64
_GK_NODES, _GK_KW, _GK_GW = kronrod_rule()
_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


@dataclass(frozen=True)
class TailIntegral:
    """``C(g)`` plus how it was obtained."""

    value: float
    error: float
    finite: bool
    decades: int = 0
    decay_exponent: float | None = None
    extrapolated: float = 0.0


class _TailTable:
    """``int dt/g`` for an expression on fixed panels of width log(10)/64 in ``log t``.

    The table runs from t = 1 out to t = 1e300 (or until a whole decade of
    ``1/g`` underflows).  Panel integrals use G7/K15 with adaptive fallback;
    forward and reverse compensated sums give ``T(x) = int_1^x`` and
    ``U(x) = int_x^inf`` without cancellation.  A query inside a panel adds a
    16-point Gauss-Legendre integral over the partial panel.

    Whatever lies beyond the table is estimated from the decade sums: if they
    fall off like ``k^-alpha`` with ``alpha > 1.1`` the remainder is
    extrapolated, otherwise the tail is declared divergent.
    """

    def __init__(self, spec: DenominatorSpec):
        self.f = _log_integrand(spec)
        self.width = LOG10 / PANELS_PER_DECADE
        pieces: list[float] = []
        err = 0.0
        zero_decades = 0
        for d in range(TAIL_DECADES):
            vals, e = self._panels(d * PANELS_PER_DECADE, (d + 1) * PANELS_PER_DECADE)
            pieces.extend(vals)
            err += e
            zero_decades = zero_decades + 1 if not any(vals) else 0
            if zero_decades >= 2:
                break
        self.pieces = np.asarray(pieces)
        self.npanels = self.pieces.size
        self.cum = compensated_cumsum(np.concatenate([[0.0], self.pieces]))
        self.rev = compensated_cumsum(np.concatenate([[0.0], self.pieces[::-1]]))[::-1]
        self.integral = self._close(err, zero_decades >= 2)

    def _panels(self, k0: int, k1: int) -> tuple[list[float], float]:
        k = np.arange(k0, k1)
        a = k * self.width
        half = 0.5 * self.width
        nodes = (a + half)[:, None] + half * _GK_NODES[None, :]
        fx = np.asarray(self.f(nodes.ravel())).reshape(nodes.shape)
        if not np.all(np.isfinite(fx)):
            raise QuadratureError("non-finite integrand while tabulating the tail")
        kron = half * fx @ _GK_KW
        err = np.abs(kron - half * fx @ _GK_GW)
        vals = kron.tolist()
        for i in np.flatnonzero(err > 1e-16 + 1e-13 * np.abs(kron)):
            r = adaptive_quad(self.f, a[i], a[i] + self.width, abs_tol=1e-16, rel_tol=1e-13)
            vals[i] = r.value
            err[i] = r.error
        return vals, float(err.sum())

    def _close(self, err: float, exhausted: bool) -> TailIntegral:
        total = float(self.cum[-1])
        ndec = -(-self.npanels // PANELS_PER_DECADE)
        if exhausted or self.pieces[-1] <= 1e-17 * total:
            self.beyond = 0.0
            return TailIntegral(total, err, True, decades=ndec)
        p = np.add.reduceat(self.pieces, np.arange(0, self.npanels, PANELS_PER_DECADE))
        k = np.arange(1, p.size + 1, dtype=float)
        tail = slice(p.size // 2, p.size)
        pos = p[tail] > 0
        slope = np.polyfit(np.log(k[tail][pos]), np.log(p[tail][pos]), 1)[0]
        alpha = float(-slope)
        if alpha <= DIVERGENCE_EXPONENT:
            self.beyond = math.inf
            return TailIntegral(math.inf, math.inf, False, decades=ndec, decay_exponent=alpha)
        self.beyond = float(p[-1] * k[-1] / (alpha - 1.0))
        # a fitted exponent near 1 usually hides logarithmic factors that make
        # the true remainder larger than the power law predicts
        spread = self.beyond * max(1.0, 1.0 / (alpha - 1.0))
        return TailIntegral(total + self.beyond, err + spread, True, decades=ndec,
                            decay_exponent=alpha, extrapolated=self.beyond)

    def _locate(self, x: np.ndarray):
        y = np.log(np.asarray(x, dtype=float))
        k = np.clip(np.floor(y / self.width).astype(np.int64), 0, self.npanels)
        return y, k

    def _gl(self, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        half = 0.5 * (hi - lo)
        nodes = (lo + half)[:, None] + half[:, None] * _GL_X[None, :]
        fx = np.asarray(self.f(nodes.ravel())).reshape(nodes.shape)
        return half * (fx @ _GL_W)

    def lower(self, x: np.ndarray) -> np.ndarray:
        """``int_1^x dt/g``."""
        y, k = self._locate(x)
        inside = k < self.npanels
        out = np.full(y.shape, float(self.cum[-1]))
        if np.any(inside):
            ki = k[inside]
            out[inside] = self.cum[ki] + self._gl(ki * self.width, y[inside])
        return out

    def upper(self, x: np.ndarray) -> np.ndarray:
        """``int_x^inf dt/g`` (including the extrapolated remainder)."""
        y, k = self._locate(x)
        inside = k < self.npanels
        out = np.full(y.shape, self.beyond)
        if np.any(inside):
            ki = k[inside]
            out[inside] = self.rev[ki + 1] + self._gl(y[inside], (ki + 1) * self.width) + self.beyond
        return out


@functools.lru_cache(maxsize=64)
def _tail_table(spec: DenominatorSpec) -> _TailTable:
    return _TailTable(spec.with_scale(1.0))


def tail_cdf(spec: DenominatorSpec, x):
    """``int_1^x dt/(lambda g(t))``: closed form for built-ins, quadrature for expressions."""
    xv = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(xv < 1):
        raise ValueError("tail_cdf is defined on x >= 1")
    if spec.builtin:
        out = _closed_tail(spec, xv)
    else:
        out = _tail_table(spec.with_scale(1.0)).lower(xv)
    return _as_output(x, out.reshape(np.shape(x)) / spec.scale)


def upper_tail(spec: DenominatorSpec, x):
    """``int_x^inf dt/(lambda g)``, computed directly (no ``C - T`` cancellation)."""
    xv = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(xv < 1):
        raise ValueError("upper_tail is defined on x >= 1")
    if spec.builtin:
        out = _closed_upper_tail(spec, xv)
    else:
        _base_c(spec)
        out = _tail_table(spec.with_scale(1.0)).upper(xv)
    return _as_output(x, out.reshape(np.shape(x)) / spec.scale)


def tail_integral(spec: DenominatorSpec) -> TailIntegral:
    """``C(g)`` with diagnostics, scaled by ``1/lambda``.

    Expressions are integrated panel by panel in ``log t`` (the ``u = 1/t``
    map folded into a logarithmic coordinate) out to t = 1e300.
    """
    if spec.builtin:
        return TailIntegral(1.0 / spec.scale, 0.0, True)
    b = _tail_table(spec.with_scale(1.0)).integral
    return replace(b, value=b.value / spec.scale, error=b.error / spec.scale,
                   extrapolated=b.extrapolated / spec.scale)


def c_of_g(spec: DenominatorSpec) -> float:
    """``C(g) = int_1^inf dt/g``; ``inf`` when the tail diverges."""
    return tail_integral(spec).value


def _base_c(spec: DenominatorSpec) -> float:
    c = tail_integral(spec.with_scale(1.0)).value
    if not math.isfinite(c):
        raise DivergenceError(f"int_1^inf dt/g diverges for {spec.spec_id}")
    return c


def normalize(spec: DenominatorSpec) -> DenominatorSpec:
    """Rescale so that ``C(g) = 1``.

    ``C(mu g) = C(g)/mu``, so the new scale is ``scale * C(spec)``.
    """
    c = c_of_g(spec)
    if not math.isfinite(c):
        raise DivergenceError(f"cannot normalize {spec.spec_id}: C(g) diverges")
    return spec.with_scale(spec.scale * c)


# --------------------------------------------------------------------------- twist functions


def _rel_upper(spec: DenominatorSpec, x: np.ndarray) -> np.ndarray:
    """``(C - T(x)) / C``, the fraction of the tail beyond x (scale-free)."""
    if spec.builtin:
        return _closed_upper_tail(spec, x)
    return _tail_table(spec.with_scale(1.0)).upper(x) / _base_c(spec)


def g_delta(spec: DenominatorSpec, delta: float, x):
    """``G_delta(x) = (1 + delta T(x)/C) / (1 + delta)``, in (0, 1]."""
    _check_delta(delta)
    xv = np.atleast_1d(np.asarray(x, dtype=float))
    eps = delta / (1.0 + delta)
    out = 1.0 - eps * _rel_upper(spec, xv)
    return _as_output(x, out.reshape(np.shape(x)))


def h_prime(spec: DenominatorSpec, delta: float, x):
    """``h' = 1/G - 1 = (1-G)/G``, formed without cancellation."""
    xv = np.atleast_1d(np.asarray(x, dtype=float))
    eps = delta / (1.0 + delta)
    q = eps * _rel_upper(spec, xv)
    return _as_output(x, (q / (1.0 - q)).reshape(np.shape(x)))


def h_second(spec: DenominatorSpec, delta: float, x):
    """``h''`` from the ODE ``h'' = -delta (1+h')^2 / ((1+delta) C g)``."""
    xv = np.atleast_1d(np.asarray(x, dtype=float))
    G = np.asarray(g_delta(spec, delta, xv))
    c = _base_c(spec)
    out = -(delta / (1.0 + delta)) * _base_inv_g(spec, xv) / c / (G * G)
    return _as_output(x, out.reshape(np.shape(x)))


def _closed_h(spec: DenominatorSpec, delta: float, x: np.ndarray) -> np.ndarray | None:
    eps = delta / (1.0 + delta)
    if spec.kind == "fn1":
        s = spec.s
        return (np.log1p(-eps * np.exp(-s * (x - 1.0))) - math.log1p(-eps)) / s
    if spec.kind == "fn2":
        return eps * np.log1p((1.0 + delta) * (x - 1.0))
    return None


def h_delta(spec: DenominatorSpec, delta: float, x):
    """``h_delta(x) = int_1^x (1 - G)/G``.

    Closed forms for fn1 and fn2; otherwise cumulative adaptive quadrature over
    the sorted query points (so a whole grid costs one sweep).
    """
    _check_delta(delta)
    xv = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(xv < 1):
        raise ValueError("h_delta is defined on x >= 1")
    closed = _closed_h(spec, delta, xv)
    if closed is not None:
        return _as_output(x, closed.reshape(np.shape(x)))
    order = np.argsort(xv, kind="stable")
    grid = np.concatenate([[1.0], xv[order]])
    vals, _ = cumulative_quad(lambda y: np.asarray(h_prime(spec, delta, y)), grid, abs_tol=QUAD_TOL)
    out = np.empty_like(xv)
    out[order] = vals[1:]
    return _as_output(x, out.reshape(np.shape(x)))


@dataclass(frozen=True)
class TwistSamples:
    delta: float
    xs: np.ndarray
    G: np.ndarray
    h: np.ndarray
    hp: np.ndarray
    hpp: np.ndarray

    def rows(self):
        for row in zip(self.xs, self.G, self.h, self.hp, self.hpp):
            yield tuple(float(v) for v in row)

    def to_csv(self) -> str:
        lines = ["x,G,h,hp,hpp"]
        lines += [",".join(repr(v) for v in row) for row in self.rows()]
        return "\n".join(lines) + "\n"


def h_delta_samples(spec: DenominatorSpec, delta: float, xs) -> TwistSamples:
    xs = np.asarray(xs, dtype=float)
    if xs.ndim != 1 or xs.size == 0:
        raise ValueError("xs must be a nonempty 1-D grid")
    if np.any(np.diff(xs) <= 0) or xs[0] < 1:
        raise ValueError("xs must be strictly increasing and start at x >= 1")
    return TwistSamples(
        delta=float(delta),
        xs=xs,
        G=np.asarray(g_delta(spec, delta, xs)),
        h=np.asarray(h_delta(spec, delta, xs)),
        hp=np.asarray(h_prime(spec, delta, xs)),
        hpp=np.asarray(h_second(spec, delta, xs)),
    )


def ode_residual(spec: DenominatorSpec, delta: float, x: float) -> float:
    """``|h'' + delta (1+h')^2 / ((1+delta) C g)|`` with ``h''`` taken by
    differencing ``h'`` (not from the ODE), step ``max(1e-5, 1e-7 x)``.

    Near x = 1 a one-sided second-order difference keeps the stencil in the
    domain.  Both stencils are Richardson-extrapolated over steps ``k`` and
    ``k/2`` so the difference error stays below the residual being measured
    where ``h''`` is large.
    """
    x = float(x)
    step = max(1e-5, 1e-7 * x)

    def diff(k: float) -> float:
        if x - k >= 1.0:
            hp = np.asarray(h_prime(spec, delta, np.array([x - k, x + k])))
            return (hp[1] - hp[0]) / (2 * k)
        hp = np.asarray(h_prime(spec, delta, np.array([x, x + k, x + 2 * k])))
        return (-3 * hp[0] + 4 * hp[1] - hp[2]) / (2 * k)

    d2 = (4.0 * diff(step / 2) - diff(step)) / 3.0
    one_plus = 1.0 + float(h_prime(spec, delta, x))
    rhs = (delta / (1.0 + delta)) * float(_base_inv_g(spec, x)) / _base_c(spec) * one_plus**2
    return abs(d2 + rhs)


# --------------------------------------------------------------------------- K_delta


@dataclass(frozen=True)
class KDelta:
    K: float
    witness_x: float
    finite: bool = True
    scan: tuple = field(default=(), repr=False, compare=False)


def _check_delta(delta: float) -> None:
    if not (delta > 0 and math.isfinite(delta)):
        raise ValueError(f"delta must be positive and finite, got {delta!r}")


def k_delta(spec: DenominatorSpec, delta: float) -> KDelta:
    """``K_delta(g) = sup_{x>=1} (x + h_delta(x)) / g(x)`` with an argmax witness.

    Scans 2048 points of ``u = 1/x`` in [1e-8, 1] (log-spaced), then refines
    the best scan point by golden-section search in ``log x``.  If the ratio
    is still climbing through the last decade of the scan, the supremum is
    reported as infinite.
    """
    _check_delta(delta)
    _base_c(spec)
    xs = np.geomspace(1.0, K_SCAN_XMAX, K_SCAN_POINTS)
    xs[0] = 1.0
    h = np.asarray(h_delta(spec, delta, xs))
    ratio = (xs + h) * _base_inv_g(spec, xs)
    per_decade = (K_SCAN_POINTS - 1) // 8
    last = ratio[-per_decade - 1:]
    if np.all(np.diff(last) > 0) and last[-1] > last[0] * (1 + 1e-3):
        return KDelta(math.inf, float(xs[-1]), finite=False)
    i = int(np.argmax(ratio))
    lo = xs[max(i - 1, 0)]
    hi = xs[min(i + 1, xs.size - 1)]
    h_lo = float(h[max(i - 1, 0)])
    closed = _closed_h(spec, delta, np.array([1.0])) is not None

    def objective(logx: float) -> float:
        x = math.exp(logx)
        if closed:
            hx = float(h_delta(spec, delta, x))
        else:
            hx = h_lo + adaptive_quad(lambda y: np.asarray(h_prime(spec, delta, y)), lo, x,
                                      abs_tol=1e-14, rel_tol=1e-14).value
        return (x + hx) * float(_base_inv_g(spec, x))

    lx, best = golden_section_max(objective, math.log(lo), math.log(hi), rel_tol=1e-12, abs_tol=1e-13)
    witness = math.exp(lx)
    if ratio[i] >= best:
        best, witness = float(ratio[i]), float(xs[i])
    return KDelta(best / spec.scale, witness, True, scan=(xs, ratio))


# --------------------------------------------------------------------------- disk identity


DISK_SPLIT_R = 1e-3
DISK_T_MAX = 1e300


def disk_mass(spec: DenominatorSpec) -> float:
    """``2 int_0^1 dr / (r g(log(e/r^2)))``.

    The outer annulus ``r in [1e-3, 1]`` is integrated directly in ``r``; the
    inner disk goes through ``t = 1 - 2 log r`` (so ``2 dr/r = -dt``) out to
    ``t = 1e300``, and the remaining sliver uses the analytic (built-ins) or
    numerical (expressions) tail beyond that.  Equals ``C(g)``.
    """

    def outer(r):
        t = 1.0 - 2.0 * np.log(r)
        return 2.0 / r * _base_inv_g(spec, t)

    ring = adaptive_quad(outer, DISK_SPLIT_R, 1.0, abs_tol=QUAD_TOL / 4, rel_tol=1e-14).value
    t0 = 1.0 - 2.0 * math.log(DISK_SPLIT_R)
    f = _log_integrand(spec)
    y0 = math.log(t0)
    y1 = math.log(DISK_T_MAX)
    cuts = np.concatenate([[y0], np.arange(math.ceil(y0 / LOG10), math.floor(y1 / LOG10) + 1) * LOG10, [y1]])
    cuts = np.unique(cuts)
    pieces = [adaptive_quad(f, a, b, abs_tol=QUAD_TOL / cuts.size, rel_tol=1e-14).value
              for a, b in zip(cuts[:-1], cuts[1:])]
    inner = float(compensated_cumsum(pieces)[-1]) if pieces else 0.0
    rest = float(upper_tail(spec.with_scale(1.0), DISK_T_MAX))
    return (ring + inner + rest) / spec.scale

