"""Minimal-norm extensions on the unit disk and the bidisk.

Norms, with ``dmu = 2 dx dy`` on each factor (the ``sqrt(-1) dw ^ dbar w``
convention)::

    N_F = 1/(2 pi) int_X |F|^2 e^{-kappa} / (|w|^2 g(log(e/|w|^2))) dmu
    nu_f = int_Z |f|^2 e^{-(R + kappa)} dmu          (point evaluation on the disk)

The ``w`` integral is always taken in ``t = 1 - 2 log|w|``, which turns
``2 dr / r`` into ``dt`` and removes the singularity at ``w = 0``.  With this
pair of normalisations the unweighted ratio is exactly ``C(g)``, i.e. 1.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg

from . import denomcore as dc
from .certify import RModel, WeightModel, _poly, check_berg
from .constants import GENERIC, extension_bound, optimal_delta
from .denomcore import DenominatorSpec
from .quadrature import adaptive_quad, gauss_legendre

__all__ = [
    "MomentTable",
    "ModelVerdict",
    "GramMatrix",
    "NumericalFailure",
    "disk_moments",
    "disk_moment_direct",
    "disk_min_extension",
    "z_moments",
    "bidisk_gram",
    "bidisk_min_extension",
    "sweep_verify",
    "verdicts_to_csv",
    "VERDICT_HEADER",
    "OK",
    "CRITICAL",
    "UNCERTIFIED",
]

OK = "OK"
CRITICAL = "CRITICAL"
UNCERTIFIED = "UNCERTIFIED"

VERDICT_HEADER = ("domain", "spec", "weight", "f", "delta", "ratio", "bound", "margin", "degree", "quad_error", "flag")

MOMENT_TOL = 1e-12
NORMALIZED_TOL = 1e-8
PD_TOL = 1e-10

# tensor rule for the bidisk Gram entries
RHO_NODES = 64
PSI_NODES = 64
T_PANEL_NODES = 20
T_PANELS = (1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0)
# coarser rule used only for the error estimate
COARSE = (48, 48, 16)


class NumericalFailure(ArithmeticError):
    """Gram matrix lost positive definiteness or the constraint block is singular."""


def _r_of_t(t):
    return np.exp(0.5 * (1.0 - np.asarray(t, dtype=float)))


def _require_normalized(spec: DenominatorSpec) -> float:
    C = dc.c_of_g(spec)
    if not abs(C - 1.0) <= NORMALIZED_TOL:
        raise ValueError(f"{spec.spec_id} is not normalised (C = {C!r}); normalise it first")
    return C


# --------------------------------------------------------------------------- disk


@dataclass(frozen=True)
class MomentTable:
    spec_id: str
    kappa: tuple[float, ...]
    moments: np.ndarray
    errors: np.ndarray

    @property
    def K_max(self) -> int:
        return self.moments.size - 1


def _kappa_shift(kappa: Sequence[float], r2):
    """``kappa(r^2) - kappa(0)`` without cancellation."""
    return _poly((0.0,) + tuple(kappa[1:]), r2) if len(kappa) > 1 else np.zeros_like(np.asarray(r2, dtype=float))


def _t_pieces(f, k: int, tol: float) -> tuple[float, float]:
    """``int_1^inf f`` over doubling panels, stopping once the ``r^{2k}``
    factor (``k >= 1``) has pushed the integrand below ``tol``."""
    total, err = 0.0, 0.0
    lo, width = 1.0, 1.0
    while True:
        hi = lo + width
        r = adaptive_quad(f, lo, hi, abs_tol=tol / 64, rel_tol=1e-14)
        total += r.value
        err += r.error
        # the integrand is bounded by e^{-k (t-1)} e^{-min kappa} / g(1)
        if k >= 1 and math.exp(-k * (hi - 1.0)) < 1e-18:
            break
        if k == 0 and hi > 1e4:
            break
        lo, width = hi, 2.0 * width
    return total, err


def disk_moments(spec: DenominatorSpec, kappa: Sequence[float] = (), K_max: int = 8) -> MomentTable:
    """``m_k = int_1^inf r^{2k} e^{-kappa(r^2)} / g(t) dt``, ``r = e^{(1-t)/2}``.

    For ``k = 0`` the slowly decaying part ``e^{-kappa(0)} int 1/g = e^{-kappa(0)} C``
    is taken exactly and only the exponentially decaying difference is integrated.
    """
    kappa = tuple(float(c) for c in kappa)
    k0 = kappa[0] if kappa else 0.0
    moments = np.empty(K_max + 1)
    errors = np.empty(K_max + 1)
    for k in range(K_max + 1):
        if k == 0:
            def f(t):
                r2 = _r_of_t(t) ** 2
                return math.exp(-k0) * np.expm1(-_kappa_shift(kappa, r2)) * dc.eval_g_inv(spec, t)

            ti = dc.tail_integral(spec)
            val, err = _t_pieces(f, 0, MOMENT_TOL)
            moments[0] = math.exp(-k0) * ti.value + val
            errors[0] = err + math.exp(-k0) * ti.error
        else:
            def f(t, k=k):
                r2 = _r_of_t(t) ** 2
                return r2**k * np.exp(-_poly(kappa, r2)) * dc.eval_g_inv(spec, t)

            moments[k], errors[k] = _t_pieces(f, k, MOMENT_TOL)
    return MomentTable(spec.spec_id, kappa, moments, errors)


def disk_moment_direct(spec: DenominatorSpec, k: int, kappa: Sequence[float] = ()) -> float:
    """``2 int_0^1 r^{2k-1} e^{-kappa(r^2)} / g(1 - 2 log r) dr`` in ``r`` directly,
    on geometrically refined panels towards ``r = 0`` (``k >= 1``)."""
    if k < 1:
        raise ValueError("the direct r-integral converges only for k >= 1")

    def f(r):
        return 2.0 * r ** (2 * k - 1) * np.exp(-_poly(kappa, r * r)) * dc.eval_g_inv(spec, 1.0 - 2.0 * np.log(r))

    edges = [1.0]
    while edges[-1] ** (2 * k) > 1e-20:
        edges.append(edges[-1] / 10.0)
    total = 0.0
    for hi, lo in zip(edges, edges[1:]):
        total += adaptive_quad(f, lo, hi, abs_tol=1e-14, rel_tol=1e-14).value
    return total


@dataclass(frozen=True)
class ModelVerdict:
    domain: str
    spec_id: str
    weight_id: str
    f_coeffs: tuple
    delta: float
    ratio: float
    bound: float
    margin: float
    truncation_degree: int
    quad_error: float
    flag: str

    def row(self) -> list[str]:
        return [self.domain, self.spec_id, self.weight_id, _poly_text(self.f_coeffs), repr(self.delta),
                repr(self.ratio), repr(self.bound), repr(self.margin), str(self.truncation_degree),
                repr(self.quad_error), self.flag]


def _poly_text(coeffs) -> str:
    terms = []
    for p, c in enumerate(coeffs):
        if c == 0:
            continue
        c = complex(c)
        cs = f"{c.real:g}" if c.imag == 0 else f"({c.real:g}{c.imag:+g}j)"
        terms.append(cs if p == 0 else f"{cs}z" if p == 1 else f"{cs}z^{p}")
    return "+".join(terms) or "0"


def _verdict(domain, spec, weight, f, delta, ratio, bound, degree, quad_error, certified) -> ModelVerdict:
    margin = bound - ratio
    if ratio > bound + quad_error:
        flag = CRITICAL if certified else UNCERTIFIED
    else:
        flag = OK if certified else UNCERTIFIED
    return ModelVerdict(domain, spec.spec_id, weight.weight_id, tuple(f), float(delta), float(ratio), float(bound),
                        float(margin), int(degree), float(quad_error), flag)


def _R_at_zero(weight: WeightModel) -> float:
    if weight.R.kind not in ("zero", "const"):
        raise ValueError("model verification supports R = 0 or a constant R <= 0")
    if weight.R.value > 0:
        raise ValueError("constant R must be <= 0")
    return float(weight.R(0.0))


def disk_min_extension(spec: DenominatorSpec, weight: WeightModel, delta: float,
                       bound: float | None = None, certified: bool | None = None) -> ModelVerdict:
    """Point constraint ``F(0) = f`` on the disk.

    Radial weights make monomials orthogonal, so the constant ``F = f`` is the
    minimiser and the ratio is ``m_0 e^{(R + kappa)(0)}``.
    """
    if weight.domain != "disk":
        raise ValueError("disk_min_extension needs a disk weight")
    _require_normalized(spec)
    R0 = _R_at_zero(weight)
    table = disk_moments(spec, weight.kappa_w, K_max=0)
    k0 = weight.kappa_w[0] if weight.kappa_w else 0.0
    factor = math.exp(R0 + k0)
    ratio = table.moments[0] * factor
    err = table.errors[0] * factor
    if bound is None:
        bound = extension_bound(spec, delta).generic_bound
    if certified is None:
        certified = weight.is_psh() and check_berg(spec, weight).passed
    return _verdict("disk", spec, weight, (1.0,), delta, ratio, bound, 0, err, certified)


# --------------------------------------------------------------------------- bidisk


def z_moments(kappa_z: Sequence[float], P: int) -> np.ndarray:
    """``zm_p = int_disk |z|^{2p} e^{-kappa_z(|z|^2)} dmu = 4 pi int_0^1 rho^{2p+1} e^{-kappa_z} drho``."""
    out = np.empty(P + 1)
    for p in range(P + 1):
        r = adaptive_quad(lambda rho, p=p: rho ** (2 * p + 1) * np.exp(-_poly(kappa_z, rho * rho)), 0.0, 1.0,
                          abs_tol=1e-15, rel_tol=1e-14)
        out[p] = 4.0 * math.pi * r.value
    return out


@dataclass(frozen=True)
class GramMatrix:
    degree: int
    matrix: np.ndarray
    path: str

    def index(self, p: int, q: int) -> int:
        return p * (self.degree + 1) + q

    def truncate(self, degree: int) -> "GramMatrix":
        if degree > self.degree:
            raise ValueError("cannot raise the degree of a computed Gram matrix")
        idx = [self.index(p, q) for p in range(degree + 1) for q in range(degree + 1)]
        return GramMatrix(degree, self.matrix[np.ix_(idx, idx)], self.path)


def _t_rule(panel_nodes: int):
    ts, ws = [], []
    for lo, hi in zip(T_PANELS, T_PANELS[1:]):
        x, w = gauss_legendre(panel_nodes, lo, hi)
        ts.append(x)
        ws.append(w)
    return np.concatenate(ts), np.concatenate(ws)


@lru_cache(maxsize=64)
def _angular_table(c: float, rho_key: tuple, r_key: tuple, psi_nodes: int, n_max: int) -> np.ndarray:
    """``J_n(rho r) = int_0^{2 pi} e^{i n psi} e^{-c rho r cos psi} dpsi`` for
    ``n = 0..n_max``, by the periodic trapezoid rule (real by symmetry)."""
    x = np.outer(np.asarray(rho_key), np.asarray(r_key))
    psi = 2.0 * math.pi * np.arange(psi_nodes) / psi_nodes
    e = np.exp(-c * x[..., None] * np.cos(psi))
    n = np.arange(n_max + 1)
    cosines = np.cos(np.outer(psi, n))
    return (e @ cosines) * (2.0 * math.pi / psi_nodes)


def _tensor_gram(spec: DenominatorSpec, weight: WeightModel, degree: int, rho_nodes: int, psi_nodes: int,
                 panel_nodes: int) -> np.ndarray:
    n = degree + 1
    rho, wrho = gauss_legendre(rho_nodes, 0.0, 1.0)
    t, wt = _t_rule(panel_nodes)
    r = _r_of_t(t)
    inv_g = np.asarray(dc.eval_g_inv(spec, t))
    kw0 = weight.kappa_w[0] if weight.kappa_w else 0.0
    ez = np.exp(-weight.kappa_z_at(rho * rho))
    ew = np.exp(-weight.kappa_w_at(r * r))
    J = _angular_table(weight.coupling, tuple(rho), tuple(r), psi_nodes, degree)
    C = dc.c_of_g(spec)

    M = np.zeros((n * n, n * n))
    for p in range(n):
        for q in range(n):
            for p2 in range(n):
                q2 = p + q - p2
                if not 0 <= q2 < n:
                    continue
                i, j = p * n + q, p2 * n + q2
                if j < i:
                    continue
                zfac = 2.0 * wrho * rho ** (p + p2 + 1) * ez
                Jn = J[:, :, abs(p - p2)]
                if q + q2 == 0:
                    # p == p2; take the 1/g tail exactly
                    inner = ((ew * Jn - math.exp(-kw0) * 2.0 * math.pi) * inv_g) @ wt
                    inner = inner + math.exp(-kw0) * 2.0 * math.pi * C
                else:
                    inner = (r ** (q + q2) * ew * Jn * inv_g) @ wt
                M[i, j] = M[j, i] = float(zfac @ inner)
    return M


def _separable_gram(spec: DenominatorSpec, weight: WeightModel, degree: int) -> tuple[np.ndarray, float]:
    zm = z_moments(weight.kappa_z, degree)
    table = disk_moments(spec, weight.kappa_w, K_max=degree)
    diag = np.outer(zm, table.moments).ravel()
    err = float(np.max(np.outer(zm, table.errors)))
    return np.diag(diag), err


def bidisk_gram(spec: DenominatorSpec, weight: WeightModel, degree: int, path: str = "auto",
                nodes: tuple[int, int, int] = (RHO_NODES, PSI_NODES, T_PANEL_NODES)) -> GramMatrix:
    """Gram matrix of ``z^p w^q``, ``0 <= p, q <= degree`` (index ``p*(degree+1)+q``).

    Entries vanish unless ``p + q = p' + q'``.  For those::

        2 int_0^1 rho^{p+p'+1} e^{-kappa_z} int_1^inf r^{q+q'} e^{-kappa_w} J_{p-p'}(rho r) / g(t) dt drho

    ``path='separable'`` (default when ``c = 0``) multiplies 1-D moments;
    ``path='tensor'`` uses Gauss-Legendre in rho and t and the trapezoid rule
    in the relative angle.
    """
    if weight.domain != "bidisk":
        raise ValueError("bidisk_gram needs a bidisk weight")
    if path == "auto":
        path = "separable" if weight.coupling == 0 else "tensor"
    if path == "separable":
        if weight.coupling != 0:
            raise ValueError("the separable path needs c = 0")
        M, _ = _separable_gram(spec, weight, degree)
    elif path == "tensor":
        M = _tensor_gram(spec, weight, degree, *nodes)
    else:
        raise ValueError(f"unknown Gram path {path!r}")
    _check_pd(M)
    return GramMatrix(degree, M, path)


def _check_pd(M: np.ndarray) -> None:
    asym = np.max(np.abs(M - M.T))
    if asym > 1e-12 * np.max(np.abs(M)):
        raise NumericalFailure(f"Gram matrix is not symmetric (deviation {asym:.3g})")
    # scale to unit diagonal so the test does not depend on monomial sizes
    d = np.sqrt(np.diag(M))
    if np.any(d <= 0):
        raise NumericalFailure("Gram matrix has a nonpositive diagonal entry")
    lam = np.linalg.eigvalsh(M / np.outer(d, d))[0]
    if lam < -PD_TOL:
        raise NumericalFailure(f"Gram matrix is not positive definite (min eigenvalue {lam:.3g})")


def _constrained_min(gram: GramMatrix, f: np.ndarray) -> tuple[float, float]:
    """Minimise ``c^H M c`` subject to ``c_{p,0} = f_p``; returns ``(KKT value, Schur value)``."""
    n = gram.degree + 1
    M = gram.matrix
    fixed = [gram.index(p, 0) for p in range(n)]
    B = np.zeros((n, n * n))
    B[np.arange(n), fixed] = 1.0
    kkt = np.block([[M, B.T], [B, np.zeros((n, n))]])
    rhs = np.concatenate([np.zeros(n * n, dtype=complex), f])
    try:
        sol = scipy.linalg.solve(kkt, rhs, assume_a="sym")
    except scipy.linalg.LinAlgError as exc:
        raise NumericalFailure(f"KKT system is singular: {exc}") from exc
    c = sol[: n * n]
    kkt_val = float(np.real(np.conj(c) @ M @ c))

    free = [i for i in range(n * n) if i not in fixed]
    Mff = M[np.ix_(fixed, fixed)]
    Mfy = M[np.ix_(fixed, free)]
    Myy = M[np.ix_(free, free)]
    S = Mff - Mfy @ scipy.linalg.solve(Myy, Mfy.T, assume_a="pos")
    schur_val = float(np.real(np.conj(f) @ S @ f))
    return kkt_val, schur_val


def _nu_f(weight: WeightModel, f: np.ndarray, R0: float) -> float:
    zm = z_moments(weight.kappa_z, f.size - 1)
    kw0 = weight.kappa_w[0] if weight.kappa_w else 0.0
    return float(np.sum(np.abs(f) ** 2 * zm)) * math.exp(-R0 - kw0)


def bidisk_min_extension(spec: DenominatorSpec, weight: WeightModel, f_coeffs: Sequence[complex], degree: int,
                         delta: float, bound: float | None = None, certified: bool | None = None,
                         gram: GramMatrix | None = None, coarse: GramMatrix | None = None) -> ModelVerdict:
    """Minimal ``N_F`` over polynomial ``F`` of bidegree ``<= degree`` with ``F(z, 0) = f(z)``,
    divided by ``nu_f``.  ``quad_error`` combines a coarse-rule rerun with the
    KKT/Schur-complement disagreement."""
    _require_normalized(spec)
    R0 = _R_at_zero(weight)
    f = np.zeros(degree + 1, dtype=complex)
    coeffs = np.asarray(f_coeffs, dtype=complex)
    if coeffs.size > degree + 1 and np.any(coeffs[degree + 1:] != 0):
        raise NumericalFailure(f"degree {degree} is too small for f of degree {coeffs.size - 1}")
    f[: min(coeffs.size, degree + 1)] = coeffs[: degree + 1]
    if not np.any(f):
        raise ValueError("f must be nonzero")
    if gram is None:
        gram = bidisk_gram(spec, weight, degree)
    elif gram.degree != degree:
        gram = gram.truncate(degree)
    nu = _nu_f(weight, f, R0)
    kkt_val, schur_val = _constrained_min(gram, f)
    ratio = kkt_val / nu
    err = abs(kkt_val - schur_val) / nu
    if gram.path == "tensor":
        if coarse is None:
            coarse = GramMatrix(degree, _tensor_gram(spec, weight, degree, *COARSE), "tensor")
        elif coarse.degree != degree:
            coarse = coarse.truncate(degree)
        err += abs(_constrained_min(coarse, f)[0] / nu - ratio)
    else:
        err += _separable_error(spec, weight, degree) * ratio
    if bound is None:
        bound = extension_bound(spec, delta).generic_bound
    if certified is None:
        certified = weight.is_psh() and check_berg(spec, _w_disk(weight)).passed
    return _verdict("bidisk", spec, weight, tuple(coeffs.real if not np.any(coeffs.imag) else coeffs), delta, ratio,
                    bound, degree, err, certified)


def _separable_error(spec: DenominatorSpec, weight: WeightModel, degree: int) -> float:
    table = disk_moments(spec, weight.kappa_w, K_max=degree)
    return float(np.max(table.errors / table.moments))


def _w_disk(weight: WeightModel) -> WeightModel:
    return WeightModel.disk(weight.kappa_w, R=weight.R)


# --------------------------------------------------------------------------- sweep


@dataclass(frozen=True)
class _Case:
    spec: DenominatorSpec
    weight: WeightModel
    f_list: tuple[tuple[complex, ...], ...]
    degrees: tuple[int, ...]
    delta: float
    bound: float


def _run_case(case: _Case) -> list[ModelVerdict]:
    spec, weight, delta, bound = case.spec, case.weight, case.delta, case.bound
    certified = weight.is_psh() and check_berg(spec, _w_disk(weight) if weight.domain == "bidisk" else weight).passed
    if weight.domain == "disk":
        return [disk_min_extension(spec, weight, delta, bound, certified)]
    top = max(case.degrees)
    gram = bidisk_gram(spec, weight, top)
    coarse = GramMatrix(top, _tensor_gram(spec, weight, top, *COARSE), "tensor") if gram.path == "tensor" else None
    out = []
    for f in case.f_list:
        for D in sorted(case.degrees):
            if len(f) - 1 > D:
                continue
            out.append(bidisk_min_extension(spec, weight, f, D, delta, bound, certified, gram, coarse))
    return out


def sweep_verify(specs: Iterable[DenominatorSpec], weights: Iterable[WeightModel],
                 f_list: Sequence[Sequence[complex]] = ((1.0,),), degrees: Sequence[int] = (2, 4, 6),
                 jobs: int = 1) -> list[ModelVerdict]:
    """Every (spec, weight, f, degree) combination; verdicts come back in input order.

    Each spec is verified at the delta minimising its generic constant.  A
    verdict is CRITICAL when the hypotheses were certified and
    ``ratio > bound + quad_error``; UNCERTIFIED when they were not.
    """
    specs = list(specs)
    weights = list(weights)
    for spec in specs:
        _require_normalized(spec)
    fs = tuple(tuple(f) for f in f_list)
    cases = []
    for spec in specs:
        delta = optimal_delta(spec, GENERIC)[0]
        bound = extension_bound(spec, delta).generic_bound
        cases += [_Case(spec, w, fs, tuple(degrees), delta, bound) for w in weights]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_case, cases))
    else:
        results = [_run_case(c) for c in cases]
    return [v for chunk in results for v in chunk]


def verdicts_to_csv(verdicts: Iterable[ModelVerdict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(VERDICT_HEADER)
    for v in verdicts:
        w.writerow(v.row())
    return buf.getvalue()


DEFAULT_DISK_WEIGHTS = (
    WeightModel.disk(),
    WeightModel.disk((0.0, 1.0)),
    WeightModel.disk((0.0, 2.0, 1.0)),
    WeightModel.disk(R=RModel.const(-0.3)),
)

DEFAULT_BIDISK_WEIGHTS = (
    WeightModel.bidisk(),
    WeightModel.bidisk(1.0, 1.0),
    WeightModel.bidisk(1.0, 1.0, 1.0),
    WeightModel.bidisk(2.0, 1.0, -2.0, R=RModel.const(-0.2)),
)
