"""Galerkin eigenproblems on the thin strip around a closed curve.

The strip ``{x - h t nu(s) : 0 < s < L, 0 < t < 1}`` is pulled back to the
rectangle ``(0, L) x (0, 1)``.  In these coordinates the pulled-back Hessian of
``f`` has frame components (tangential-tangential, mixed, normal-normal)

    H_ss = (f_ss + h t k' f_s / rho - rho k f_t / h) / rho^2
    H_sn = (f_st / h + k f_s / rho) / rho
    H_nn = f_tt / h^2

with ``rho = 1 - h t k(s)``, and ``D^2 f : D^2 g`` is their Frobenius product
(the mixed term counted twice).  Expanding the product gives the nine familiar
groups of terms; keeping it factored lets the stiffness be written as
``G^T G`` so small eigenvalues come out of a singular value decomposition.
The area element is ``h rho dt ds``; the common factor ``h`` cancels between
stiffness and mass and is dropped.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from numpy.polynomial import legendre as npleg
from numpy.typing import NDArray

from .curve import CurveGeometry, max_admissible_h
from .errors import (
    ConditioningWarning,
    InvalidArgumentError,
    JacobianSignError,
    KernelCountWarning,
    NoEmbeddingError,
    ThinPlateError,
)
from .limit1d import FourierBasis, assemble_limit_system, solve_limit_eigs
from .numerics import Spectrum, SymmetricPencil, empirical_rate, gauss_legendre, richardson_limit, sym_gen_eig

__all__ = [
    "TensorBasis",
    "ThinFormSpec",
    "ThinPencil",
    "ConvergenceRow",
    "ConvergenceTable",
    "assemble_biharmonic",
    "assemble_laplacian",
    "solve_thin2d",
    "convergence_study",
    "thread_count",
    "H_MIN",
    "H_WARN",
]

H_MIN = 0.005
H_WARN = 0.02
ZERO_MODE_RTOL = 1e-6
OPERATORS = ("biharmonic", "laplacian")


@dataclass(frozen=True)
class TensorBasis:
    """Products of Fourier modes in s and orthonormal shifted Legendre polynomials in t.

    Index ``i * (p + 1) + m`` pairs Fourier function i with ``sqrt(2m+1) P_m(2t-1)``.
    """

    curve: CurveGeometry
    N: int
    p: int = 8

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise InvalidArgumentError(f"Fourier order N must be a positive integer, got {self.N!r}")
        if int(self.p) != self.p or self.p < 2:
            raise InvalidArgumentError(f"polynomial degree p must be an integer >= 2, got {self.p!r}")

    @property
    def dim(self) -> int:
        return (2 * self.N + 1) * (self.p + 1)

    @property
    def fourier(self) -> FourierBasis:
        return FourierBasis(self.N, self.curve.length)

    def legendre(self, t, order: int = 0) -> NDArray[np.float64]:
        """Derivative ``order`` of every t-function at ``t``, shape (n, p + 1)."""
        t = np.asarray(t, dtype=float)
        out = np.empty((t.size, self.p + 1))
        for m in range(self.p + 1):
            c = np.zeros(m + 1)
            c[m] = math.sqrt(2 * m + 1)
            P = npleg.Legendre(c, domain=[0.0, 1.0])
            out[:, m] = P.deriv(order)(t) if order else P(t)
        return out

    def index(self, fourier_index: int, degree: int) -> int:
        return fourier_index * (self.p + 1) + degree

    def project(self, func, n_s: Optional[int] = None, n_t: Optional[int] = None) -> NDArray[np.float64]:
        """L2 projection (unweighted measure ds dt) of ``func(s, t)`` onto the basis."""
        n_s = n_s or max(1024, 16 * self.N)
        rule = gauss_legendre(n_t or self.p + 8)
        s = self.curve.nodes(n_s)
        S, T = np.meshgrid(s, rule.nodes, indexing="ij")
        vals = np.asarray(func(S, T), dtype=float)
        F = self.fourier.evaluate(s)
        P = self.legendre(rule.nodes)
        w = (self.curve.length / n_s) * rule.weights[None, :]
        return np.einsum("si,tm,st->im", F, P, vals * w).ravel()


@dataclass(frozen=True)
class ThinFormSpec:
    """Width, operator and optional mass shift; ``rho_min`` is filled in by assembly."""

    h: float
    operator: str = "biharmonic"
    shift: float = 0.0
    rho_min: Optional[float] = None

    def __post_init__(self):
        if self.operator not in OPERATORS:
            raise InvalidArgumentError(f"operator must be one of {OPERATORS}, got {self.operator!r}")
        if not (math.isfinite(self.h) and self.h > 0):
            raise InvalidArgumentError(f"width h must be positive, got {self.h!r}")
        if not (math.isfinite(self.shift) and self.shift >= 0):
            raise InvalidArgumentError(f"shift must be non-negative, got {self.shift!r}")


@dataclass(frozen=True, eq=False)
class ThinPencil(SymmetricPencil):
    """Strip pencil; ``A = factor^T factor + shift * B``."""

    spec: Optional[ThinFormSpec] = None
    basis: Optional[TensorBasis] = None


def _quadrature(curve, basis, h, n_s, n_t):
    n_s = n_s or 8 * basis.N + 32
    rule = gauss_legendre(n_t or basis.p + 8)
    s = curve.nodes(n_s)
    kap = curve.curvature(s)
    rho = 1.0 - h * np.outer(kap, rule.nodes)
    return s, rule, kap, rho


def _check_width(curve: CurveGeometry, spec: ThinFormSpec, basis: TensorBasis):
    if not curve.has_embedding:
        raise NoEmbeddingError(f"{curve.name} has no embedding; the strip cannot be built")
    if basis.curve is not curve and basis.curve.to_json() != curve.to_json():
        raise InvalidArgumentError("basis was built for a different curve")
    if spec.h < H_MIN:
        raise InvalidArgumentError(f"widths below {H_MIN} are not supported (got h={spec.h})")
    hstar = max_admissible_h(curve)
    if spec.h >= hstar:
        raise JacobianSignError(f"h={spec.h} >= 1/max(curvature) = {hstar:.6g}; 1 - h t k(s) may vanish")
    if spec.h < H_WARN:
        warnings.warn(f"h={spec.h} < {H_WARN}: pencil is badly conditioned", ConditioningWarning, stacklevel=3)


def _fields(curve, basis, spec, n_s, n_t):
    """Tensor-product derivative tables on the quadrature grid, flattened to (n_s*n_t, dim)."""
    s, rule, kap, rho = _quadrature(curve, basis, spec.h, n_s, n_t)
    rho_min = float(rho.min())
    if rho_min <= 0:
        raise JacobianSignError(f"1 - h t k(s) reaches {rho_min:.3e} on the quadrature grid")
    F = [basis.fourier.evaluate(s, k) for k in range(3)]
    P = [basis.legendre(rule.nodes, k) for k in range(3)]

    def kron(a, b):
        return np.einsum("si,tm->stim", F[a], P[b]).reshape(s.size * rule.nodes.size, basis.dim)

    geom = {
        "kap": np.repeat(kap, rule.nodes.size),
        "dkap": np.repeat(curve.curvature_derivative(s), rule.nodes.size),
        "t": np.tile(rule.nodes, s.size),
        "rho": rho.ravel(),
        "w": np.outer(np.full(s.size, curve.length / s.size), rule.weights).ravel() * rho.ravel(),
    }
    return kron, geom, rho_min


def _assemble(curve, spec, basis, n_s, n_t, measure_factor, frame):
    _check_width(curve, spec, basis)
    kron, g, rho_min = _fields(curve, basis, spec, n_s, n_t)
    w = g["w"] * measure_factor
    f = kron(0, 0)
    B = f.T @ (w[:, None] * f)
    B = 0.5 * (B + B.T)
    sw = np.sqrt(w)[:, None]
    comps = frame(kron, g, spec.h)
    G = np.vstack([sw * c for c in comps])
    A = G.T @ G
    A = 0.5 * (A + A.T) + spec.shift * B
    return ThinPencil(A, B, G, spec.shift, replace(spec, rho_min=rho_min), basis)


def _hessian_frame(kron, g, h):
    r = g["rho"][:, None]
    k = g["kap"][:, None]
    kp = g["dkap"][:, None]
    t = g["t"][:, None]
    fs, ft = kron(1, 0), kron(0, 1)
    hss = (kron(2, 0) + h * t * kp / r * fs - r * k * ft / h) / r**2
    hsn = math.sqrt(2.0) * (kron(1, 1) / h + k / r * fs) / r
    hnn = kron(0, 2) / h**2
    return hss, hsn, hnn


def _gradient_frame(kron, g, h):
    r = g["rho"][:, None]
    return kron(1, 0) / r, kron(0, 1) / h


def assemble_biharmonic(curve: CurveGeometry, spec: ThinFormSpec, basis: TensorBasis, n_s: Optional[int] = None,
                        n_t: Optional[int] = None, measure_factor: float = 1.0) -> ThinPencil:
    """Stiffness ``int D^2 f : D^2 g rho`` and mass ``int f g rho`` over the strip.

    Parameters
    ----------
    n_s, n_t : int, optional
        Quadrature sizes; default ``8N + 32`` trapezoid nodes in s and ``p + 8``
        Gauss points in t.
    measure_factor : float
        Constant multiplying the area element in both matrices.  The spectrum
        does not depend on it; it exists to check that invariance.
    """
    if spec.operator != "biharmonic":
        raise InvalidArgumentError("spec.operator must be 'biharmonic'")
    return _assemble(curve, spec, basis, n_s, n_t, measure_factor, _hessian_frame)


def assemble_laplacian(curve: CurveGeometry, spec: ThinFormSpec, basis: TensorBasis, n_s: Optional[int] = None,
                       n_t: Optional[int] = None, measure_factor: float = 1.0) -> ThinPencil:
    """Stiffness ``int (f_s g_s / rho^2 + f_t g_t / h^2) rho`` with the same mass."""
    if spec.operator != "laplacian":
        spec = replace(spec, operator="laplacian")
    return _assemble(curve, spec, basis, n_s, n_t, measure_factor, _gradient_frame)


def solve_thin2d(pencil: ThinPencil, n_modes: int, strict: bool = False) -> Spectrum:
    """Lowest ``n_modes`` strip eigenvalues.

    The free plate has a three-dimensional kernel (constants and the two
    coordinate functions) and the Neumann Laplacian a one-dimensional one.  A
    different count of eigenvalues below ``1e-6`` times the first nonzero one
    triggers a ``KernelCountWarning``, or a ``ThinPlateError`` with ``strict``.
    """
    spec = sym_gen_eig(pencil, n_modes, spd_mass=True)
    op = pencil.spec.operator if pencil.spec is not None else "biharmonic"
    expected = 3 if op == "biharmonic" else 1
    lam = spec.eigenvalues - pencil.shift
    if lam.size > expected:
        ref = lam[expected]
        found = int(np.count_nonzero(lam <= ZERO_MODE_RTOL * ref))
        spec.info["zero_modes"] = found
        if found != expected:
            msg = f"{found} near-zero eigenvalues, expected {expected} for the {op} operator"
            if strict:
                err = ThinPlateError(msg)
                err.kind, err.module = "kernel-count", "thin2d"
                raise err
            warnings.warn(msg, KernelCountWarning, stacklevel=2)
    spec.info.update(operator=op, h=pencil.spec.h if pencil.spec else None)
    return spec


def thread_count(default: int = 0) -> int:
    """Worker count from ``THINPLATE_THREADS`` (0 or unset means one per CPU)."""
    raw = os.environ.get("THINPLATE_THREADS", str(default))
    try:
        n = int(raw)
    except ValueError:
        raise InvalidArgumentError(f"THINPLATE_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise InvalidArgumentError("THINPLATE_THREADS must be >= 0")
    return n or (os.cpu_count() or 1)


@dataclass(frozen=True)
class ConvergenceRow:
    h: float
    j: int
    mu_h: float
    eta_limit: float
    abs_err: float
    rate: float


@dataclass
class ConvergenceTable:
    """Eigenvalues ``mu_j(h)`` against their limits ``eta_j`` with extrapolations."""

    curve: str
    N: int
    p: int
    h_list: list
    eta: list
    rows: list = field(default_factory=list)
    extrapolated: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)

    def column(self, j: int) -> tuple[list, list]:
        pts = [(r.h, r.mu_h) for r in self.rows if r.j == j and math.isfinite(r.mu_h)]
        return [p[0] for p in pts], [p[1] for p in pts]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["h", "j", "mu_h", "eta_limit", "abs_err", "rate"])
        for r in self.rows:
            w.writerow([_g(r.h), r.j, _g(r.mu_h), _g(r.eta_limit), _g(r.abs_err), _g(r.rate)])
        return buf.getvalue()

    def to_json(self) -> dict:
        return {
            "curve": self.curve,
            "N": self.N,
            "p": self.p,
            "h": [float(h) for h in self.h_list],
            "eta": [float(e) for e in self.eta],
            "rows": [
                {"h": r.h, "j": r.j, "mu_h": _num(r.mu_h), "eta_limit": r.eta_limit, "abs_err": _num(r.abs_err),
                 "rate": _num(r.rate)}
                for r in self.rows
            ],
            "extrapolated": {str(j): _num(v) for j, v in sorted(self.extrapolated.items())},
            "failures": {_g(h): msg for h, msg in sorted(self.failures.items())},
        }

    def to_svg(self, width: int = 640, height: int = 420, j_min: int = 4) -> str:
        return _svg_plot(self, width, height, j_min)


def _g(x: float) -> str:
    return f"{x:.17g}"


def _num(x: float):
    return float(x) if math.isfinite(x) else None


def convergence_study(curve: CurveGeometry, h_list: Sequence[float], N: int = 8, p: int = 8, n_modes: int = 8,
                      limit_N: int = 48, workers: Optional[int] = None) -> ConvergenceTable:
    """Strip eigenvalues for each width in ``h_list`` next to the limiting values.

    Widths are solved concurrently (``workers`` threads, default from
    ``THINPLATE_THREADS``).  A width whose solve fails contributes NaN rows
    and an entry in ``failures``; the others are unaffected.  For each j the
    rate column at a given h uses that h and the two preceding widths, and the
    extrapolated limit is the interpolating polynomial in h evaluated at 0.
    """
    h_list = [float(h) for h in h_list]
    if not h_list or any(b >= a for a, b in zip(h_list, h_list[1:])):
        raise InvalidArgumentError("h_list must be non-empty and strictly descending")
    eta = solve_limit_eigs(assemble_limit_system(curve, limit_N), n_modes).eigenvalues
    basis = TensorBasis(curve, N, p)

    def one(h):
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", KernelCountWarning)
                pencil = assemble_biharmonic(curve, ThinFormSpec(h), basis)
                return solve_thin2d(pencil, n_modes).eigenvalues, None
        except ThinPlateError as exc:
            return None, f"{exc.module}/{exc.kind}: {exc}"

    n_workers = workers if workers is not None else thread_count()
    with ThreadPoolExecutor(max_workers=max(1, min(n_workers, len(h_list)))) as pool:
        results = list(pool.map(one, h_list))

    table = ConvergenceTable(curve.name, N, p, h_list, [float(e) for e in eta])
    mus = np.full((len(h_list), n_modes), np.nan)
    for i, (vals, err) in enumerate(results):
        if err is not None:
            table.failures[h_list[i]] = err
        else:
            mus[i] = vals
    for i, h in enumerate(h_list):
        for j in range(n_modes):
            mu = float(mus[i, j])
            ok = np.isfinite(mus[: i + 1, j])
            hs = [h_list[k] for k in range(i + 1) if ok[k]]
            vs = [float(mus[k, j]) for k in range(i + 1) if ok[k]]
            rate = empirical_rate(hs, vs) if math.isfinite(mu) else float("nan")
            table.rows.append(ConvergenceRow(h, j + 1, mu, float(eta[j]), abs(mu - eta[j]), rate))
    for j in range(n_modes):
        hs, vs = table.column(j + 1)
        table.extrapolated[j + 1] = richardson_limit(hs, vs) if hs else float("nan")
    return table


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")


def _svg_plot(table: ConvergenceTable, width: int, height: int, j_min: int) -> str:
    js = sorted({r.j for r in table.rows if r.j >= j_min})
    series = [(j, *table.column(j)) for j in js]
    ys = [v for _, _, vs in series for v in vs] + [table.eta[j - 1] for j in js]
    xs = [h for _, hs, _ in series for h in hs] + [0.0]
    if not ys:
        ys = [0.0, 1.0]
    y0, y1 = min(ys), max(ys)
    pad = 0.08 * (y1 - y0 or 1.0)
    y0, y1 = y0 - pad, y1 + pad
    x0, x1 = 0.0, max(xs) * 1.05 or 1.0
    ml, mr, mt, mb = 60, 20, 20, 45

    def X(v):
        return ml + (v - x0) / (x1 - x0) * (width - ml - mr)

    def Y(v):
        return height - mb - (v - y0) / (y1 - y0) * (height - mt - mb)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f"<title>mu_j(h) on {_esc(table.curve)}</title>",
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{ml}" y1="{height - mb}" x2="{width - mr}" y2="{height - mb}" stroke="black"/>',
        f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{height - mb}" stroke="black"/>',
        f'<text x="{(width + ml) / 2:.1f}" y="{height - 10}" text-anchor="middle" font-size="13">h</text>',
        f'<text x="15" y="{(height - mb + mt) / 2:.1f}" text-anchor="middle" font-size="13" '
        f'transform="rotate(-90 15 {(height - mb + mt) / 2:.1f})">mu</text>',
    ]
    for k in range(5):
        xv = x0 + k * (x1 - x0) / 4
        yv = y0 + k * (y1 - y0) / 4
        out.append(f'<text x="{X(xv):.1f}" y="{height - mb + 16}" text-anchor="middle" font-size="11">{xv:.3g}</text>')
        out.append(f'<text x="{ml - 6}" y="{Y(yv) + 4:.1f}" text-anchor="end" font-size="11">{yv:.4g}</text>')
    for idx, (j, hs, vs) in enumerate(series):
        color = _PALETTE[idx % len(_PALETTE)]
        eta = table.eta[j - 1]
        out.append(f'<line x1="{X(x0):.2f}" y1="{Y(eta):.2f}" x2="{X(x1):.2f}" y2="{Y(eta):.2f}" '
                   f'stroke="{color}" stroke-dasharray="2,4"/>')
        if hs:
            pts = " ".join(f"{X(h):.2f},{Y(v):.2f}" for h, v in sorted(zip(hs, vs)))
            out.append(f'<polyline points="{pts}" fill="none" stroke="{color}"/>')
            for h, v in zip(hs, vs):
                out.append(f'<circle cx="{X(h):.2f}" cy="{Y(v):.2f}" r="3" fill="{color}"/>')
        out.append(f'<text x="{width - mr - 4}" y="{Y(eta) - 4:.2f}" text-anchor="end" font-size="11" '
                   f'fill="{color}">j={j}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def table_to_json_text(table: ConvergenceTable) -> str:
    return json.dumps(table.to_json(), indent=2, sort_keys=True) + "\n"
