"""Dense numerical kernels: quadrature, symmetric-definite pencils, scalar roots."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg as sla
from numpy.typing import NDArray

from .errors import InsufficientRankError, InvalidArgumentError, MassNotPSDError, NoBracketError

__all__ = [
    "QuadratureRule",
    "SymmetricPencil",
    "Spectrum",
    "gauss_legendre",
    "sym_gen_eig",
    "brent_root",
    "richardson_limit",
    "empirical_rate",
    "DEFAULT_CLUSTER_TOL",
]

DEFAULT_CLUSTER_TOL = 1e-6
_RANK_TOL = 1e-12


@dataclass(frozen=True)
class QuadratureRule:
    """Quadrature on (0, 1) with positive weights summing to one."""

    nodes: NDArray[np.float64]
    weights: NDArray[np.float64]

    def integrate(self, f: Callable) -> float:
        return float(np.dot(self.weights, f(self.nodes)))


def gauss_legendre(n: int) -> QuadratureRule:
    """n-point Gauss-Legendre rule mapped to (0, 1); exact to degree 2n-1."""
    if int(n) != n or n < 1:
        raise InvalidArgumentError(f"number of Gauss points must be a positive integer, got {n!r}")
    x, w = np.polynomial.legendre.leggauss(int(n))
    return QuadratureRule(0.5 * (x + 1.0), 0.5 * w)


@dataclass(frozen=True, eq=False)
class SymmetricPencil:
    """Pencil ``A x = lambda B x`` with symmetric A and PSD B.

    ``factor`` optionally holds G with ``A = G^T G + shift * B``; when present the
    eigenvalues are obtained from singular values of G, which keeps small
    eigenvalues accurate when A has entries many orders larger than them.
    """

    A: NDArray[np.float64]
    B: NDArray[np.float64]
    factor: Optional[NDArray[np.float64]] = None
    shift: float = 0.0

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def asymmetry(self) -> tuple[float, float]:
        return float(np.max(np.abs(self.A - self.A.T))), float(np.max(np.abs(self.B - self.B.T)))

    def is_symmetric(self, rtol: float = 1e-10) -> bool:
        da, db = self.asymmetry()
        return da <= rtol * (1 + np.max(np.abs(self.A))) and db <= rtol * (1 + np.max(np.abs(self.B)))

    def shifted(self, c: float) -> "SymmetricPencil":
        return SymmetricPencil(self.A + c * self.B, self.B, self.factor, self.shift + c)


@dataclass
class Spectrum:
    """Ascending eigenvalues with B-orthonormal coefficient columns."""

    eigenvalues: NDArray[np.float64]
    vectors: NDArray[np.float64]
    cluster_tol: float = DEFAULT_CLUSTER_TOL
    info: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.eigenvalues)

    def clusters(self) -> list[tuple[float, int, list[int]]]:
        """Group eigenvalues whose consecutive gap is below ``cluster_tol * (1 + |lambda|)``.

        Returns ``(mean value, multiplicity, indices)`` per cluster.
        """
        out: list[list[int]] = []
        lam = self.eigenvalues
        for i in range(len(lam)):
            if out and abs(lam[i] - lam[out[-1][-1]]) <= self.cluster_tol * (1 + abs(lam[i])):
                out[-1].append(i)
            else:
                out.append([i])
        return [(float(np.mean(lam[idx])), len(idx), idx) for idx in out]

    def multiplicities(self) -> list[int]:
        mult = [0] * len(self.eigenvalues)
        for _, m, idx in self.clusters():
            for i in idx:
                mult[i] = m
        return mult


def _check_modes(n_modes: int, available: int) -> int:
    if int(n_modes) != n_modes or n_modes < 1:
        raise InvalidArgumentError(f"n_modes must be a positive integer, got {n_modes!r}")
    if n_modes > available:
        raise InsufficientRankError(f"requested {n_modes} modes but the mass has rank {available}")
    return int(n_modes)


def _cholesky(B):
    try:
        return sla.cholesky(B, lower=False)
    except np.linalg.LinAlgError as exc:
        raise MassNotPSDError(f"mass matrix is not positive definite: {exc}") from None


def sym_gen_eig(pencil: SymmetricPencil, n_modes: int, spd_mass: bool = True,
                cluster_tol: float = DEFAULT_CLUSTER_TOL) -> Spectrum:
    """Smallest ``n_modes`` eigenpairs of a symmetric-definite (or semidefinite) pencil.

    With ``spd_mass`` the mass is Cholesky-factored and the problem reduced to
    standard symmetric form.  Otherwise B is split into its range and null space
    by a symmetric eigendecomposition (eigenvalues below 1e-12 * max are treated
    as zero); the null-space components are eliminated through a Schur complement
    of A and the reduced problem is solved on the range of B.
    """
    A = np.asarray(pencil.A, dtype=float)
    B = np.asarray(pencil.B, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n) or B.shape != (n, n):
        raise InvalidArgumentError("pencil matrices must be square and of equal size")

    if spd_mass:
        k = _check_modes(n_modes, n)
        R = _cholesky(B)
        if pencil.factor is not None:
            G = np.asarray(pencil.factor, dtype=float)
            C = sla.solve_triangular(R, G.T, trans="T", lower=False).T
            # full V only when G has fewer rows than columns (null space needed)
            _, sig, vt = np.linalg.svd(C, full_matrices=C.shape[0] < n)
            sig2 = np.zeros(n)
            sig2[: len(sig)] = sig**2
            order = np.argsort(sig2, kind="stable")[:k]
            lam = sig2[order] + pencil.shift
            Y = vt[order].T
        else:
            C = sla.solve_triangular(R, sla.solve_triangular(R, A, trans="T").T, trans="T")
            C = 0.5 * (C + C.T)
            lam, Y = sla.eigh(C, subset_by_index=[0, k - 1])
        X = sla.solve_triangular(R, Y)
        return Spectrum(lam, _fix_signs(X), cluster_tol, {"rank": n})

    wb, Q = np.linalg.eigh(0.5 * (B + B.T))
    scale = max(float(np.max(np.abs(wb))), np.finfo(float).tiny)
    if wb.min() < -_RANK_TOL * scale * 1e2:
        raise MassNotPSDError(f"mass matrix has a negative eigenvalue {wb.min():.3e}")
    rng = wb > _RANK_TOL * scale
    r = int(np.count_nonzero(rng))
    k = _check_modes(n_modes, r)
    Qr, Qn = Q[:, rng], Q[:, ~rng]
    dinv = 1.0 / np.sqrt(wb[rng])
    Arr = Qr.T @ A @ Qr
    if Qn.shape[1]:
        Arn = Qr.T @ A @ Qn
        Ann = Qn.T @ A @ Qn
        try:
            cf = sla.cho_factor(0.5 * (Ann + Ann.T))
        except np.linalg.LinAlgError:
            raise InsufficientRankError("stiffness is singular on the null space of the mass") from None
        Arr = Arr - Arn @ sla.cho_solve(cf, Arn.T)
    C = dinv[:, None] * Arr * dinv[None, :]
    lam, Y = sla.eigh(0.5 * (C + C.T), subset_by_index=[0, k - 1])
    Z = dinv[:, None] * Y
    X = Qr @ Z
    if Qn.shape[1]:
        X = X - Qn @ sla.cho_solve(cf, Arn.T @ Z)
    return Spectrum(lam, _fix_signs(X), cluster_tol, {"rank": r})


def _fix_signs(X):
    # deterministic sign: largest-magnitude entry of each column positive
    idx = np.argmax(np.abs(X), axis=0)
    sgn = np.sign(X[idx, np.arange(X.shape[1])])
    sgn[sgn == 0] = 1.0
    return X * sgn


def brent_root(f: Callable[[float], float], a: float, b: float, tol: float = 1e-12,
               maxiter: int = 200) -> float:
    """Root of ``f`` in ``[a, b]`` by Brent's method.

    Inverse quadratic interpolation and secant steps, falling back to bisection
    whenever they fail to shrink the bracket fast enough.  Terminates once the
    bracket is narrower than ``tol``.

    Raises
    ------
    NoBracketError
        If ``f(a)`` and ``f(b)`` have the same sign.
    """
    fa, fb = f(a), f(b)
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if np.sign(fa) == np.sign(fb):
        raise NoBracketError(f"no sign change on [{a}, {b}]: f(a)={fa:.3e}, f(b)={fb:.3e}")
    c, fc = a, fa
    d = e = b - a
    for _ in range(maxiter):
        if np.sign(fb) == np.sign(fc):
            c, fc = a, fa
            d = e = b - a
        if abs(fc) < abs(fb):
            a, b, c = b, c, b
            fa, fb, fc = fb, fc, fb
        tol1 = 2.0 * np.finfo(float).eps * abs(b) + 0.5 * tol
        m = 0.5 * (c - b)
        if abs(m) <= tol1 or fb == 0.0:
            return b
        if abs(e) >= tol1 and abs(fa) > abs(fb):
            s = fb / fa
            if a == c:
                p, q = 2.0 * m * s, 1.0 - s
            else:
                q, r = fa / fc, fb / fc
                p = s * (2.0 * m * q * (q - r) - (b - a) * (r - 1.0))
                q = (q - 1.0) * (r - 1.0) * (s - 1.0)
            if p > 0:
                q = -q
            p = abs(p)
            if 2.0 * p < min(3.0 * m * q - abs(tol1 * q), abs(e * q)):
                e, d = d, p / q
            else:
                d = e = m
        else:
            d = e = m
        a, fa = b, fb
        b += d if abs(d) > tol1 else math.copysign(tol1, m)
        fb = f(b)
    return b


def richardson_limit(h: Sequence[float], values: Sequence[float]) -> float:
    """Extrapolate ``values(h)`` to ``h = 0`` assuming ``v(h) = v0 + c1 h + c2 h^2 + ...``.

    Uses the interpolating polynomial in ``h`` through all points (Neville).
    """
    h = np.asarray(h, dtype=float)
    p = np.asarray(values, dtype=float).copy()
    if h.size != p.size or h.size == 0:
        raise InvalidArgumentError("need matching, non-empty h and value lists")
    n = h.size
    for m in range(1, n):
        for i in range(n - m):
            p[i] = (h[i + m] * p[i] - h[i] * p[i + 1]) / (h[i + m] - h[i])
    return float(p[0])


def empirical_rate(h: Sequence[float], values: Sequence[float]) -> float:
    """Observed order from the last three points, ``log(d1/d2) / log(h1/h2)``."""
    if len(h) < 3:
        return float("nan")
    h1, h2, h3 = (float(x) for x in h[-3:])
    v1, v2, v3 = (float(x) for x in values[-3:])
    d1, d2 = v1 - v2, v2 - v3
    if d1 == 0 or d2 == 0 or np.sign(d1) != np.sign(d2):
        return float("nan")
    return math.log(abs(d1 / d2)) / math.log(h1 / h2)
