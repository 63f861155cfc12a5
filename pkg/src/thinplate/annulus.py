"""Free-plate eigenvalues of the annulus ``1 - h < r < 1`` via Bessel dispersion determinants.

For angular mode ``l`` the radial part is a combination of ``Z_l(mu^(1/4) r)``
with ``Z`` in (J, I, Y, K).  The four free-edge conditions at ``r = 1`` and
``r = 1 - h`` give a 4x4 matrix whose determinant vanishes exactly at the
eigenvalues ``mu``.  Rows are built from the radial problem itself, with all
chain-rule factors ``mu^(k/4)``; columns are ordered (J, I, Y, K).
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
from numpy.typing import NDArray

from .bessel import bessel_quad
from .errors import BranchLostError, InvalidArgumentError, NoBracketError, PrecisionLossWarning
from .numerics import brent_root

__all__ = [
    "EigencurvePoint",
    "boundary_matrix",
    "dispersion_det",
    "find_eigencurve",
    "leading_order_check",
    "limit_eigenvalue",
    "scan_roots",
    "annulus_spectrum",
    "eigencurves_to_csv",
]

SCAN_FACTOR = 1.15
SCAN_RANGE = (1e-4, 500.0)
ROOT_RTOL = 1e-10


@dataclass(frozen=True)
class EigencurvePoint:
    ell: int
    h: float
    mu: float
    det_residual: float


def limit_eigenvalue(ell: int) -> float:
    """h -> 0 limit of the mode-``ell`` branch, ``2 l^2 (l^2 - 1)^2 / (1 + 2 l^2)``."""
    l2 = ell * ell
    return 2.0 * l2 * (l2 - 1) ** 2 / (1 + 2 * l2)


def _check(ell, h, mu):
    if int(ell) != ell or ell < 0:
        raise InvalidArgumentError(f"mode index must be a non-negative integer, got {ell!r}")
    if not 0 < h < 1:
        raise InvalidArgumentError(f"annulus width must lie in (0, 1), got {h!r}")
    if not mu > 0:
        raise InvalidArgumentError(f"mu must be positive, got {mu!r}")
    return int(ell), float(h), float(mu)


def _edge_rows(ell: int, k: float, r: float) -> tuple[NDArray, NDArray]:
    """Rows ``v''(r)`` and ``v''' + v''/r - (1+2l^2) v'/r^2 + 3 l^2 v / r^3`` for v = Z(k r)."""
    q = bessel_quad(ell, k * r)
    l2 = ell * ell
    second = np.empty(4)
    moment = np.empty(4)
    for j, (z0, z1, z2, z3) in enumerate(q.columns()):
        v1, v2, v3 = k * z1, k * k * z2, k**3 * z3
        second[j] = v2
        moment[j] = v3 + v2 / r - (1 + 2 * l2) * v1 / r**2 + 3 * l2 * z0 / r**3
    return second, moment


def boundary_matrix(ell: int, h: float, mu: float) -> NDArray[np.float64]:
    """Rows: v''(1), v''(1-h), edge condition at 1, edge condition at 1-h."""
    ell, h, mu = _check(ell, h, mu)
    k = mu**0.25
    s_out, m_out = _edge_rows(ell, k, 1.0)
    s_in, m_in = _edge_rows(ell, k, 1.0 - h)
    return np.array([s_out, s_in, m_out, m_in])


def _det(M: NDArray) -> float:
    """Determinant by Gaussian elimination with partial pivoting."""
    A = np.array(M, dtype=float)
    n = A.shape[0]
    det = 1.0
    for i in range(n):
        p = i + int(np.argmax(np.abs(A[i:, i])))
        if A[p, i] == 0.0:
            return 0.0
        if p != i:
            A[[i, p]] = A[[p, i]]
            det = -det
        det *= A[i, i]
        A[i + 1 :, i:] -= np.outer(A[i + 1 :, i] / A[i, i], A[i, i:])
    return float(det)


def dispersion_det(ell: int, h: float, mu: float, scaled: bool = True) -> float:
    """``det B_l(h, mu)``; with ``scaled`` every column is first divided by its
    largest-magnitude entry (positive factors, so the zero set and sign agree)."""
    M = boundary_matrix(ell, h, mu)
    if scaled:
        M = M / np.max(np.abs(M), axis=0)
    return _det(M)


def scan_roots(ell: int, h: float, lo: float = SCAN_RANGE[0], hi: float = SCAN_RANGE[1],
               factor: float = SCAN_FACTOR, max_roots: Optional[int] = None) -> list[float]:
    """All sign changes of the scaled determinant on a geometric mu grid, polished."""
    grid = [lo]
    while grid[-1] < hi:
        grid.append(min(grid[-1] * factor, hi))
    vals = [dispersion_det(ell, h, m) for m in grid]
    roots = []
    for a, b, fa, fb in zip(grid, grid[1:], vals, vals[1:]):
        if fa == 0.0 or np.sign(fa) != np.sign(fb):
            roots.append(_polish(ell, h, a, b))
            if max_roots and len(roots) >= max_roots:
                break
    return roots


def _polish(ell, h, a, b):
    return brent_root(lambda m: dispersion_det(ell, h, m), a, b, tol=ROOT_RTOL * a)


def _bracket_near(ell, h, mu0, max_expand: float = 4.0, step: float = 0.02):
    """Smallest bracket around ``mu0`` found by widening alternately below and above."""
    f0 = dispersion_det(ell, h, mu0)
    if f0 == 0.0:
        return mu0, mu0
    lo = hi = mu0
    flo = fhi = f0
    frac = step
    while frac < max_expand:
        nlo = mu0 / (1 + frac)
        fnlo = dispersion_det(ell, h, nlo)
        if np.sign(fnlo) != np.sign(flo):
            return nlo, lo
        lo, flo = nlo, fnlo
        nhi = mu0 * (1 + frac)
        fnhi = dispersion_det(ell, h, nhi)
        if np.sign(fnhi) != np.sign(fhi):
            return hi, nhi
        hi, fhi = nhi, fnhi
        frac *= 1.5
    raise NoBracketError(f"no root of det B_{ell}(h={h}) found near mu={mu0}")


def find_eigencurve(ell: int, h_grid: Sequence[float], mu_hint: float) -> list[EigencurvePoint]:
    """Track the branch ``mu_l(h)`` through a descending ``h_grid`` by continuation.

    At the first width the root nearest ``mu_hint`` is bracketed; each later
    width starts from the previous root.  For ``ell <= 1`` a hint of 0 selects
    the rigid-motion branch ``mu = 0``, which is an eigenvalue for every h.
    """
    h_grid = [float(h) for h in h_grid]
    if any(b >= a for a, b in zip(h_grid, h_grid[1:])):
        raise InvalidArgumentError("h_grid must be strictly descending")
    if mu_hint <= 0:
        if ell <= 1 and mu_hint == 0:
            return [EigencurvePoint(int(ell), h, 0.0, 0.0) for h in h_grid]
        raise InvalidArgumentError("mu_hint must be positive (0 is allowed only for l <= 1)")
    points: list[EigencurvePoint] = []
    mu = float(mu_hint)
    for h in h_grid:
        try:
            a, b = _bracket_near(ell, h, mu)
            mu = a if a == b else brent_root(lambda m: dispersion_det(ell, h, m), a, b, tol=ROOT_RTOL * a)
        except NoBracketError as exc:
            last = points[-1] if points else None
            raise BranchLostError(f"branch l={ell} lost at h={h}: {exc}", last, points) from None
        points.append(EigencurvePoint(int(ell), h, mu, dispersion_det(ell, h, mu)))
    return points


def lowest_branch_hint(ell: int, h: float) -> float:
    """First positive root of the scaled determinant at width ``h`` (scan upward)."""
    lo, hi = SCAN_RANGE
    while hi <= 1e7:
        roots = scan_roots(ell, h, lo, hi, max_roots=1)
        if roots:
            return roots[0]
        lo, hi = hi, hi * 20
    raise NoBracketError(f"no eigenvalue found for l={ell}, h={h} below 1e7")


def leading_order_check(ell: int, mu: float, h_list: Iterable[float]) -> NDArray[np.float64]:
    """``det * pi / (8 mu h^2)`` for each h (unscaled determinant).

    For small h this approaches ``mu (1 + 2 l^2) - 2 l^2 (l^2 - 1)^2``.
    """
    out = []
    for h in h_list:
        M = boundary_matrix(ell, h, mu)
        d = _det(M)
        scale = float(np.prod(np.max(np.abs(M), axis=0)))
        if abs(d) < 1e3 * np.finfo(float).eps * scale:
            warnings.warn(
                f"determinant at l={ell}, mu={mu}, h={h} is at round-off level", PrecisionLossWarning, stacklevel=2
            )
        out.append(d * math.pi / (8.0 * mu * h * h))
    return np.array(out)


def annulus_spectrum(h: float, mu_max: float, ell_max: int = 12) -> list[tuple[float, int, int]]:
    """Eigenvalues of the annulus below ``mu_max`` as ``(mu, multiplicity, ell)``, ascending.

    Positive roots have multiplicity 1 for ``l = 0`` and 2 otherwise; the rigid
    motions contribute ``mu = 0`` once for l = 0 and twice for l = 1.
    """
    entries = [(0.0, 1, 0), (0.0, 2, 1)]
    for ell in range(ell_max + 1):
        roots = scan_roots(ell, h, SCAN_RANGE[0], mu_max)
        entries.extend((r, 1 if ell == 0 else 2, ell) for r in roots)
    entries.sort(key=lambda e: (e[0], e[2]))
    return entries


def eigencurves_to_csv(points: Iterable[EigencurvePoint]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["ell", "h", "mu", "det_residual"])
    for p in points:
        w.writerow([p.ell, f"{p.h:.17g}", f"{p.mu:.17g}", f"{p.det_residual:.17g}"])
    return buf.getvalue()
