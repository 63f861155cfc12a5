"""Limiting eigenvalue system on the boundary curve.

Unknowns are the tangential profile ``u(s)`` and the rescaled normal slope
``w(s)``.  The symmetric bilinear form

    int u''p'' + 2 k^2 u'p' + (k w)'p' + 2 k w'p' + 2 w'q' + u'(k q)' + 2 k u'q' + k^2 w q

(with test functions p, q) is discretised in a real Fourier basis; the
eigenvalue only multiplies ``int u p``.  With a width profile ``g`` the weight
``g`` multiplies every term, entering inside the derivatives as ``(k g w)'``
and ``(k g q)'``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sla
from numpy.typing import ArrayLike, NDArray

from .curve import CurveGeometry, WidthProfile
from .errors import FlatCurvatureError, InvalidArgumentError, NoEmbeddingError
from .numerics import DEFAULT_CLUSTER_TOL, Spectrum, SymmetricPencil, sym_gen_eig

__all__ = [
    "FourierBasis",
    "BlockPencil",
    "LimitSpectrum",
    "assemble_limit_system",
    "solve_limit_eigs",
    "circle_closed_form",
    "kernel_residuals",
    "restricted_bilap_apply",
    "spectrum_to_csv",
    "spectrum_to_json",
]


@dataclass(frozen=True)
class FourierBasis:
    """Orthonormal real Fourier basis on ``[0, L)``.

    Ordering is ``1, cos(w s), sin(w s), cos(2 w s), ...`` with ``w = 2 pi / L``;
    ``dim = 2N + 1``.
    """

    N: int
    length: float

    @property
    def dim(self) -> int:
        return 2 * self.N + 1

    @property
    def wavenumbers(self) -> NDArray[np.float64]:
        k = np.repeat(np.arange(1, self.N + 1), 2)
        return np.concatenate([[0.0], k * (2.0 * math.pi / self.length)])

    def index(self, k: int, kind: str = "cos") -> int:
        if k == 0:
            return 0
        return 2 * k - 1 if kind == "cos" else 2 * k

    def evaluate(self, s: ArrayLike, order: int = 0) -> NDArray[np.float64]:
        """Matrix of d^order/ds^order of every basis function at ``s``, shape (n, dim)."""
        s = np.asarray(s, dtype=float)
        L = self.length
        out = np.empty((s.size, self.dim))
        out[:, 0] = (1.0 / math.sqrt(L)) if order == 0 else 0.0
        if self.N:
            k = np.arange(1, self.N + 1) * (2.0 * math.pi / L)
            arg = np.multiply.outer(s.ravel(), k)
            c, sn = np.cos(arg), np.sin(arg)
            amp = math.sqrt(2.0 / L) * k**order
            # derivative cycle: cos -> -sin -> -cos -> sin
            cyc = order % 4
            dc = (c, -sn, -c, sn)[cyc]
            ds = (sn, c, -sn, -c)[cyc]
            out[:, 1::2] = dc * amp
            out[:, 2::2] = ds * amp
        return out

    def project(self, values: ArrayLike, n: Optional[int] = None) -> NDArray[np.float64]:
        """L2 projection of a periodic function sampled at ``n`` equispaced nodes."""
        values = np.asarray(values, dtype=float)
        n = values.shape[0] if n is None else n
        s = np.arange(n) * (self.length / n)
        return self.evaluate(s).T @ values * (self.length / n)


@dataclass(eq=False)
class BlockPencil:
    """Stiffness ``K`` over coefficients ``(u, w)`` and the mass acting on u only."""

    K: NDArray[np.float64]
    M_u: NDArray[np.float64]
    basis: FourierBasis
    curve_name: str
    width_name: Optional[str] = None
    asymmetry: float = 0.0
    n_quad: int = 0

    @property
    def dim(self) -> int:
        return self.basis.dim

    def blocks(self):
        d = self.dim
        K = self.K
        return K[:d, :d], K[:d, d:], K[d:, :d], K[d:, d:]

    @property
    def full_mass(self) -> NDArray[np.float64]:
        d = self.dim
        B = np.zeros((2 * d, 2 * d))
        B[:d, :d] = self.M_u
        return B


@dataclass
class LimitSpectrum(Spectrum):
    """Spectrum of the limiting system; ``vectors`` hold u-coefficients."""

    w_vectors: NDArray[np.float64] = field(default_factory=lambda: np.zeros((0, 0)))
    method: str = "schur"


def _quad_nodes(N: int) -> int:
    return max(512, 8 * N + 32)


def assemble_limit_system(curve: CurveGeometry, N: int, g: Optional[WidthProfile] = None,
                          n_quad: Optional[int] = None) -> BlockPencil:
    """Galerkin matrices of the limiting system on ``2N + 1`` Fourier modes per unknown."""
    if int(N) != N or N < 4:
        raise InvalidArgumentError(f"Fourier order N must be an integer >= 4, got {N!r}")
    N = int(N)
    basis = FourierBasis(N, curve.length)
    nq = n_quad or _quad_nodes(N)
    s = curve.nodes(nq)
    wq = curve.length / nq
    kap = curve.curvature(s)
    if np.max(np.abs(kap)) < 1e-12:
        raise FlatCurvatureError("curvature vanishes identically; the limiting system is degenerate")
    dkap = curve.curvature_derivative(s)
    if g is None:
        gv, dg = np.ones(nq), np.zeros(nq)
    else:
        gv, dg = g.value(s, curve.length), g.derivative(s, curve.length)
    kg = kap * gv
    dkg = dkap * gv + kap * dg

    P0 = basis.evaluate(s, 0)
    P1 = basis.evaluate(s, 1)
    P2 = basis.evaluate(s, 2)

    def gram(X, weight, Y):
        return X.T @ ((wq * weight)[:, None] * Y)

    Kuu = gram(P2, gv, P2) + gram(P1, 2 * gv * kap**2, P1)
    # rows: test function of the u-equation, columns: w; (k g w)' p' + 2 k g w' p'
    Kuw = gram(P1, dkg, P0) + gram(P1, 3 * kg, P1)
    # rows: test function of the w-equation, columns: u; u'(k g q)' + 2 k g u' q'
    Kwu = gram(P0, dkg, P1) + gram(P1, 3 * kg, P1)
    Kww = gram(P1, 2 * gv, P1) + gram(P0, kap**2 * gv, P0)
    K = np.block([[Kuu, Kuw], [Kwu, Kww]])
    asym = float(np.max(np.abs(K - K.T)))
    K = 0.5 * (K + K.T)
    M = gram(P0, gv, P0)
    M = 0.5 * (M + M.T)
    return BlockPencil(K, M, basis, curve.name, g.name if g is not None else None, asym, nq)


def solve_limit_eigs(pencil: BlockPencil, n_modes: int, method: str = "schur", shift: float = 0.0,
                     cluster_tol: float = DEFAULT_CLUSTER_TOL) -> LimitSpectrum:
    """Lowest eigenvalues of the limiting system.

    ``schur`` eliminates w through the (SPD) w-block and solves a definite
    pencil for u; ``block`` hands the full pencil with its singular mass to the
    semidefinite solver.  ``shift`` adds ``shift * M_u`` to the stiffness and is
    subtracted again from the reported eigenvalues.
    """
    d = pencil.dim
    Kuu, Kuw, Kwu, Kww = pencil.blocks()
    if method == "schur":
        try:
            cf = sla.cho_factor(Kww)
        except np.linalg.LinAlgError:
            raise FlatCurvatureError("w-block is not positive definite") from None
        S = Kuu - Kuw @ sla.cho_solve(cf, Kwu)
        S = 0.5 * (S + S.T) + shift * pencil.M_u
        spec = sym_gen_eig(SymmetricPencil(S, pencil.M_u), n_modes, spd_mass=True, cluster_tol=cluster_tol)
        U = spec.vectors
        W = -sla.cho_solve(cf, Kwu @ U)
    elif method == "block":
        B = pencil.full_mass
        spec = sym_gen_eig(SymmetricPencil(pencil.K + shift * B, B), n_modes, spd_mass=False,
                           cluster_tol=cluster_tol)
        U, W = spec.vectors[:d], spec.vectors[d:]
    else:
        raise InvalidArgumentError(f"unknown method {method!r} (expected 'schur' or 'block')")
    lam = spec.eigenvalues - shift
    return LimitSpectrum(lam, U, cluster_tol, dict(spec.info, shift=shift), W, method)


def circle_closed_form(ell: int) -> tuple[float, float]:
    """Limiting eigenvalue and ``w/u`` ratio of the unit circle for mode ``ell``."""
    if int(ell) != ell or ell < 0:
        raise InvalidArgumentError(f"mode index must be a non-negative integer, got {ell!r}")
    l2 = float(ell) ** 2
    return 2.0 * l2 * (l2 - 1.0) ** 2 / (1.0 + 2.0 * l2), -3.0 * l2 / (1.0 + 2.0 * l2)


def kernel_residuals(curve: CurveGeometry, pencil: BlockPencil) -> tuple[float, float, float]:
    """``|K z| / |z|`` for z the projections of (1, 0), (x1, -nu1), (x2, -nu2)."""
    if not curve.has_embedding:
        raise NoEmbeddingError(f"{curve.name} has no embedding; kernel functions x_i are undefined")
    basis = pencil.basis
    n = max(4096, 16 * basis.N)
    s = curve.nodes(n)
    x = curve.position(s)
    nu = curve.normal(s)
    fields = [(np.ones(n), np.zeros(n)), (x[0], -nu[0]), (x[1], -nu[1])]
    out = []
    for u, w in fields:
        z = np.concatenate([basis.project(u), basis.project(w)])
        out.append(float(np.linalg.norm(pencil.K @ z) / np.linalg.norm(z)))
    return tuple(out)


def restricted_bilap_apply(curve: CurveGeometry, u_coeffs: ArrayLike) -> NDArray[np.float64]:
    """Fourier coefficients of ``u'''' + 4 k^2 u'' + 5 k k' u'`` for the given u.

    This is the bilaplacian of the normal-constant extension restricted to the
    curve; it is not the limiting operator and is provided for comparison only.
    """
    u_coeffs = np.asarray(u_coeffs, dtype=float)
    if u_coeffs.ndim != 1 or u_coeffs.size % 2 != 1 or u_coeffs.size < 1:
        raise InvalidArgumentError("coefficient vector must have odd length 2N + 1")
    basis = FourierBasis((u_coeffs.size - 1) // 2, curve.length)
    nq = _quad_nodes(basis.N)
    s = curve.nodes(nq)
    kap = curve.curvature(s)
    dkap = curve.curvature_derivative(s)
    u1 = basis.evaluate(s, 1) @ u_coeffs
    u2 = basis.evaluate(s, 2) @ u_coeffs
    u4 = basis.evaluate(s, 4) @ u_coeffs
    return basis.project(u4 + 4 * kap**2 * u2 + 5 * kap * dkap * u1)


def spectrum_to_csv(spec: Spectrum) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["j", "eta", "multiplicity_cluster"])
    for j, (lam, m) in enumerate(zip(spec.eigenvalues, spec.multiplicities()), start=1):
        w.writerow([j, f"{lam:.17g}", m])
    return buf.getvalue()


def spectrum_to_json(spec: LimitSpectrum, pencil: BlockPencil) -> dict:
    return {
        "curve": pencil.curve_name,
        "width": pencil.width_name,
        "N": pencil.basis.N,
        "length": pencil.basis.length,
        "basis": "orthonormal Fourier: 1, cos(2 pi k s/L), sin(2 pi k s/L), k=1..N",
        "method": spec.method,
        "eigenvalues": [float(x) for x in spec.eigenvalues],
        "multiplicity": spec.multiplicities(),
        "u_vectors": spec.vectors.T.tolist(),
        "w_vectors": spec.w_vectors.T.tolist(),
    }
