"""Integer-order Bessel functions J, Y, I, K and their first three derivatives.

Values come from the ascending power series (with harmonic-number terms for
Y and K), summed in ``decimal`` arithmetic whose working precision grows with
the argument so the cancellation between large alternating terms is absorbed.
Derivatives follow from the order recurrences and the defining ODEs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import Decimal, localcontext
from functools import lru_cache

import numpy as np

from .errors import BesselRangeError, InvalidArgumentError

__all__ = ["BesselQuad", "bessel_quad", "bessel_values", "MAX_ORDER", "MAX_ARG"]

MAX_ORDER = 25
MAX_ARG = 50.0

_PI = "3.14159265358979323846264338327950288419716939937510582097494459230781640628620899862803482534211706798"
_EULER = "0.57721566490153286060651209008240243104215933593992359880576723488486772677766467093694706329174674952"


@dataclass(frozen=True)
class BesselQuad:
    """``J, Y, I, K`` at ``x``, each as (value, d/dx, d2/dx2, d3/dx3)."""

    order: int
    x: float
    J: tuple
    Y: tuple
    I: tuple
    K: tuple

    def columns(self) -> tuple:
        """Families in the column order used by the annulus boundary matrix."""
        return self.J, self.I, self.Y, self.K


def _precision(x: float) -> int:
    # digits lost to cancellation grow like 2x / ln(10) (worst case: K from I-sized terms)
    return 34 + int(math.ceil(2.0 * x / math.log(10.0)))


def _series(n: int, x: Decimal, eps: Decimal):
    """Sums over k of a_k=(x/2)^(2k+n)/(k!(n+k)!) with weights 1, (-1)^k, psi, (-1)^k psi.

    psi_k = psi(k+1) + psi(n+k+1) without the -2*gamma part (added by caller).
    """
    half = x / 2
    q = half * half
    a = half**n / math.factorial(n)
    hk = Decimal(0)
    hnk = sum((Decimal(1) / j for j in range(1, n + 1)), Decimal(0))
    s_plain = s_alt = s_psi = s_psi_alt = Decimal(0)
    big = Decimal(0)
    k = 0
    while True:
        psi = hk + hnk
        term_psi = a * psi
        sign = -1 if k % 2 else 1
        s_plain += a
        s_alt += a if sign > 0 else -a
        s_psi += term_psi
        s_psi_alt += term_psi if sign > 0 else -term_psi
        mag = abs(a) * (1 + abs(psi))
        if mag > big:
            big = mag
        k += 1
        if k > 8 and mag <= eps * big:
            break
        a = a * q / (k * (n + k))
        hk += Decimal(1) / k
        hnk += Decimal(1) / (n + k)
    return s_plain, s_alt, s_psi, s_psi_alt


def _finite_sums(n: int, x: Decimal):
    """sum_{k<n} (n-k-1)!/k! (x/2)^(2k-n), plain and with (-1)^k."""
    if n == 0:
        return Decimal(0), Decimal(0)
    half = x / 2
    plain = alt = Decimal(0)
    for k in range(n):
        t = Decimal(math.factorial(n - k - 1)) / math.factorial(k) * half ** (2 * k - n)
        plain += t
        alt += t if k % 2 == 0 else -t
    return plain, alt


@lru_cache(maxsize=4096)
def _values_decimal(n: int, xs: str):
    """(J_n, Y_n, I_n, K_n) at x as Decimals, computed at raised precision."""
    with localcontext() as ctx:
        x = Decimal(xs)
        ctx.prec = _precision(float(x))
        eps = Decimal(10) ** (-(ctx.prec - 2))
        pi = Decimal(_PI)
        gamma = Decimal(_EULER)
        log_half = (x / 2).ln()
        s_plain, s_alt, s_psi, s_psi_alt = _series(n, x, eps)
        f_plain, f_alt = _finite_sums(n, x)
        # psi(k+1) + psi(n+k+1) = H_k + H_{n+k} - 2 gamma
        psi_alt = s_psi_alt - 2 * gamma * s_alt
        psi_plain = s_psi - 2 * gamma * s_plain
        J = s_alt
        Inu = s_plain
        Y = (2 * log_half * J - f_plain - psi_alt) / pi
        sgn = -1 if n % 2 else 1
        K = -sgn * log_half * Inu + f_alt / 2 + sgn * psi_plain / 2
        return J, Y, Inu, K


def _validate(order, x):
    if int(order) != order or order < 0:
        raise InvalidArgumentError(f"order must be a non-negative integer, got {order!r}")
    x = float(x)
    if not math.isfinite(x) or x <= 0:
        raise InvalidArgumentError(f"argument must be positive, got {x!r}")
    if order > MAX_ORDER or x > MAX_ARG:
        raise BesselRangeError(f"(order={order}, x={x}) outside supported range order<={MAX_ORDER}, x<={MAX_ARG}")
    return int(order), x


def bessel_values(order: int, x: float) -> tuple[float, float, float, float]:
    """``(J, Y, I, K)`` of integer order at ``x`` as floats."""
    n, x = _validate(order, x)
    vals = _values_decimal(n, repr(x))
    return tuple(_to_float(v, n, x) for v in vals)


def _to_float(v: Decimal, n, x) -> float:
    out = float(v)
    if not math.isfinite(out):
        raise BesselRangeError(f"Bessel value overflows double precision at order={n}, x={x}")
    return out


def _derivs(z0, z1, n, x, sigma):
    """Second and third derivatives from x^2 Z'' + x Z' + (sigma x^2 - n^2) Z = 0."""
    c = sigma - Decimal(n * n) / (x * x)
    z2 = -z1 / x - c * z0
    z3 = -z2 / x + z1 / (x * x) - c * z1 - 2 * Decimal(n * n) / (x**3) * z0
    return z2, z3


def bessel_quad(order: int, x: float) -> BesselQuad:
    """Values and first three derivatives of J, Y, I, K at ``x``.

    First derivatives use the standard recurrences
    ``Z' = (n/x) Z - Z_{n+1}`` (J, Y, K) and ``I' = (n/x) I + I_{n+1}``.
    """
    n, xf = _validate(order, x)
    if n + 1 > MAX_ORDER + 1:
        raise BesselRangeError(f"order {n} too large")
    J0, Y0, I0, K0 = _values_decimal(n, repr(xf))
    J1, Y1, I1, K1 = _values_decimal(n + 1, repr(xf))
    with localcontext() as ctx:
        ctx.prec = _precision(xf)
        xd = Decimal(repr(xf))
        r = Decimal(n) / xd
        fams = {}
        for name, z, znext, sigma, sign_next in (
            ("J", J0, J1, 1, -1),
            ("Y", Y0, Y1, 1, -1),
            ("I", I0, I1, -1, 1),
            ("K", K0, K1, -1, -1),
        ):
            z1 = r * z + sign_next * znext
            z2, z3 = _derivs(z, z1, n, xd, sigma)
            fams[name] = tuple(_to_float(v, n, xf) for v in (z, z1, z2, z3))
    return BesselQuad(n, xf, fams["J"], fams["Y"], fams["I"], fams["K"])


def wronskian_residuals(q: BesselQuad) -> tuple[float, float]:
    """Relative defects of ``J Y' - J' Y = 2/(pi x)`` and ``I K' - I' K = -1/x``."""
    x = q.x
    wjy = q.J[0] * q.Y[1] - q.J[1] * q.Y[0]
    wik = q.I[0] * q.K[1] - q.I[1] * q.K[0]
    ref_jy = 2.0 / (np.pi * x)
    ref_ik = -1.0 / x
    return abs(wjy - ref_jy) / abs(ref_jy), abs(wik - ref_ik) / abs(ref_ik)
