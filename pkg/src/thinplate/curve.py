"""Smooth closed plane curves described by arc length and signed curvature.

Curvature is measured with respect to the outward unit normal, so convex
curves traversed counter-clockwise have positive curvature (the unit circle
has kappa = 1).  Arc length ``s`` runs over ``[0, L)`` and every curve quantity
is L-periodic in ``s``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.interpolate import PchipInterpolator

from .errors import InvalidArgumentError, NoEmbeddingError

__all__ = [
    "CurveGeometry",
    "WidthProfile",
    "make_circle",
    "make_ellipse",
    "make_parametric",
    "make_fourier_curvature",
    "gauss_bonnet_residual",
    "max_admissible_h",
    "curve_from_json",
    "width_from_json",
]

KINDS = ("circle", "ellipse", "fourier-curvature", "parametric")
_ARC_TABLE_SIZE = 4096
_KAPPA_FLOOR = 1e-12

VecFn = Callable[[NDArray[np.float64]], NDArray[np.float64]]


@dataclass(frozen=True, eq=False)
class CurveGeometry:
    """Immutable description of a closed curve through ``L`` and ``kappa(s)``.

    Attributes
    ----------
    length : float
        Arc length of the curve.
    kind : str
        One of ``circle``, ``ellipse``, ``fourier-curvature``, ``parametric``.
    params : dict
        Constructor parameters, used for JSON export and labels.
    """

    length: float
    kind: str
    params: dict
    _kappa: VecFn = field(repr=False)
    _dkappa: VecFn = field(repr=False)
    _embed: Optional[Callable[[NDArray[np.float64]], tuple]] = field(default=None, repr=False)

    @property
    def has_embedding(self) -> bool:
        return self._embed is not None

    @property
    def name(self) -> str:
        p = self.params
        if self.kind == "circle":
            return f"circle(R={p['radius']:g})"
        if self.kind == "ellipse":
            return f"ellipse(a={p['a']:g},b={p['b']:g})"
        if self.kind == "fourier-curvature":
            return f"fourier-curvature(L={self.length:g},ncos={len(p['cos'])},nsin={len(p['sin'])})"
        return p.get("name", "parametric")

    def _wrap(self, s: ArrayLike) -> NDArray[np.float64]:
        return np.mod(np.asarray(s, dtype=float), self.length)

    def curvature(self, s: ArrayLike) -> NDArray[np.float64]:
        return self._kappa(self._wrap(s))

    def curvature_derivative(self, s: ArrayLike) -> NDArray[np.float64]:
        """d kappa / d s."""
        return self._dkappa(self._wrap(s))

    def _embedding(self, s: ArrayLike) -> tuple:
        if self._embed is None:
            raise NoEmbeddingError(f"{self.name} carries no planar embedding")
        return self._embed(self._wrap(s))

    def position(self, s: ArrayLike) -> NDArray[np.float64]:
        """Points ``(x1(s), x2(s))`` as an array of shape ``(2, n)``."""
        return self._embedding(s)[0]

    def tangent(self, s: ArrayLike) -> NDArray[np.float64]:
        return self._embedding(s)[1]

    def normal(self, s: ArrayLike) -> NDArray[np.float64]:
        """Outward unit normal, shape ``(2, n)``."""
        return self._embedding(s)[2]

    def nodes(self, n: int) -> NDArray[np.float64]:
        """Equispaced periodic trapezoid nodes on ``[0, L)``."""
        return np.arange(n) * (self.length / n)

    def to_json(self) -> dict:
        if self.kind == "circle":
            return {"type": "circle", "radius": self.params["radius"]}
        if self.kind == "ellipse":
            return {"type": "ellipse", "a": self.params["a"], "b": self.params["b"]}
        if self.kind == "fourier-curvature":
            return {
                "type": "fourier-curvature",
                "length": self.length,
                "cos": list(self.params["cos"]),
                "sin": list(self.params["sin"]),
            }
        raise InvalidArgumentError("parametric curves have no JSON form")


def _positive(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value) or value <= 0:
        raise InvalidArgumentError(f"{name} must be a positive finite number, got {value!r}")
    return value


def make_circle(radius: float) -> CurveGeometry:
    r = _positive("radius", radius)

    def kappa(s):
        return np.full(np.shape(s), 1.0 / r)

    def dkappa(s):
        return np.zeros(np.shape(s))

    def embed(s):
        th = s / r
        c, sn = np.cos(th), np.sin(th)
        return np.array([r * c, r * sn]), np.array([-sn, c]), np.array([c, sn])

    return CurveGeometry(2.0 * math.pi * r, "circle", {"radius": r}, kappa, dkappa, embed)


class _ArcLength:
    """Arc length ``s(t)`` of a 2*pi-periodic parametrisation and its inverse.

    The speed is expanded in a Fourier series (spectrally accurate for smooth
    curves) and integrated term by term; the inverse is tabulated on a fixed
    grid, interpolated monotonically and polished with a Newton step.
    """

    def __init__(self, speed: VecFn, n: int = _ARC_TABLE_SIZE):
        self.speed = speed
        t = np.arange(n) * (2.0 * math.pi / n)
        c = np.fft.rfft(speed(t)) / n
        amp = 2.0 * c[1:]
        if n % 2 == 0:
            amp[-1] *= 0.5
        mag = np.abs(amp)
        keep = np.nonzero(mag > 1e-17 * abs(c[0]))[0]
        m = keep[-1] + 1 if keep.size else 0
        self.c0 = c[0].real
        self.k = np.arange(1, m + 1, dtype=float)
        self.ar = amp[:m].real
        self.ai = amp[:m].imag
        self.length = 2.0 * math.pi * self.c0
        grid = np.linspace(0.0, 2.0 * math.pi, n + 1)
        self._inv = PchipInterpolator(self.s_of_t(grid), grid)

    def s_of_t(self, t):
        t = np.asarray(t, dtype=float)
        kt = np.multiply.outer(t, self.k)
        osc = (np.sin(kt) * self.ar + (np.cos(kt) - 1.0) * self.ai) / self.k
        return self.c0 * t + osc.sum(axis=-1)

    def t_of_s(self, s):
        s = np.asarray(s, dtype=float)
        t = self._inv(s)
        # one Newton step on s(t) - s = 0 from the interpolated start
        return t - (self.s_of_t(t) - s) / self.speed(t)


def _parametric_curve(kind, params, gamma_derivs, kappa_t=None, dkappa_t=None) -> CurveGeometry:
    """Shared builder for curves given by a 2*pi-periodic map ``t -> gamma(t)``.

    ``gamma_derivs(t)`` returns derivatives 0..3 of gamma, each of shape (2, n).
    """

    def speed(t):
        d1 = gamma_derivs(t)[1]
        return np.hypot(d1[0], d1[1])

    def kappa_generic(t):
        _, d1, d2, _ = gamma_derivs(t)
        return (d1[0] * d2[1] - d1[1] * d2[0]) / np.hypot(d1[0], d1[1]) ** 3

    def dkappa_generic(t):
        _, d1, d2, d3 = gamma_derivs(t)
        v2 = d1[0] ** 2 + d1[1] ** 2
        cross = d1[0] * d2[1] - d1[1] * d2[0]
        dcross = d1[0] * d3[1] - d1[1] * d3[0]
        dot = d1[0] * d2[0] + d1[1] * d2[1]
        # d/dt [cross / |g'|^3], then divide by ds/dt
        return (dcross * v2 - 3.0 * cross * dot) / v2**3

    kt = kappa_t or kappa_generic
    dkt = dkappa_t or dkappa_generic
    arc = _ArcLength(speed)

    def kappa(s):
        return kt(arc.t_of_s(s))

    def dkappa(s):
        t = arc.t_of_s(s)
        return dkt(t) / speed(t) if dkappa_t is not None else dkt(t)

    def embed(s):
        t = arc.t_of_s(s)
        g, d1, _, _ = gamma_derivs(t)
        v = np.hypot(d1[0], d1[1])
        tan = d1 / v
        return g, tan, np.array([tan[1], -tan[0]])

    curve = CurveGeometry(arc.length, kind, params, kappa, dkappa, embed)
    total = float(np.sum(curve.curvature(curve.nodes(512)))) * curve.length / 512
    if total < 0:
        raise InvalidArgumentError("parametrisation must be counter-clockwise (integral of kappa is -2*pi)")
    return curve


def make_ellipse(a: float, b: float) -> CurveGeometry:
    """Ellipse ``(a cos t, b sin t)`` reparametrised by arc length from ``(a, 0)``."""
    a = _positive("a", a)
    b = _positive("b", b)

    def derivs(t):
        c, s = np.cos(t), np.sin(t)
        return (
            np.array([a * c, b * s]),
            np.array([-a * s, b * c]),
            np.array([-a * c, -b * s]),
            np.array([a * s, -b * c]),
        )

    def q(t):
        return a * a * np.sin(t) ** 2 + b * b * np.cos(t) ** 2

    def kappa_t(t):
        return a * b / q(t) ** 1.5

    def dkappa_dt(t):
        dq = 2.0 * (a * a - b * b) * np.sin(t) * np.cos(t)
        return -1.5 * a * b * dq / q(t) ** 2.5

    return _parametric_curve("ellipse", {"a": a, "b": b}, derivs, kappa_t, dkappa_dt)


def make_parametric(
    gamma: VecFn,
    dgamma: VecFn,
    d2gamma: VecFn,
    d3gamma: VecFn,
    name: str = "parametric",
) -> CurveGeometry:
    """Curve from a counter-clockwise 2*pi-periodic parametrisation.

    Each callable maps an array ``t`` to an array of shape ``(2, len(t))``.
    """

    def derivs(t):
        t = np.asarray(t, dtype=float)
        return gamma(t), dgamma(t), d2gamma(t), d3gamma(t)

    return _parametric_curve("parametric", {"name": name}, derivs)


def make_fourier_curvature(length: float, cos_coeffs: ArrayLike = (), sin_coeffs: ArrayLike = ()) -> CurveGeometry:
    """Curve known only through ``kappa(s) = 2 pi / L + sum_k c_k cos + d_k sin``.

    The constant mode is fixed to ``2 pi / L`` so the total curvature is 2*pi by
    construction.  No embedding is attached: an arbitrary curvature profile need
    not close up into a planar curve.
    """
    L = _positive("length", length)
    c = np.atleast_1d(np.asarray(cos_coeffs, dtype=float))
    d = np.atleast_1d(np.asarray(sin_coeffs, dtype=float))
    if not (np.all(np.isfinite(c)) and np.all(np.isfinite(d))):
        raise InvalidArgumentError("curvature coefficients must be finite")
    omega = 2.0 * math.pi / L
    kc = np.arange(1, c.size + 1) * omega
    kd = np.arange(1, d.size + 1) * omega

    def kappa(s):
        s = np.asarray(s, dtype=float)
        out = np.full(s.shape, omega)
        if c.size:
            out = out + np.cos(np.multiply.outer(s, kc)) @ c
        if d.size:
            out = out + np.sin(np.multiply.outer(s, kd)) @ d
        return out

    def dkappa(s):
        s = np.asarray(s, dtype=float)
        out = np.zeros(s.shape)
        if c.size:
            out = out - np.sin(np.multiply.outer(s, kc)) @ (c * kc)
        if d.size:
            out = out + np.cos(np.multiply.outer(s, kd)) @ (d * kd)
        return out

    params = {"cos": c.tolist(), "sin": d.tolist()}
    return CurveGeometry(L, "fourier-curvature", params, kappa, dkappa, None)


def gauss_bonnet_residual(curve: CurveGeometry, n: int = 512) -> float:
    """``|int_0^L kappa ds - 2 pi|`` by the periodic trapezoid rule."""
    n = max(int(n), 512)
    total = float(np.sum(curve.curvature(curve.nodes(n)))) * curve.length / n
    return abs(total - 2.0 * math.pi)


def max_admissible_h(curve: CurveGeometry, n: int = _ARC_TABLE_SIZE) -> float:
    """Width below which ``1 - h t kappa(s) > 0`` for all s and t in (0, 1).

    This is the curvature bound only, not the reach of the curve.
    """
    kmax = float(np.max(curve.curvature(curve.nodes(n))))
    return 1.0 / max(_KAPPA_FLOOR, kmax)


@dataclass(frozen=True)
class WidthProfile:
    """Relative width ``g(s) = mean + sum_k c_k cos(2 pi k s/L) + d_k sin(...)``.

    ``g`` must satisfy ``1e-6 <= g < 1`` everywhere.
    """

    mean: float
    cos: tuple = ()
    sin: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "cos", tuple(float(x) for x in self.cos))
        object.__setattr__(self, "sin", tuple(float(x) for x in self.sin))
        theta = np.arange(_ARC_TABLE_SIZE) * (2.0 * math.pi / _ARC_TABLE_SIZE)
        g = self._series(theta, 0)
        if not np.all(np.isfinite(g)) or g.min() < 1e-6 or g.max() >= 1.0:
            raise InvalidArgumentError(
                f"width profile must satisfy 0 < g < 1 (sampled range [{g.min():.6g}, {g.max():.6g}])"
            )

    def _series(self, theta, order):
        theta = np.asarray(theta, dtype=float)
        out = np.full(theta.shape, self.mean if order == 0 else 0.0)
        for k, ck in enumerate(self.cos, start=1):
            if order == 0:
                out = out + ck * np.cos(k * theta)
            else:
                out = out - ck * k * np.sin(k * theta)
        for k, dk in enumerate(self.sin, start=1):
            if order == 0:
                out = out + dk * np.sin(k * theta)
            else:
                out = out + dk * k * np.cos(k * theta)
        return out

    def value(self, s: ArrayLike, length: float) -> NDArray[np.float64]:
        return self._series(2.0 * math.pi * np.asarray(s, dtype=float) / length, 0)

    def derivative(self, s: ArrayLike, length: float) -> NDArray[np.float64]:
        w = 2.0 * math.pi / length
        return w * self._series(w * np.asarray(s, dtype=float), 1)

    @property
    def name(self) -> str:
        return f"g(mean={self.mean:g},ncos={len(self.cos)},nsin={len(self.sin)})"

    def to_json(self) -> dict:
        return {"mean": self.mean, "cos": list(self.cos), "sin": list(self.sin)}


def _coeffs(obj: dict, key: str) -> Sequence[float]:
    vals = obj.get(key, [])
    if not isinstance(vals, (list, tuple)):
        raise InvalidArgumentError(f"'{key}' must be a list of numbers")
    return [float(v) for v in vals]


def curve_from_json(obj: dict) -> CurveGeometry:
    if not isinstance(obj, dict) or "type" not in obj:
        raise InvalidArgumentError("curve JSON must be an object with a 'type' field")
    kind = obj["type"]
    try:
        if kind == "circle":
            return make_circle(obj["radius"])
        if kind == "ellipse":
            return make_ellipse(obj["a"], obj["b"])
        if kind == "fourier-curvature":
            return make_fourier_curvature(obj["length"], _coeffs(obj, "cos"), _coeffs(obj, "sin"))
    except KeyError as exc:
        raise InvalidArgumentError(f"curve JSON of type {kind!r} is missing {exc}") from None
    raise InvalidArgumentError(f"unknown curve type {kind!r}")


def width_from_json(obj: dict) -> WidthProfile:
    if not isinstance(obj, dict) or "mean" not in obj:
        raise InvalidArgumentError("width profile JSON needs a 'mean' field")
    return WidthProfile(float(obj["mean"]), tuple(_coeffs(obj, "cos")), tuple(_coeffs(obj, "sin")))
