"""Quadrature over R^n for power-law decaying integrands.

Radial direction: Gauss-Legendre on a core panel ``[0, R]`` plus a mapped
tail panel ``[R, inf)``.  The tail map is ``r = R * t**(-m)`` (algebraic) or
``r = R * tan(pi (1 + t) / 4)**m`` (tangent), with the stretch ``m`` chosen
from the integrand's decay so the mapped integrand vanishes like ``t**3`` at
the far end.  Non-radial integrals use a tensor product of that radial rule
with an angular rule (trapezoid in 2D; Gauss-Legendre in cos(theta) times
trapezoid in 3D), centred on the function's anchor point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import (
    ConstructionError,
    DegenerateInputError,
    DimensionUnsupportedError,
    DomainError,
    NonConvergenceError,
)
from .functions import Exponents, TestFunction, scaled

RADIAL = "Radial1D"
TENSOR = "TensorGrid"
ALGEBRAIC = "algebraic"
TANGENT_MAP = "tangent"

RADIAL_TOLERANCE = 1e-7
TENSOR_TOLERANCE = 1e-5
TAIL_ORDER = 4.0
MAX_STRETCH = 32
# floor for refinement checks on integrals that vanish identically
ABS_FLOOR = 1e-13
FAR_RADIUS = 1e60


@dataclass(frozen=True)
class QuadratureScheme:
    """Immutable quadrature configuration.

    ``resolution`` is the number of radial nodes; angular node counts are
    derived from it.  ``tolerance`` defaults to 1e-7 (radial) or 1e-5
    (tensor grid) relative refinement error.
    """

    kind: str = TENSOR
    resolution: int = 128
    tail_map: str = ALGEBRAIC
    tolerance: float | None = None

    def __post_init__(self):
        if self.kind not in (RADIAL, TENSOR):
            raise DomainError(f"unknown quadrature kind {self.kind!r}")
        if self.tail_map not in (ALGEBRAIC, TANGENT_MAP):
            raise DomainError(f"unknown tail map {self.tail_map!r}")
        if self.resolution < 8:
            raise DomainError("resolution must be at least 8")

    @property
    def tol(self) -> float:
        if self.tolerance is not None:
            return self.tolerance
        return RADIAL_TOLERANCE if self.kind == RADIAL else TENSOR_TOLERANCE

    def refined(self, factor: int = 2) -> "QuadratureScheme":
        return replace(self, resolution=self.resolution * factor)

    def radial(self) -> "QuadratureScheme":
        return replace(self, kind=RADIAL)

    def tensor(self) -> "QuadratureScheme":
        return replace(self, kind=TENSOR)


@dataclass(frozen=True)
class Refined:
    """An integral at resolution R (``coarse``) and 2R (``value``)."""

    value: float
    coarse: float

    @property
    def delta(self) -> float:
        return abs(self.value - self.coarse)

    def map(self, fn: Callable[[float], float]) -> "Refined":
        return Refined(fn(self.value), fn(self.coarse))

    def check(self, tol: float, what: str = "integral") -> "Refined":
        if not math.isfinite(self.value):
            raise NonConvergenceError(f"{what}: non-finite value {self.value}")
        if self.delta > tol * abs(self.value) + ABS_FLOOR:
            raise NonConvergenceError(
                f"{what}: refinements {self.coarse!r} and {self.value!r} "
                f"differ by {self.delta:.3e} (> {tol:.1e} relative)"
            )
        return self


def sphere_area(n: int) -> float:
    """Surface measure of the unit sphere in R^n."""
    return 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)


def tail_stretch(decay: float) -> int:
    """Stretch m for an integrand ``f(r) r^{n-1} ~ r^{-decay}``."""
    if decay <= 1:
        raise ConstructionError(f"integrand tail r^-{decay:g} is not integrable")
    if not math.isfinite(decay):
        return 1
    return int(min(MAX_STRETCH, max(1, math.ceil(TAIL_ORDER / (decay - 1)))))


def _gauss_legendre01(k: int):
    x, w = np.polynomial.legendre.leggauss(k)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=256)
def _unit_radial_rule(resolution: int, stretch: int, tail_map: str):
    """Nodes/weights of the radial rule with core radius 1 (dr measure only)."""
    n_tail = max(4, resolution // 4)
    n_core = resolution - n_tail
    rc, wc = _gauss_legendre01(n_core)
    t, wt = _gauss_legendre01(n_tail)
    m = stretch
    if tail_map == ALGEBRAIC:
        rt = t ** (-m)
        jac = m * t ** (-m - 1)
    else:
        phase = math.pi * (1.0 + t) / 4.0
        rt = np.tan(phase) ** m
        jac = m * np.tan(phase) ** (m - 1) / np.cos(phase) ** 2 * (math.pi / 4.0)
    r = np.concatenate([rc, rt])
    w = np.concatenate([wc, wt * jac])
    # nodes this far out carry no weight after the mapping; keep them finite
    far = ~(r < FAR_RADIUS)
    r[far] = FAR_RADIUS
    w[far] = 0.0
    r.setflags(write=False)
    w.setflags(write=False)
    return r, w


@lru_cache(maxsize=64)
def _unit_directions(n: int, resolution: int):
    """Unit directions and angular weights (summing to the sphere area)."""
    if n == 2:
        k = max(8, resolution // 2)
        phi = 2 * math.pi * np.arange(k) / k
        dirs = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
        w = np.full(k, 2 * math.pi / k)
    elif n == 3:
        k_pol = max(4, resolution // 4)
        k_az = max(8, resolution // 2)
        ct, wct = np.polynomial.legendre.leggauss(k_pol)
        st = np.sqrt(1.0 - ct**2)
        phi = 2 * math.pi * np.arange(k_az) / k_az
        dirs = np.stack(
            [
                np.outer(st, np.cos(phi)).ravel(),
                np.outer(st, np.sin(phi)).ravel(),
                np.repeat(ct, k_az),
            ],
            axis=-1,
        )
        w = np.outer(wct, np.full(k_az, 2 * math.pi / k_az)).ravel()
    else:
        raise DimensionUnsupportedError(f"tensor grids support n in {{2,3}}, got n={n}")
    dirs.setflags(write=False)
    w.setflags(write=False)
    return dirs, w


@dataclass(frozen=True)
class Grid:
    """Absolute quadrature nodes ``points`` (N, n) and positive ``weights`` (N,)."""

    points: np.ndarray
    weights: np.ndarray

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, np.asarray(values, dtype=float)))


def radial_grid(n: int, resolution: int, *, center=None, scale: float = 1.0,
                decay: float = math.inf, tail_map: str = ALGEBRAIC) -> Grid:
    """Nodes along the ray ``center + r e_1`` weighted by ``|S^{n-1}| r^{n-1} dr``."""
    r, w = _unit_radial_rule(resolution, tail_stretch(decay), tail_map)
    r = scale * r
    w = sphere_area(n) * scale * w * r ** (n - 1)
    center = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    pts = np.tile(center, (r.size, 1))
    pts[:, 0] += r
    return Grid(pts, w)


def tensor_grid(n: int, resolution: int, *, center=None, scale: float = 1.0,
                decay: float = math.inf, tail_map: str = ALGEBRAIC) -> Grid:
    dirs, wa = _unit_directions(n, resolution)
    r, w = _unit_radial_rule(resolution, tail_stretch(decay), tail_map)
    r = scale * r
    wr = scale * w * r ** (n - 1)
    center = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    pts = center + (r[:, None, None] * dirs[None, :, :]).reshape(-1, n)
    weights = np.outer(wr, wa).ravel()
    return Grid(pts, weights)


def integrand_decay(u: TestFunction, q: float, gradient: bool = False) -> float:
    """Tail rate of ``|u|^q r^{n-1}`` (or of ``|grad u|^q r^{n-1}``)."""
    rate = u.decay + 1.0 if gradient else u.decay
    return q * rate - (u.n - 1)


def grid_for(u: TestFunction, scheme: QuadratureScheme, decay: float,
             resolution: int | None = None, radial: bool | None = None) -> Grid:
    """Grid adapted to ``u``: radial when ``u`` is radial, tensor otherwise."""
    res = scheme.resolution if resolution is None else resolution
    if radial is None:
        radial = u.radial_center is not None
    if radial:
        return radial_grid(u.n, res, center=u.radial_center, scale=u.scale,
                           decay=decay, tail_map=scheme.tail_map)
    return tensor_grid(u.n, res, center=u.anchor, scale=u.scale, decay=decay,
                       tail_map=scheme.tail_map)


def _pair(fn: Callable[[int], float], scheme: QuadratureScheme) -> Refined:
    return Refined(fn(2 * scheme.resolution), fn(scheme.resolution))


def integrate_radial_refined(f, n: int, scheme: QuadratureScheme, *,
                             scale: float = 1.0, decay: float = math.inf) -> Refined:
    def at(res):
        g = radial_grid(n, res, scale=scale, decay=decay, tail_map=scheme.tail_map)
        return g.integrate(f(g.points[:, 0]))

    return _pair(at, scheme)


def integrate_radial(f, n: int, scheme: QuadratureScheme, *,
                     scale: float = 1.0, decay: float = math.inf) -> float:
    """``int_{R^n} f(|x|) dx`` for a radial integrand ``f(r)``.

    ``decay`` is the tail rate of ``f(r) r^{n-1}``.
    """
    tol = scheme.tolerance if scheme.tolerance is not None else RADIAL_TOLERANCE
    return integrate_radial_refined(f, n, scheme, scale=scale, decay=decay).check(
        tol, "radial integral").value


def integrate_rn_refined(f, n: int, scheme: QuadratureScheme, *, center=None,
                         scale: float = 1.0, decay: float = math.inf) -> Refined:
    if n > 3:
        raise DimensionUnsupportedError(f"tensor grids support n in {{2,3}}, got n={n}")

    def at(res):
        g = tensor_grid(n, res, center=center, scale=scale, decay=decay,
                        tail_map=scheme.tail_map)
        return g.integrate(f(g.points))

    return _pair(at, scheme)


def integrate_rn(f, exps: Exponents, scheme: QuadratureScheme, *, center=None,
                 scale: float = 1.0, decay: float = math.inf) -> float:
    """``int_{R^n} f(x) dx`` on a tensor grid centred at ``center``."""
    tol = scheme.tolerance if scheme.tolerance is not None else TENSOR_TOLERANCE
    return integrate_rn_refined(f, exps.n, scheme, center=center, scale=scale,
                                decay=decay).check(tol, "R^n integral").value


def _norm_from_grid(values: np.ndarray, grid: Grid, q: float) -> float:
    total = grid.integrate(np.abs(values) ** q)
    return max(total, 0.0) ** (1.0 / q)


def lp_norm_refined(u: TestFunction, q: float, scheme: QuadratureScheme) -> Refined:
    if q < 1:
        raise DomainError(f"q must be >= 1, got {q}")
    decay = integrand_decay(u, q)

    def at(res):
        g = grid_for(u, scheme, decay, res)
        return _norm_from_grid(u.value(g.points), g, q)

    return _pair(at, scheme)


def _tol_for(u: TestFunction, scheme: QuadratureScheme) -> float:
    if scheme.tolerance is not None:
        return scheme.tolerance
    return RADIAL_TOLERANCE if u.radial_center is not None else TENSOR_TOLERANCE


def lp_norm(u: TestFunction, q: float, exps: Exponents, scheme: QuadratureScheme) -> float:
    """``(int |u|^q)^{1/q}``; radial rule for radial ``u``, tensor grid otherwise."""
    return lp_norm_refined(u, q, scheme).check(_tol_for(u, scheme), f"L^{q:g} norm").value


def gradient_lp_norm_refined(u: TestFunction, exps: Exponents,
                             scheme: QuadratureScheme) -> Refined:
    decay = integrand_decay(u, exps.p, gradient=True)

    def at(res):
        g = grid_for(u, scheme, decay, res)
        grad = u.grad(g.points)
        return _norm_from_grid(np.sqrt(np.einsum("...i,...i->...", grad, grad)), g, exps.p)

    return _pair(at, scheme)


def gradient_lp_norm(u: TestFunction, exps: Exponents, scheme: QuadratureScheme) -> float:
    """``(int |grad u|^p)^{1/p}`` with the Euclidean norm of the gradient."""
    return gradient_lp_norm_refined(u, exps, scheme).check(
        _tol_for(u, scheme), "gradient L^p norm").value


def normalize_lpstar(u: TestFunction, target: float, exps: Exponents,
                     scheme: QuadratureScheme) -> TestFunction:
    """Rescale ``u`` so that its L^{p*} norm equals ``target``."""
    if not target > 0:
        raise DomainError("target norm must be positive")
    norm = lp_norm(u, exps.p_star, exps, scheme)
    if norm == 0:
        raise DegenerateInputError("cannot normalise a function with zero L^{p*} norm")
    ratio = target / norm
    if ratio == 1.0:
        return u
    return scaled(u, ratio)


__all__ = [
    "QuadratureScheme", "Refined", "Grid", "sphere_area", "tail_stretch",
    "radial_grid", "tensor_grid", "grid_for", "integrand_decay",
    "integrate_radial", "integrate_radial_refined", "integrate_rn",
    "integrate_rn_refined", "lp_norm", "lp_norm_refined", "gradient_lp_norm",
    "gradient_lp_norm_refined", "normalize_lpstar", "RADIAL", "TENSOR",
]
