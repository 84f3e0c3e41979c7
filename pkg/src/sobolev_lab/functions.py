"""Test functions on R^n: extremal bubbles, perturbations and composites.

Every function is vectorised: ``value(x)`` accepts an array of shape
``(..., n)`` and returns shape ``(...)``; ``grad(x)`` returns ``(..., n)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .errors import ConstructionError, DomainError

Array = np.ndarray

BUBBLE = "Bubble"
PERTURBED = "PerturbedBubble"
RADIAL_PROFILE = "RadialProfile"
COMPOSITE = "Composite"

GAUSSIAN = "GaussianBump"
COMPACT = "CompactBump"
TANGENT = "ManifoldTangent"
DIRECTION_SHAPES = (GAUSSIAN, COMPACT, TANGENT)


@dataclass(frozen=True)
class Exponents:
    """Exponent bundle for a fixed dimension ``n`` and exponent ``p``."""

    n: int
    p: float
    p_prime: float
    p_star: float
    alpha: float
    beta_cor: float

    @property
    def sub_two(self) -> bool:
        return self.p < 2

    @property
    def profile_power(self) -> float:
        """k in v(x) = (1 + |x|^{p'})^{-k}."""
        return (self.n - self.p) / self.p

    @property
    def bubble_decay(self) -> float:
        """Tail rate gamma of the bubble, v(x) ~ |x|^{-gamma}."""
        return (self.n - self.p) / (self.p - 1)


def make_exponents(n: int, p: float) -> Exponents:
    if int(n) != n or n < 2:
        raise DomainError(f"n must be an integer >= 2, got {n}")
    n = int(n)
    p = float(p)
    if not (1 < p < n):
        raise DomainError(f"p must lie in (1,n), got p={p} with n={n}")
    p_prime = p / (p - 1)
    p_star = n * p / (n - p)
    alpha = p_prime if p < 2 else p
    beta_cor = alpha * (p_star * (3 + 4 * p - (3 * p + 1) / n)) ** 2
    if abs(1 / p + 1 / p_prime - 1) > 1e-14:
        raise DomainError(f"conjugate exponent inconsistent for p={p}")
    return Exponents(n, p, p_prime, p_star, alpha, beta_cor)


@dataclass(frozen=True)
class BubbleParams:
    """A point ``c * vbar(lam_scale * (x - center))`` of the extremal manifold."""

    c: float
    lam_scale: float
    center: tuple[float, ...]

    def __post_init__(self):
        if not self.lam_scale > 0 or not math.isfinite(self.lam_scale):
            raise DomainError(f"lam_scale must be positive, got {self.lam_scale}")
        if self.c == 0 or not math.isfinite(self.c):
            raise DomainError(f"c must be finite and nonzero, got {self.c}")
        object.__setattr__(self, "center", tuple(float(t) for t in self.center))

    @property
    def center_array(self) -> Array:
        return np.asarray(self.center, dtype=float)

    def compose(self, c: float, lam: float, y: Sequence[float]) -> "BubbleParams":
        """Parameters of ``x -> c * v(lam * (x - y))`` where v has these parameters."""
        y = np.asarray(y, dtype=float)
        return BubbleParams(
            self.c * c, self.lam_scale * lam, tuple(y + self.center_array / lam)
        )


def _norm_last(z: Array) -> Array:
    return np.sqrt(np.einsum("...i,...i->...", z, z))


def bubble_value(x, params: BubbleParams, exps: Exponents) -> Array:
    x = np.asarray(x, dtype=float)
    z = params.lam_scale * (x - params.center_array)
    rho = _norm_last(z)
    return params.c * (1.0 + rho**exps.p_prime) ** (-exps.profile_power)


def bubble_gradient(x, params: BubbleParams, exps: Exponents) -> Array:
    """Analytic gradient; the zero vector at the center (the radial limit)."""
    x = np.asarray(x, dtype=float)
    z = params.lam_scale * (x - params.center_array)
    rho = _norm_last(z)
    k, q = exps.profile_power, exps.p_prime
    with np.errstate(divide="ignore", invalid="ignore"):
        radial = np.where(
            rho > 0,
            -k * q * rho ** (q - 2) * (1.0 + rho**q) ** (-k - 1),
            0.0,
        )
    return (params.c * params.lam_scale * radial)[..., None] * z


@dataclass(frozen=True)
class TestFunction:
    """An evaluable function on R^n with analytic gradient and quadrature hints.

    ``anchor`` is the point the quadrature grid is centred on, ``scale`` a
    radius containing all non-tail structure, and ``decay`` the power-law
    rate with which ``|u|`` decays at infinity (``|u|^q`` then decays at rate
    ``q * decay``; ``inf`` means faster than any power).
    """

    __test__ = False  # not a pytest class

    kind: str
    n: int
    value: Callable[[Array], Array] = field(repr=False)
    grad: Callable[[Array], Array] = field(repr=False)
    anchor: tuple[float, ...]
    scale: float
    decay: float
    radial_center: tuple[float, ...] | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __call__(self, x):
        return self.value(x)

    @property
    def anchor_array(self) -> Array:
        return np.asarray(self.anchor, dtype=float)

    def decay_exponent_hint(self, exps: Exponents) -> float:
        """Power-law tail rate of ``|u|^{p*}``."""
        return exps.p_star * self.decay

    def __neg__(self) -> "TestFunction":
        return scaled(self, -1.0)

    def __sub__(self, other: "TestFunction") -> "TestFunction":
        return combine([(1.0, self), (-1.0, other)])

    def __add__(self, other: "TestFunction") -> "TestFunction":
        return combine([(1.0, self), (1.0, other)])


def bubble(params: BubbleParams, exps: Exponents) -> TestFunction:
    if len(params.center) != exps.n:
        raise DomainError(f"center has dimension {len(params.center)}, expected {exps.n}")
    return TestFunction(
        kind=BUBBLE,
        n=exps.n,
        value=lambda x: bubble_value(x, params, exps),
        grad=lambda x: bubble_gradient(x, params, exps),
        anchor=params.center,
        scale=4.0 / params.lam_scale,
        decay=exps.bubble_decay,
        radial_center=params.center,
        meta={"params": params},
    )


def radial_profile(
    profile: Callable[[Array], Array],
    derivative: Callable[[Array], Array],
    center: Sequence[float],
    *,
    scale: float = 4.0,
    decay: float = math.inf,
) -> TestFunction:
    """``u(x) = profile(|x - center|)``; ``derivative`` must vanish at r = 0."""
    c = np.asarray(center, dtype=float)

    def value(x):
        return profile(_norm_last(np.asarray(x, dtype=float) - c))

    def grad(x):
        d = np.asarray(x, dtype=float) - c
        r = _norm_last(d)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(r > 0, derivative(r) / np.where(r > 0, r, 1.0), 0.0)
        return ratio[..., None] * d

    return TestFunction(
        kind=RADIAL_PROFILE, n=len(c), value=value, grad=grad,
        anchor=tuple(c), scale=scale, decay=decay, radial_center=tuple(c),
    )


def power_profile(n: int, q: float, k: float, center=None, lam: float = 1.0) -> TestFunction:
    """Radial profile ``(1 + (lam r)^q)^{-k}``; a bubble when q = p' and k = (n-p)/p."""
    if q <= 1:
        raise DomainError("q must exceed 1 so the profile is differentiable at 0")
    center = np.zeros(n) if center is None else np.asarray(center, dtype=float)

    def f(r):
        return (1.0 + (lam * r) ** q) ** (-k)

    def df(r):
        s = lam * r
        return -k * q * lam * s ** (q - 1) * (1.0 + s**q) ** (-k - 1)

    return radial_profile(f, df, center, scale=4.0 / lam, decay=q * k)


def combine(terms: Sequence[tuple[float, TestFunction]]) -> TestFunction:
    """Linear combination ``sum coef * u``."""
    terms = [(float(a), u) for a, u in terms]
    if not terms:
        raise ConstructionError("empty combination")
    n = terms[0][1].n
    if any(u.n != n for _, u in terms):
        raise ConstructionError("dimension mismatch in combination")
    anchor = terms[0][1].anchor_array
    live = [(a, u) for a, u in terms if a != 0]
    scale = max(
        [u.scale + float(np.linalg.norm(u.anchor_array - anchor)) for _, u in terms]
    )
    decay = min([u.decay for _, u in live], default=math.inf)
    centers = [u.radial_center for _, u in terms]
    radial = None
    if all(c is not None for c in centers) and all(
        np.allclose(c, centers[0], rtol=0, atol=1e-14) for c in centers
    ):
        radial = centers[0]

    def value(x):
        return sum(a * u.value(x) for a, u in terms)

    def grad(x):
        return sum(a * u.grad(x) for a, u in terms)

    return TestFunction(
        kind=COMPOSITE, n=n, value=value, grad=grad, anchor=tuple(anchor),
        scale=scale, decay=decay, radial_center=radial,
        meta={"terms": terms},
    )


def scaled(u: TestFunction, c: float) -> TestFunction:
    """``c * u``; with c = -1 this is the negation."""
    return transformed(u, c, 1.0, np.zeros(u.n))


def transformed(u: TestFunction, c: float, lam: float, y) -> TestFunction:
    """``x -> c * u(lam * (x - y))``."""
    if not lam > 0:
        raise DomainError("dilation must be positive")
    if c == 0:
        raise DomainError("multiplier must be nonzero")
    y = np.asarray(y, dtype=float)

    def value(x):
        return c * u.value(lam * (np.asarray(x, dtype=float) - y))

    def grad(x):
        return (c * lam) * u.grad(lam * (np.asarray(x, dtype=float) - y))

    def move(pt):
        return None if pt is None else tuple(y + np.asarray(pt) / lam)

    meta = {"base": u, "c": c, "lam": lam, "y": tuple(y)}
    if "params" in u.meta and u.kind == BUBBLE:
        meta["params"] = u.meta["params"].compose(c, lam, y)
    return TestFunction(
        kind=BUBBLE if u.kind == BUBBLE else COMPOSITE,
        n=u.n, value=value, grad=grad, anchor=move(u.anchor), scale=u.scale / lam,
        decay=u.decay, radial_center=move(u.radial_center), meta=meta,
    )


@dataclass(frozen=True)
class PerturbationDirection:
    """A perturbation shape with its parameters.

    GaussianBump: ``amplitude * exp(-|x - center|^2 / (2 width^2))``.
    CompactBump: ``amplitude * exp(1 - 1/(1 - |x - center|^2 / width^2))`` inside
    the ball of radius ``width``, zero outside.
    ManifoldTangent: derivative of the bubble family along ``tangent`` in the
    coordinates ``(log|c|, log lam, lam * y)``, times ``amplitude``.
    """

    shape: str
    center: tuple[float, ...] = ()
    width: float = 1.0
    amplitude: float = 1.0
    tangent: tuple[float, ...] = ()

    def __post_init__(self):
        if self.shape not in DIRECTION_SHAPES:
            raise DomainError(f"unknown perturbation shape {self.shape!r}")
        if self.shape != TANGENT and not self.width > 0:
            raise DomainError("bump width must be positive")
        object.__setattr__(self, "center", tuple(float(t) for t in self.center))
        object.__setattr__(self, "tangent", tuple(float(t) for t in self.tangent))


def _shift_params(base: BubbleParams, xi: Array, h: float) -> BubbleParams:
    """Base parameters moved a step ``h`` along the tangent coordinates ``xi``."""
    c = base.c * math.exp(h * xi[0])
    lam = base.lam_scale * math.exp(h * xi[1])
    # center displacement measured in units of the base length scale
    y = base.center_array + h * xi[2:] / base.lam_scale
    return BubbleParams(c, lam, tuple(y))


def _profile_derivatives(rho: Array, exps: Exponents):
    """``g, g'(rho)/rho, g''(rho)`` for the profile ``g = (1 + rho^{p'})^{-k}``."""
    k, q = exps.profile_power, exps.p_prime
    base = 1.0 + rho**q
    g = base**-k
    with np.errstate(divide="ignore", invalid="ignore"):
        g1_over = np.where(rho > 0, -k * q * rho ** (q - 2) * base ** (-k - 1), 0.0)
        g2 = np.where(rho > 0, -k * q * ((q - 1) * rho ** (q - 2) * base ** (-k - 1)
                                         - (k + 1) * q * rho ** (2 * q - 2) * base ** (-k - 2)),
                      0.0)
    return g, g1_over, g2


def _tangent_function(base: BubbleParams, xi: Array, amplitude: float,
                      exps: Exponents) -> TestFunction:
    """Exact derivative at t = 0 of the bubble with parameters ``_shift_params(base, xi, t)``.

    With ``z = lam (x - y)`` the bubble is ``c g(|z|)`` and ``dz/dt = xi_1 z - xi_y``,
    so the tangent is ``c [xi_0 g + grad g(z) . (xi_1 z - xi_y)]``.
    """
    lam, y = base.lam_scale, base.center_array
    a = amplitude * base.c
    xi0, xi1, xiy = float(xi[0]), float(xi[1]), np.asarray(xi[2:], dtype=float)

    def parts(x):
        z = lam * (np.asarray(x, dtype=float) - y)
        rho = _norm_last(z)
        g, g1_over, g2 = _profile_derivatives(rho, exps)
        w = xi1 * z - xiy
        return z, rho, g, g1_over, g2, w

    def value(x):
        z, _, g, g1_over, _, w = parts(x)
        return a * (xi0 * g + g1_over * np.einsum("...i,...i->...", z, w))

    def grad(x):
        z, rho, g, g1_over, g2, w = parts(x)
        zw = np.einsum("...i,...i->...", z, w)
        with np.errstate(divide="ignore", invalid="ignore"):
            zhat_w = np.where(rho > 0, zw / rho, 0.0)
            zhat = np.where(rho[..., None] > 0, z / rho[..., None], 0.0)
        # Hessian of g(|z|) applied to w: g'' (zhat.w) zhat + (g'/rho) (w - (zhat.w) zhat)
        hess_w = (g2 * zhat_w)[..., None] * zhat + g1_over[..., None] * (w - zhat_w[..., None] * zhat)
        grad_g = g1_over[..., None] * z
        dz = (xi0 + xi1) * grad_g + hess_w
        return a * lam * dz

    return TestFunction(
        kind=TANGENT, n=exps.n, value=value, grad=grad, anchor=base.center,
        scale=4.0 / lam, decay=exps.bubble_decay,
        meta={"base": base, "tangent": tuple(xi)},
    )


def direction_function(
    direction: PerturbationDirection, exps: Exponents, base: BubbleParams | None = None
) -> TestFunction:
    n = exps.n
    if direction.shape == TANGENT:
        if base is None:
            raise ConstructionError("a tangent direction needs a base bubble")
        xi = np.asarray(direction.tangent, dtype=float)
        if xi.shape != (n + 2,):
            raise ConstructionError(f"tangent must have {n + 2} components")
        return _tangent_function(base, xi, direction.amplitude, exps)

    c = np.asarray(direction.center, dtype=float)
    if c.shape != (n,):
        raise ConstructionError(f"bump center must have {n} components")
    w, amp = direction.width, direction.amplitude
    if direction.shape == GAUSSIAN:

        def value(x):
            d = np.asarray(x, dtype=float) - c
            return amp * np.exp(-np.einsum("...i,...i->...", d, d) / (2 * w * w))

        def grad(x):
            d = np.asarray(x, dtype=float) - c
            g = amp * np.exp(-np.einsum("...i,...i->...", d, d) / (2 * w * w))
            return (-g / (w * w))[..., None] * d

        reach = 9.0 * w
    else:

        def _parts(x):
            d = (np.asarray(x, dtype=float) - c) / w
            s = np.einsum("...i,...i->...", d, d)
            inside = s < 1
            gap = np.where(inside, 1.0 - s, 1.0)
            val = np.where(inside, amp * np.exp(1.0 - 1.0 / gap), 0.0)
            return d, gap, val

        def value(x):
            return _parts(x)[2]

        def grad(x):
            d, gap, val = _parts(x)
            return (-2.0 * val / (w * gap * gap))[..., None] * d

        reach = w
    return TestFunction(
        kind=direction.shape, n=n, value=value, grad=grad, anchor=tuple(c),
        scale=reach, decay=math.inf, meta={"direction": direction},
    )


def _probe_points(u: TestFunction, count: int = 64) -> Array:
    rng = np.random.default_rng(0)
    return u.anchor_array + u.scale * rng.standard_normal((count, u.n))


def check_finite(u: TestFunction, exps: Exponents | None = None) -> TestFunction:
    """Reject functions whose values or norms cannot be finite."""
    pts = _probe_points(u)
    if not (np.all(np.isfinite(u.value(pts))) and np.all(np.isfinite(u.grad(pts)))):
        raise ConstructionError(f"{u.kind}: non-finite values at probe points")
    if exps is not None and math.isfinite(u.decay):
        # |u|^{p*} and |grad u|^p must decay faster than |x|^{-n}
        if exps.p_star * u.decay <= u.n or exps.p * (u.decay + 1) <= u.n:
            raise ConstructionError(f"{u.kind}: tail too heavy for finite norms")
    return u


def make_perturbed_bubble(
    base: BubbleParams, direction: PerturbationDirection, eps: float, exps: Exponents
) -> TestFunction:
    """``u = v + eps * phi`` for the base bubble v and direction phi."""
    if not math.isfinite(eps):
        raise ConstructionError(f"eps must be finite, got {eps}")
    v = bubble(base, exps)
    phi = direction_function(direction, exps, base)
    u = combine([(1.0, v), (eps, phi)])
    u = replace(
        u,
        kind=PERTURBED,
        anchor=base.center,
        scale=max(v.scale, phi.scale + float(np.linalg.norm(phi.anchor_array - v.anchor_array))),
        meta={"base": base, "direction": direction, "eps": eps, "phi": phi},
    )
    return check_finite(u, exps)


__all__ = [
    "Exponents", "make_exponents", "BubbleParams", "bubble_value", "bubble_gradient",
    "TestFunction", "bubble", "radial_profile", "power_profile", "combine", "scaled",
    "transformed", "PerturbationDirection", "direction_function",
    "make_perturbed_bubble", "check_finite", "BUBBLE", "PERTURBED", "RADIAL_PROFILE",
    "COMPOSITE", "GAUSSIAN", "COMPACT", "TANGENT", "DIRECTION_SHAPES",
]
