"""Sobolev constant, deficit functionals and gradient distances."""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, DomainError
from .functions import BubbleParams, Exponents, TestFunction, bubble
from .quadrature import (
    RADIAL,
    QuadratureScheme,
    Refined,
    grid_for,
    gradient_lp_norm_refined,
    integrand_decay,
    lp_norm_refined,
)

SUB_TWO = "SubTwo"
SUPER_TWO = "SuperTwo"
EPS = np.finfo(float).eps

_S_CACHE: dict = {}
_S_LOCK = threading.Lock()


def unit_bubble(exps: Exponents, lam_scale: float = 1.0) -> TestFunction:
    return bubble(BubbleParams(1.0, lam_scale, (0.0,) * exps.n), exps)


def sobolev_constant_refined(exps: Exponents, scheme: QuadratureScheme,
                             lam_scale: float = 1.0) -> Refined:
    """Rayleigh quotient of the extremal at resolutions R and 2R.

    Always evaluated with the radial rule; results are cached per
    ``(n, p, resolution, tail map, lam_scale)``.
    """
    key = (exps.n, exps.p, scheme.resolution, scheme.tail_map, lam_scale)
    hit = _S_CACHE.get(key)
    if hit is not None:
        return hit
    v = unit_bubble(exps, lam_scale)
    radial = QuadratureScheme(kind=RADIAL, resolution=scheme.resolution,
                              tail_map=scheme.tail_map)
    g = gradient_lp_norm_refined(v, exps, radial)
    f = lp_norm_refined(v, exps.p_star, radial)
    out = Refined(g.value / f.value, g.coarse / f.coarse)
    with _S_LOCK:
        _S_CACHE.setdefault(key, out)
    return _S_CACHE[key]


def sobolev_constant(exps: Exponents, scheme: QuadratureScheme) -> float:
    """Optimal constant S(n, p) as the ratio ``||grad v||_p / ||v||_{p*}`` at a bubble."""
    radial_tol = scheme.tolerance if scheme.tolerance is not None else 1e-7
    return sobolev_constant_refined(exps, scheme).check(radial_tol, "S(n,p)").value


def check_against_reference(exps: Exponents, scheme: QuadratureScheme,
                            reference: float, rtol: float = 1e-8) -> bool:
    """Compare the computed constant with an externally supplied value."""
    return abs(sobolev_constant(exps, scheme) / reference - 1.0) <= rtol


def branch_of(exps: Exponents, branch: str | None = None) -> str:
    """Deficit branch; ``branch`` forces one (used to compare them at p = 2)."""
    if branch is None:
        return SUB_TWO if exps.p < 2 else SUPER_TWO
    if branch not in (SUB_TWO, SUPER_TWO):
        raise DomainError(f"unknown branch {branch!r}")
    return branch


def homogeneity(exps: Exponents, branch: str | None = None) -> float:
    """Degree used by the deficit: p' below 2, p from 2 on."""
    return exps.p_prime if branch_of(exps, branch) == SUB_TWO else exps.p


def propagate(fn, fine: dict, coarse: dict):
    """First-order refinement error of ``fn(**quantities)``.

    Each quantity is moved from its fine to its coarse value in turn and the
    absolute changes are summed.  Array quantities are propagated elementwise.
    """
    base = fn(**fine)
    total = 0.0
    for key in fine:
        if np.array_equal(fine[key], coarse[key]):
            continue
        moved = dict(fine)
        moved[key] = coarse[key]
        total += abs(fn(**moved) - base)
    return total


@dataclass(frozen=True)
class DeficitValue:
    value: float
    branch: str
    grad_norm: float
    func_norm: float
    numerical_slack: float


def _deficit_formula(q: float):
    def fn(G, N, S):
        return (G**q - S**q * N**q) / N**q

    return fn


@dataclass(frozen=True)
class Norms:
    """Refined quadrature values of the norms of one function."""

    grad: Refined
    func: Refined


def norms_refined(u: TestFunction, exps: Exponents, scheme: QuadratureScheme) -> Norms:
    return Norms(gradient_lp_norm_refined(u, exps, scheme),
                 lp_norm_refined(u, exps.p_star, scheme))


def deficit_from_norms(norms: Norms, S: Refined, exps: Exponents,
                       branch: str | None = None) -> DeficitValue:
    br = branch_of(exps, branch)
    q = homogeneity(exps, br)
    if norms.func.value == 0:
        raise DegenerateInputError("deficit undefined for a function with zero L^{p*} norm")
    fn = _deficit_formula(q)
    fine = dict(G=norms.grad.value, N=norms.func.value, S=S.value)
    coarse = dict(G=norms.grad.coarse, N=norms.func.coarse, S=S.coarse)
    value = fn(**fine)
    ratio_q = (fine["G"] / fine["N"]) ** q
    slack = propagate(fn, fine, coarse) + 16 * EPS * (ratio_q + fine["S"] ** q)
    return DeficitValue(value, br, fine["G"], fine["N"], slack)


def deficit(u: TestFunction, exps: Exponents, scheme: QuadratureScheme,
            branch: str | None = None) -> DeficitValue:
    """Normalised Sobolev gap, homogeneous of degree p' (p < 2) or p (p >= 2)."""
    return deficit_from_norms(norms_refined(u, exps, scheme),
                              sobolev_constant_refined(exps, scheme), exps, branch)


def linear_deficit_from_norms(norms: Norms, S: Refined) -> tuple[float, float]:
    def fn(G, N, S):
        return (G - S * N) / N

    if norms.func.value == 0:
        raise DegenerateInputError("deficit undefined for a function with zero L^{p*} norm")
    fine = dict(G=norms.grad.value, N=norms.func.value, S=S.value)
    coarse = dict(G=norms.grad.coarse, N=norms.func.coarse, S=S.coarse)
    slack = propagate(fn, fine, coarse) + 16 * EPS * (fine["G"] / fine["N"] + fine["S"])
    return fn(**fine), slack


def linear_deficit(u: TestFunction, exps: Exponents, scheme: QuadratureScheme) -> float:
    """``(||grad u||_p - S ||u||_{p*}) / ||u||_{p*}``."""
    return linear_deficit_from_norms(norms_refined(u, exps, scheme),
                                     sobolev_constant_refined(exps, scheme))[0]


def gradient_distance_refined(u: TestFunction, v: TestFunction, exps: Exponents,
                              scheme: QuadratureScheme) -> Refined:
    diff = u - v
    decay = min(integrand_decay(u, exps.p, True), integrand_decay(v, exps.p, True))

    def at(res):
        g = grid_for(diff, scheme, decay, res)
        d = u.grad(g.points) - v.grad(g.points)
        mag = np.sqrt(np.einsum("...i,...i->...", d, d))
        return max(g.integrate(mag**exps.p), 0.0) ** (1.0 / exps.p)

    return Refined(at(2 * scheme.resolution), at(scheme.resolution))


def gradient_distance(u: TestFunction, v: TestFunction, exps: Exponents,
                      scheme: QuadratureScheme) -> float:
    """``||grad u - grad v||_p``."""
    return gradient_distance_refined(u, v, exps, scheme).value


__all__ = [
    "SUB_TWO", "SUPER_TWO", "DeficitValue", "Norms", "sobolev_constant",
    "sobolev_constant_refined", "check_against_reference", "deficit",
    "deficit_from_norms", "linear_deficit", "linear_deficit_from_norms",
    "gradient_distance", "gradient_distance_refined", "norms_refined",
    "branch_of", "homogeneity", "propagate", "unit_bubble",
]
