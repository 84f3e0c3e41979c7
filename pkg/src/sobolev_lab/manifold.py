"""Projection onto the extremal manifold in the gradient and L^{p*} metrics.

The infimum over the manifold is approximated by multistart Nelder-Mead in
the coordinates ``(c, log lam, center)``; the returned value is therefore an
upper bound on the true asymmetry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

from .errors import DegenerateInputError
from .functions import BubbleParams, Exponents, TestFunction, bubble_gradient, bubble_value
from .quadrature import (
    QuadratureScheme,
    integrand_decay,
    lp_norm_refined,
    radial_grid,
    tensor_grid,
)
from .sobolev import unit_bubble

MAX_EVALS = 2000
FATOL = 1e-10
XATOL = 1e-9
MAX_RESTARTS = 4


@dataclass(frozen=True)
class ProjectionResult:
    value: float
    argmin: BubbleParams
    objective_history: list = field(default_factory=list)
    multistart_count: int = 0
    converged: bool = False
    initial_values: list = field(default_factory=list)
    evaluations: int = 0


Optimizer = Callable[[Callable[[np.ndarray], float], np.ndarray, np.ndarray], tuple]


def nelder_mead(fun, x0: np.ndarray, steps: np.ndarray) -> tuple[np.ndarray, float, int, bool]:
    """Simplex descent with restarts from the incumbent.

    Stops when a restart improves the objective by less than ``FATOL`` or the
    evaluation budget is spent.  Returns ``(x, f, evaluations, converged)``.
    """
    x = np.asarray(x0, dtype=float)
    fx = fun(x)
    used = 1
    converged = False
    for _ in range(MAX_RESTARTS):
        simplex = np.vstack([x, x + np.diag(steps)])
        res = minimize(
            fun, x, method="Nelder-Mead",
            options=dict(initial_simplex=simplex, xatol=XATOL, fatol=FATOL,
                         maxfev=max(MAX_EVALS - used, 1), adaptive=x.size > 2),
        )
        used += res.nfev
        improved = fx - res.fun
        if res.fun < fx:
            x, fx = res.x, float(res.fun)
        if improved < FATOL:
            converged = True
            break
        if used >= MAX_EVALS:
            break
        steps = steps * 0.1
    return x, fx, used, converged


def _projection_grid(u: TestFunction, exps: Exponents, scheme: QuadratureScheme):
    decay = min(
        integrand_decay(u, exps.p, True),
        integrand_decay(u, exps.p_star),
        exps.p * (exps.bubble_decay + 1) - (exps.n - 1),
    )
    return tensor_grid(u.n, scheme.resolution, center=u.anchor, scale=u.scale,
                       decay=decay, tail_map=scheme.tail_map)


def _bubble_norm(exps: Exponents, scheme: QuadratureScheme) -> float:
    radial = QuadratureScheme(kind="Radial1D", resolution=scheme.resolution,
                              tail_map=scheme.tail_map)
    return lp_norm_refined(unit_bubble(exps), exps.p_star, radial).value


def _half_mass_radius(weights: np.ndarray, dist: np.ndarray) -> float:
    order = np.argsort(dist)
    cum = np.cumsum(weights[order])
    k = int(np.searchsorted(cum, 0.5 * cum[-1]))
    return float(dist[order][min(k, dist.size - 1)])


def _unit_bubble_half_mass(exps: Exponents, scheme: QuadratureScheme) -> float:
    g = radial_grid(exps.n, scheme.resolution, scale=4.0,
                    decay=exps.n * exps.p_prime - (exps.n - 1), tail_map=scheme.tail_map)
    r = g.points[:, 0]
    vals = (1.0 + r**exps.p_prime) ** (-exps.profile_power * exps.p_star)
    return _half_mass_radius(g.weights * vals, r)


def fit_initialization(u: TestFunction, exps: Exponents,
                       scheme: QuadratureScheme) -> list[BubbleParams]:
    """Multistart seeds: moment-based, peak-based, and x4 / /4 scale variants."""
    g = _projection_grid(u, exps, scheme)
    vals = u.value(g.points)
    mass = g.weights * np.abs(vals) ** exps.p_star
    total = mass.sum()
    if not total > 0:
        raise DegenerateInputError("cannot seed a projection for a zero function")
    norm_u = total ** (1.0 / exps.p_star)
    bary = mass @ g.points / total
    dist = np.linalg.norm(g.points - bary, axis=-1)
    rho_u = max(_half_mass_radius(mass, dist), 1e-12)
    lam = _unit_bubble_half_mass(exps, scheme) / rho_u
    peak = int(np.argmax(np.abs(vals)))
    peak_at = g.points[peak]

    vbar = _bubble_norm(exps, scheme)

    def amp(lam_):
        return norm_u * lam_ ** (exps.n / exps.p_star) / vbar

    sign = 1.0 if vals[peak] >= 0 else -1.0
    signs = [sign]
    if vals.min() < 0 < vals.max():
        signs.append(-sign)
    seeds = []
    for s in signs:
        seeds.append(BubbleParams(s * amp(lam), lam, tuple(bary)))
        seeds.append(BubbleParams(s * amp(lam), lam, tuple(peak_at)))
        seeds.append(BubbleParams(s * amp(4 * lam), 4 * lam, tuple(bary)))
        seeds.append(BubbleParams(s * amp(lam / 4), lam / 4, tuple(bary)))
    return seeds


def _steps(n: int, lam: float, with_c: float | None) -> np.ndarray:
    parts = [] if with_c is None else [0.1 * abs(with_c)]
    return np.array(parts + [0.1] + [0.1 / lam] * n)


def _run(objective, seeds_x, steps_fn, decode, optimizer: Optimizer | None):
    optimizer = optimizer or nelder_mead
    best_x, best_f = None, math.inf
    history, inits = [], []
    converged_all = True
    evals = 0
    for x0 in seeds_x:
        f0 = objective(x0)
        inits.append(f0)
        x, fx, used, conv = optimizer(objective, x0, steps_fn(x0))
        evals += used
        history.append(fx)
        if fx < best_f:
            best_x, best_f, best_conv = x, fx, conv
        converged_all &= conv
    assert best_f <= min(inits) + 1e-15, "optimizer returned a worse point than its seed"
    return ProjectionResult(
        value=float(best_f), argmin=decode(best_x), objective_history=history,
        multistart_count=len(seeds_x), converged=bool(best_conv),
        initial_values=inits, evaluations=evals,
    )


def asymmetry_gradient(u: TestFunction, exps: Exponents, scheme: QuadratureScheme,
                       optimizer: Optimizer | None = None,
                       seeds: Sequence[BubbleParams] | None = None) -> ProjectionResult:
    """Upper bound for ``inf_v ||grad u - grad v||_p / ||u||_{p*}`` over the manifold."""
    g = _projection_grid(u, exps, scheme)
    norm_u = max(g.integrate(np.abs(u.value(g.points)) ** exps.p_star), 0.0) ** (1 / exps.p_star)
    if norm_u == 0:
        raise DegenerateInputError("asymmetry undefined for a zero function")
    grad_u = u.grad(g.points)
    n = exps.n

    def decode(x):
        return BubbleParams(float(x[0]), math.exp(float(x[1])), tuple(x[2:]))

    def objective(x):
        if x[0] == 0 or abs(x[1]) > 700:
            return math.inf
        d = grad_u - bubble_gradient(g.points, decode(x), exps)
        mag = np.sqrt(np.einsum("...i,...i->...", d, d))
        return max(g.integrate(mag**exps.p), 0.0) ** (1 / exps.p) / norm_u

    seeds = list(seeds) if seeds is not None else fit_initialization(u, exps, scheme)
    xs = [np.array([s.c, math.log(s.lam_scale), *s.center]) for s in seeds]
    return _run(objective, xs, lambda x: _steps(n, math.exp(x[1]), x[0]), decode, optimizer)


def lpstar_candidate(norm_u: float, sign: float, lam: float, center, exps: Exponents,
                     vbar_norm: float) -> BubbleParams:
    """Bubble with scale ``lam`` whose L^{p*} norm equals ``norm_u``."""
    return BubbleParams(sign * norm_u * lam ** (exps.n / exps.p_star) / vbar_norm, lam, tuple(center))


def asymmetry_lpstar(u: TestFunction, exps: Exponents, scheme: QuadratureScheme,
                     optimizer: Optimizer | None = None,
                     seeds: Sequence[BubbleParams] | None = None) -> ProjectionResult:
    """Upper bound for ``inf ||u - v||_{p*} / ||u||_{p*}`` over norm-matched bubbles.

    The multiplier is eliminated through the norm constraint, so each sign
    branch is a search over ``(log lam, center)`` only.
    """
    g = _projection_grid(u, exps, scheme)
    vals_u = u.value(g.points)
    norm_u = max(g.integrate(np.abs(vals_u) ** exps.p_star), 0.0) ** (1 / exps.p_star)
    if norm_u == 0:
        raise DegenerateInputError("asymmetry undefined for a zero function")
    vbar = _bubble_norm(exps, scheme)
    n = exps.n
    seeds = list(seeds) if seeds is not None else fit_initialization(u, exps, scheme)
    # evaluate both sign branches for every seed
    branches = []
    for s in seeds:
        for sign in (1.0, -1.0):
            branches.append((sign, np.array([math.log(s.lam_scale), *s.center])))
    results = []
    for sign in (1.0, -1.0):
        xs = [x for sg, x in branches if sg == sign]

        def decode(x, sign=sign):
            return lpstar_candidate(norm_u, sign, math.exp(float(x[0])), x[1:], exps, vbar)

        def objective(x, decode=decode):
            if abs(x[0]) > 700:
                return math.inf
            d = vals_u - bubble_value(g.points, decode(x), exps)
            return max(g.integrate(np.abs(d) ** exps.p_star), 0.0) ** (1 / exps.p_star) / norm_u

        results.append(_run(objective, xs, lambda x: _steps(n, math.exp(x[0]), None),
                            decode, optimizer))
    best = min(results, key=lambda r: r.value)
    return ProjectionResult(
        value=best.value, argmin=best.argmin,
        objective_history=results[0].objective_history + results[1].objective_history,
        multistart_count=sum(r.multistart_count for r in results),
        converged=best.converged,
        initial_values=results[0].initial_values + results[1].initial_values,
        evaluations=sum(r.evaluations for r in results),
    )


__all__ = [
    "ProjectionResult", "asymmetry_gradient", "asymmetry_lpstar",
    "fit_initialization", "nelder_mead", "lpstar_candidate",
]
