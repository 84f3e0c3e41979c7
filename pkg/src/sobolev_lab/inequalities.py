"""Clarkson, reverse Minkowski and elementary inequalities as signed slacks.

Pointwise inequalities accept broadcastable arrays and evaluate a batch in
one call.  Homogeneous inequalities are evaluated on inputs rescaled to unit
maximum magnitude (the truth of each is scale invariant), which keeps the
rounding error of the slack at the level of a few ulps; ``scale`` records
the factor removed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .quadrature import QuadratureScheme, tensor_grid
from .sobolev import SUB_TWO, propagate

ROUNDING = 1e-12


@dataclass(frozen=True)
class SlackResult:
    """``slack = rhs - lhs``; ``holds`` where ``slack >= -tolerance``."""

    lhs: np.ndarray | float
    rhs: np.ndarray | float
    slack: np.ndarray | float
    tolerance: np.ndarray | float
    holds: np.ndarray | bool
    scale: np.ndarray | float = 1.0

    @classmethod
    def of(cls, lhs, rhs, tolerance=None, scale=1.0) -> "SlackResult":
        lhs = np.asarray(lhs, dtype=float)
        rhs = np.asarray(rhs, dtype=float)
        if tolerance is None:
            tolerance = ROUNDING * np.maximum(np.abs(rhs), 1.0)
        slack = rhs - lhs
        holds = slack >= -np.asarray(tolerance)
        unbox = (lambda a: a.item() if np.ndim(a) == 0 else a)
        return cls(unbox(lhs), unbox(rhs), unbox(slack), unbox(np.asarray(tolerance, dtype=float)),
                   unbox(holds), unbox(np.asarray(scale, dtype=float)))

    @property
    def min_slack(self) -> float:
        return float(np.min(self.slack))

    @property
    def all_hold(self) -> bool:
        return bool(np.all(self.holds))


def _sub_two(p: float) -> None:
    if not (1 < p < 2):
        raise DomainError(f"this inequality needs p in (1,2), got {p}")


def _nonzero(m):
    return np.where(m > 0, m, 1.0)


def _removed_scale(m, q):
    # the factor divided out of a homogeneous inequality; may overflow to inf
    with np.errstate(over="ignore"):
        return m**q


def _vnorm(x):
    return np.sqrt(np.einsum("...i,...i->...", x, x))


def clarkson_scalar(a, b, p: float) -> SlackResult:
    """``|a+b|^{p'} + |a-b|^{p'} <= 2 (|a|^p + |b|^p)^{p'/p}`` for p in (1,2)."""
    _sub_two(p)
    return _clarkson_scalar(a, b, p)


def _clarkson_scalar(a, b, p):
    q = p / (p - 1)
    a, b = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float))
    m = _nonzero(np.maximum(np.abs(a), np.abs(b)))
    a, b = a / m, b / m
    lhs = np.abs(a + b) ** q + np.abs(a - b) ** q
    rhs = 2.0 * (np.abs(a) ** p + np.abs(b) ** p) ** (q / p)
    return SlackResult.of(lhs, rhs, scale=_removed_scale(m, q))


def clarkson_pointwise(F, G, p: float) -> SlackResult:
    """``|F+G|^{p'} + |F-G|^{p'} <= 2 (|F|^p + |G|^p)^{p'/p}`` for vectors, p in (1,2)."""
    _sub_two(p)
    return _clarkson_pointwise_sub(F, G, p)


def _clarkson_pointwise_sub(F, G, p):
    q = p / (p - 1)
    F, G, m = _rescale_pair(F, G)
    lhs = _vnorm(F + G) ** q + _vnorm(F - G) ** q
    rhs = 2.0 * (_vnorm(F) ** p + _vnorm(G) ** p) ** (q / p)
    return SlackResult.of(lhs, rhs, scale=_removed_scale(m, q))


def _rescale_pair(F, G):
    F, G = np.broadcast_arrays(np.asarray(F, float), np.asarray(G, float))
    m = _nonzero(np.maximum(_vnorm(F), _vnorm(G)))
    return F / m[..., None], G / m[..., None], m


def clarkson_chain(F, G, p: float) -> np.ndarray:
    """Successive bounds of the vector Clarkson argument, shape ``(4, ...)``.

    Row 0: ``|F-G|^{p'} + |F+G|^{p'}``; row 1: the coordinatewise bound from
    reverse Minkowski with ``s = 2/p'``; row 2: after scalar Clarkson in each
    coordinate; row 3: ``2 (|F|^p + |G|^p)^{p'/p}`` after Minkowski with
    ``r = 2/p``.  Each row is at most the next one.
    """
    _sub_two(p)
    q = p / (p - 1)
    F, G, _ = _rescale_pair(F, G)
    s0 = _vnorm(F - G) ** q + _vnorm(F + G) ** q
    coords = (np.abs(F + G) ** q + np.abs(F - G) ** q) ** (2.0 / q)
    s1 = coords.sum(axis=-1) ** (q / 2.0)
    scal = (np.abs(F) ** p + np.abs(G) ** p) ** (2.0 / p)
    s2 = 2.0 * scal.sum(axis=-1) ** (q / 2.0)
    s3 = 2.0 * (_vnorm(F) ** p + _vnorm(G) ** p) ** (q / p)
    return np.stack([s0, s1, s2, s3])


def clarkson_pointwise_super(F, G, p: float) -> SlackResult:
    """``|F+G|^p + |F-G|^p <= 2^{p-1} (|F|^p + |G|^p)`` for p >= 2."""
    if p < 2:
        raise DomainError(f"this inequality needs p >= 2, got {p}")
    return _clarkson_pointwise_super(F, G, p)


def _clarkson_pointwise_super(F, G, p):
    F, G, m = _rescale_pair(F, G)
    lhs = _vnorm(F + G) ** p + _vnorm(F - G) ** p
    rhs = 2.0 ** (p - 1) * (_vnorm(F) ** p + _vnorm(G) ** p)
    return SlackResult.of(lhs, rhs, scale=_removed_scale(m, p))


def _check_s(s: float) -> None:
    if not (0 < s < 1):
        raise DomainError(f"s must lie in (0,1), got {s}")


def _quasinorm(a, s, axis=-1):
    # 0**s = 0 for s in (0,1), which numpy already does
    return np.sum(a**s, axis=axis) ** (1.0 / s)


def reverse_minkowski_finite(a, b, s: float) -> SlackResult:
    """``(sum a_i^s)^{1/s} + (sum b_i^s)^{1/s} <= (sum (a_i+b_i)^s)^{1/s}``, s in (0,1)."""
    _check_s(s)
    a, b = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float))
    if np.any(a < 0) or np.any(b < 0):
        raise DomainError("reverse Minkowski needs nonnegative entries")
    m = _nonzero(np.maximum(a.max(axis=-1), b.max(axis=-1)))
    a, b = a / m[..., None], b / m[..., None]
    lhs = _quasinorm(a, s) + _quasinorm(b, s)
    rhs = _quasinorm(a + b, s)
    return SlackResult.of(lhs, rhs, scale=m)


def elementary_monotone(a, b, q) -> SlackResult:
    """``a^q - b^q >= a - b`` for ``a >= b >= 1`` and ``q >= 1``.

    The difference of powers is formed as ``b^q expm1(q log1p((a-b)/b))`` to
    avoid cancellation near ``a = b``.
    """
    a, b, q = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float), np.asarray(q, float))
    if np.any(b < 1) or np.any(a < b) or np.any(q < 1):
        raise DomainError("elementary_monotone needs a >= b >= 1 and q >= 1")
    d = a - b
    powers = b**q * np.expm1(q * np.log1p(d / b))
    return SlackResult.of(d, powers, tolerance=ROUNDING * np.maximum(d, 1.0))


# -- integral forms ---------------------------------------------------------


def clarkson_integral_sides(F: np.ndarray, G: np.ndarray, weights: np.ndarray,
                            p: float, branch: str | None = None) -> tuple:
    """Both sides of the integral Clarkson inequality for fields sampled on a grid.

    ``F``, ``G`` have shape ``(..., N, n)`` and ``weights`` shape ``(N,)``; the
    leading axes form a batch.
    """
    sub = (p < 2) if branch is None else (branch == SUB_TWO)
    q = p / (p - 1)

    def norm(X):
        return np.maximum((_vnorm(X) ** p) @ weights, 0.0) ** (1.0 / p)

    nF, nG = norm(F), norm(G)
    nP, nM = norm((F + G) / 2), norm((F - G) / 2)
    if sub:
        lhs = nP**q + nM**q
        rhs = (0.5 * nF**p + 0.5 * nG**p) ** (q / p)
    else:
        lhs = nP**p + nM**p
        rhs = 0.5 * nF**p + 0.5 * nG**p
    return lhs, rhs, (nF, nG, nP, nM)


def _clarkson_from_norms(p, sub):
    q = p / (p - 1)

    def fn(nF, nG, nP, nM):
        if sub:
            return (0.5 * nF**p + 0.5 * nG**p) ** (q / p) - nP**q - nM**q
        return 0.5 * nF**p + 0.5 * nG**p - nP**p - nM**p

    return fn


def clarkson_integral(F, G, p: float, scheme: QuadratureScheme, *, n: int,
                      center=None, scale: float = 4.0, decay: float = np.inf,
                      branch: str | None = None) -> SlackResult:
    """Integral Clarkson inequality for vector fields ``F``, ``G`` on R^n.

    p < 2: ``||(F+G)/2||^{p'} + ||(F-G)/2||^{p'} <= (||F||^p/2 + ||G||^p/2)^{p'/p}``;
    p >= 2: ``||(F+G)/2||^p + ||(F-G)/2||^p <= ||F||^p/2 + ||G||^p/2``.
    ``decay`` is the tail rate of ``|F|^p r^{n-1}``.  The tolerance is the
    propagated refinement error between resolutions R and 2R.

    ``F(points)`` may return shape ``(..., N, n)``; the leading axes are then a
    batch of independent trials sharing one grid, and the result is an array.
    """
    if not p > 1:
        raise DomainError(f"p must exceed 1, got {p}")
    sub = (p < 2) if branch is None else (branch == SUB_TWO)
    sides = []
    for res in (2 * scheme.resolution, scheme.resolution):
        g = tensor_grid(n, res, center=center, scale=scale, decay=decay,
                        tail_map=scheme.tail_map)
        sides.append(clarkson_integral_sides(F(g.points), G(g.points), g.weights, p, branch))
    (lhs, rhs, fine), (_, _, coarse) = sides
    keys = ("nF", "nG", "nP", "nM")
    budget = propagate(_clarkson_from_norms(p, sub), dict(zip(keys, fine)),
                       dict(zip(keys, coarse)))
    return SlackResult.of(lhs, rhs, tolerance=budget + ROUNDING * np.maximum(np.abs(rhs), 1.0))


def reverse_minkowski_integral(h1, h2, s: float, scheme: QuadratureScheme, *, n: int,
                               center=None, scale: float = 4.0,
                               decay: float = np.inf) -> SlackResult:
    """``||h1||_s + ||h2||_s <= ||h1 + h2||_s`` for nonnegative functions, s in (0,1).

    ``decay`` is the tail rate of ``h^s r^{n-1}``.  As with
    :func:`clarkson_integral`, ``h(points)`` may carry leading batch axes.
    """
    _check_s(s)

    def fn(a, b, c):
        return c - a - b

    vals = []
    for res in (2 * scheme.resolution, scheme.resolution):
        g = tensor_grid(n, res, center=center, scale=scale, decay=decay,
                        tail_map=scheme.tail_map)
        x1, x2 = h1(g.points), h2(g.points)
        if np.any(x1 < 0) or np.any(x2 < 0):
            raise DomainError("reverse Minkowski needs nonnegative functions")
        vals.append([np.maximum(x**s @ g.weights, 0.0) ** (1.0 / s) for x in (x1, x2, x1 + x2)])
    (a, b, c), (a0, b0, c0) = vals
    budget = propagate(fn, dict(a=a, b=b, c=c), dict(a=a0, b=b0, c=c0))
    return SlackResult.of(a + b, c, tolerance=budget + ROUNDING * np.maximum(c, 1.0))


# -- random sweeps ---------------------------------------------------------

NEAR_EQUALITY = 1e-3


def _near(rng, base, spread=10.0):
    return base + NEAR_EQUALITY * spread * rng.uniform(-1.0, 1.0, base.shape)


def _merge(results: list[SlackResult]) -> SlackResult:
    cat = [np.concatenate([np.ravel(getattr(r, k)) for r in results])
           for k in ("lhs", "rhs", "tolerance", "scale")]
    return SlackResult.of(cat[0], cat[1], tolerance=cat[2], scale=cat[3])


def property_sweep(p: float, trials: int, seed: int = 0, dim: int = 3) -> dict:
    """Random and near-equality trials of every pointwise inequality valid at ``p``.

    Components are uniform on [-10, 10] ([0, 100] or [1, 100] where the
    inequality needs it); a tenth of the trials perturb an equality case by
    ``1e-3`` of the range.  Returns ``{name: SlackResult}``.
    """
    if trials < 1:
        raise DomainError("trials must be >= 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    k = max(1, trials // 10)
    m = trials - k
    out = {}
    if 1 < p < 2:
        a, b = rng.uniform(-10, 10, (2, m))
        e = rng.uniform(-10, 10, k)
        out["clarkson_scalar"] = _merge([
            clarkson_scalar(a, b, p),
            clarkson_scalar(e, _near(rng, e), p),
            clarkson_scalar(e, _near(rng, np.zeros(k)), p),
        ])
        F, G = rng.uniform(-10, 10, (2, m, dim))
        E = rng.uniform(-10, 10, (k, dim))
        out["clarkson_pointwise"] = _merge([
            clarkson_pointwise(F, G, p),
            clarkson_pointwise(E, _near(rng, E), p),
            clarkson_pointwise(E, _near(rng, np.zeros_like(E)), p),
        ])
        rows = clarkson_chain(F, G, p)
        out["clarkson_chain"] = _merge([SlackResult.of(rows[i], rows[i + 1]) for i in range(3)])
    if p >= 2:
        F, G = rng.uniform(-10, 10, (2, m, dim))
        E = rng.uniform(-10, 10, (k, dim))
        out["clarkson_pointwise_super"] = _merge([
            clarkson_pointwise_super(F, G, p),
            clarkson_pointwise_super(E, _near(rng, E), p),
        ])
    exponents = [0.3] + ([2.0 * (p - 1) / p] if 1 < p < 2 else [])
    for s in exponents:
        a, b = rng.uniform(0, 100, (2, m, 5))
        e = rng.uniform(0, 100, (k, 5))
        out[f"reverse_minkowski_finite[s={s:.6g}]"] = _merge([
            reverse_minkowski_finite(a, b, s),
            reverse_minkowski_finite(e, np.abs(_near(rng, e, 100.0)), s),
            reverse_minkowski_finite(e, np.zeros_like(e), s),
        ])
    bb = rng.uniform(1, 100, trials)
    aa = bb + rng.uniform(0, 1, trials) * (100 - bb)
    qq = rng.uniform(1, 5, trials)
    out["elementary_monotone"] = elementary_monotone(aa, bb, qq)
    return out



# -- integral sweeps ---------------------------------------------------------


def _tail_power(decay_rate: float, t: float, n: int) -> float:
    """Algebraic power k making ``|grad (1+r^2)^-k|^t r^{n-1}`` decay at ``decay_rate``."""
    return max(1.0, ((decay_rate + n - 1) / t - 1.0) / 2.0)


class _FieldDictionary:
    """Gradients of random Gaussian and algebraic bumps, evaluated on demand.

    Half the atoms are ``exp(-|x-c|^2 / 2w^2)``, the rest ``(1 + |x-c|^2/w^2)^-k``
    with ``k >= kmin``, so every field decays at least like ``r^-(2 kmin + 1)``.
    """

    def __init__(self, rng, n: int, size: int, kmin: float):
        self.centers = rng.uniform(-1.0, 1.0, (size, n))
        self.widths = rng.uniform(0.4, 1.5, size)
        self.powers = np.where(np.arange(size) % 2 == 0, np.inf, rng.uniform(kmin, kmin + 1.0, size))

    def gradients(self, points: np.ndarray) -> np.ndarray:
        d = points[None, :, :] - self.centers[:, None, :]
        w2 = self.widths[:, None] ** 2
        r2 = np.sum(d * d, axis=-1) / w2
        k = self.powers[:, None]
        gauss = np.isinf(k)
        with np.errstate(invalid="ignore"):
            factor = np.where(gauss, -np.exp(-0.5 * r2), -2.0 * np.where(gauss, 1.0, k)
                              * (1.0 + r2) ** (-np.where(gauss, 1.0, k) - 1.0))
        return factor[:, :, None] * d / w2[:, :, None]


def _coefficient_pairs(rng, trials: int, size: int, near: str):
    """Random coefficient pairs; the last tenth sit near the equality case ``near``."""
    k = max(1, trials // 10) if trials >= 10 else 0
    m = trials - k
    A = rng.normal(size=(trials, size))
    B = np.empty_like(A)
    B[:m] = rng.normal(size=(m, size))
    noise = NEAR_EQUALITY * rng.uniform(-1.0, 1.0, (k, size))
    if near == "same":
        B[m:] = A[m:] + noise
    elif near == "zero":
        B[m:] = noise
    else:  # proportional
        B[m:] = rng.uniform(0.1, 3.0, (k, 1)) * A[m:] + noise
    return A, B


def integral_sweep(p: float, trials: int, seed: int = 0, *, n: int = 2,
                   scheme: QuadratureScheme | None = None, atoms: int = 6,
                   batch: int = 250) -> dict:
    """Random trials of the integral inequalities on fields over R^n.

    Each batch of ``batch`` trials draws a fresh dictionary of ``atoms`` bump
    gradients and combines them with random coefficients, so a whole batch
    shares one quadrature grid.  Returned as ``{name: SlackResult}`` with the
    refinement budget as tolerance.  Runs the Clarkson form valid at ``p`` and
    the reverse Minkowski form on ``h = |F|^2`` for ``s = 0.3`` (and
    ``s = 2/p'`` when p < 2).
    """
    if trials < 1:
        raise DomainError("trials must be >= 1")
    if not p > 1:
        raise DomainError(f"p must exceed 1, got {p}")
    scheme = QuadratureScheme(resolution=64) if scheme is None else scheme
    rng = np.random.Generator(np.random.PCG64(seed))
    sizes = [min(batch, trials - i) for i in range(0, trials, batch)]
    out = {}

    def run(name, t, near, evaluate):
        kmin = _tail_power(4.0, t, n)
        decay = t * (2.0 * kmin + 1.0) - (n - 1)
        parts = []
        for size in sizes:
            D = _FieldDictionary(rng, n, atoms, kmin)
            A, B = _coefficient_pairs(rng, size, atoms, near)

            def field(C):
                return lambda x: np.einsum("bk,knd->bnd", C, D.gradients(x), optimize=True)

            parts.append(evaluate(field(A), field(B), decay))
        out[name] = _merge(parts)

    def clarkson(F, G, decay):
        return clarkson_integral(F, G, p, scheme, n=n, center=np.zeros(n),
                                 decay=decay)

    run("clarkson_integral_sub" if p < 2 else "clarkson_integral_super", p, "same", clarkson)
    for s in [0.3] + ([2.0 * (p - 1) / p] if p < 2 else []):

        def minkowski(F, G, decay, s=s):
            def sq(f):
                return lambda x: np.sum(f(x) ** 2, axis=-1)
            return reverse_minkowski_integral(sq(F), sq(G), s, scheme, n=n,
                                              center=np.zeros(n), decay=decay)

        run(f"reverse_minkowski_integral[s={s:.6g}]", 2.0 * s, "proportional", minkowski)
    return out


__all__ = [
    "SlackResult", "property_sweep", "integral_sweep", "clarkson_scalar", "clarkson_pointwise", "clarkson_pointwise_super",
    "clarkson_chain", "clarkson_integral", "clarkson_integral_sides",
    "reverse_minkowski_finite", "reverse_minkowski_integral", "elementary_monotone",
]
