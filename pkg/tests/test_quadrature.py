import math

import numpy as np
import pytest

from sobolev_lab import (
    BubbleParams,
    DimensionUnsupportedError,
    DomainError,
    NonConvergenceError,
    QuadratureScheme,
    Refined,
    bubble,
    gradient_lp_norm,
    gradient_lp_norm_refined,
    integrate_radial,
    integrate_rn,
    integrate_rn_refined,
    lp_norm,
    lp_norm_refined,
    make_exponents,
    radial_grid,
    scaled,
    sobolev_constant,
    sphere_area,
    tensor_grid,
    transformed,
)

from oracles import (
    BUBBLE_P6_N3,
    MC_TWO_CENTER,
    mapped_trapezoid_radial,
    two_center_integrand,
)

RADIAL = QuadratureScheme(kind="Radial1D", resolution=256)
TENSOR = QuadratureScheme(resolution=128)


def test_sphere_area():
    assert sphere_area(2) == pytest.approx(2 * math.pi)
    assert sphere_area(3) == pytest.approx(4 * math.pi)


@pytest.mark.parametrize("n,res", [(2, 64), (3, 64), (2, 256), (3, 128)])
@pytest.mark.parametrize("tail_map", ["algebraic", "tangent"])
def test_weights_positive_and_finite(n, res, tail_map):
    for decay in (math.inf, 11.0, 3.0, 1.5):
        g = tensor_grid(n, res, scale=2.0, decay=decay, tail_map=tail_map)
        assert np.all(g.weights >= 0) and np.all(np.isfinite(g.weights))
        assert np.all(np.isfinite(g.points))
        assert np.count_nonzero(g.weights) > 0.9 * g.weights.size


@pytest.mark.parametrize("tail_map", ["algebraic", "tangent"])
def test_gaussian_radial_n2(tail_map):
    scheme = QuadratureScheme(kind="Radial1D", resolution=128, tail_map=tail_map)
    assert integrate_radial(lambda r: np.exp(-r * r), 2, scheme) == pytest.approx(math.pi, rel=1e-7)


@pytest.mark.parametrize("n", [2, 3])
def test_gaussian_tensor(n):
    e = make_exponents(n, 1.5)

    def f(x):
        return np.exp(-np.sum(x * x, axis=-1))

    assert integrate_rn(f, e, TENSOR, center=np.zeros(n)) == pytest.approx(math.pi ** (n / 2), rel=1e-5)
    # off-centre grid
    assert integrate_rn(f, e, TENSOR, center=np.full(n, 0.4), scale=2.0) == pytest.approx(
        math.pi ** (n / 2), rel=1e-5)


def test_radial_bubble_power_brute_force():
    # vbar(r)^{p*} for n=3, p=2 is (1+r^2)^{-3}
    brute = mapped_trapezoid_radial(lambda r: (1 + r * r) ** -3.0, 3)
    assert brute == pytest.approx(BUBBLE_P6_N3, rel=1e-12)
    got = integrate_radial(lambda r: (1 + r * r) ** -3.0, 3, RADIAL, scale=4.0, decay=4.0)
    assert abs(got - brute) <= 1e-8 * brute


def test_gradient_norm_against_sobolev_constant():
    e = make_exponents(3, 2.0)
    v = bubble(BubbleParams(1.0, 1.0, (0.0,) * 3), e)
    ratio = gradient_lp_norm(v, e, RADIAL) / lp_norm(v, e.p_star, e, RADIAL)
    assert ratio == pytest.approx(sobolev_constant(e, RADIAL), rel=1e-12)
    # |vbar'|^2 = r^2 (1+r^2)^{-3}; its integral over R^3 is pi^2 / 4 as well
    direct = integrate_radial(lambda r: r * r * (1 + r * r) ** -3.0, 3, RADIAL, scale=4.0, decay=2.0)
    assert gradient_lp_norm(v, e, RADIAL) ** 2 == pytest.approx(direct, rel=1e-8)


def test_two_center_monte_carlo():
    e = make_exponents(2, 1.5)
    f = two_center_integrand((0.0, 0.0), (1.0, 0.0))
    got = integrate_rn(f, e, TENSOR, center=(0.5, 0.0), scale=4.0, decay=11.0)
    mean, se = MC_TWO_CENTER
    assert abs(got - mean) <= 3 * se


def test_two_center_collapses_to_radial():
    e = make_exponents(2, 1.5)
    y1, y2 = (0.0, 0.0), (1e-3, 0.0)
    f = two_center_integrand(y1, y2)
    got = integrate_rn(f, e, TENSOR, center=(5e-4, 0.0), scale=4.0, decay=11.0)
    # first order: |vbar(x) - vbar(x - h)| ~ h |d_1 vbar(x)|; radial average of cos^6
    h = 1e-3
    q = 1.5 / 0.5
    k = 0.5 / 1.5

    def dprofile(r):
        return -k * q * r ** (q - 1) * (1 + r**q) ** (-k - 1)

    cos6 = 5 / 16  # mean of cos^6 over the circle
    linear = h**6 * cos6 * integrate_radial(lambda r: np.abs(dprofile(r)) ** 6, 2, RADIAL,
                                             scale=4.0, decay=11.0)
    assert got == pytest.approx(linear, rel=1e-2)


def test_translation_invariance():
    e = make_exponents(2, 1.5)
    f = two_center_integrand((0.0, 0.0), (1.0, 0.0))
    y = np.array([2.0, -1.0])
    a = integrate_rn(f, e, TENSOR, center=(0.5, 0.0), scale=4.0, decay=11.0)
    b = integrate_rn(lambda x: f(x - y), e, TENSOR, center=(2.5, -1.0), scale=4.0, decay=11.0)
    assert abs(a - b) <= 2 * 1e-5 * abs(a)


def test_dimension_unsupported():
    with pytest.raises(DimensionUnsupportedError):
        integrate_rn_refined(lambda x: np.ones(len(x)), 4, TENSOR)


def test_nonconvergence_detected():
    # a narrow spike far from the grid centre is under-resolved at low resolution
    e = make_exponents(2, 1.5)
    coarse = QuadratureScheme(resolution=64)

    def spike(x):
        return np.exp(-np.sum((x - 3.0) ** 2, axis=-1) / 1e-2)

    with pytest.raises(NonConvergenceError):
        integrate_rn(spike, e, coarse, scale=1.0)


def test_refined_check():
    r = Refined(1.0, 1.0 + 1e-9)
    assert r.check(1e-8) is r
    with pytest.raises(NonConvergenceError):
        Refined(1.0, 1.1).check(1e-3)


# -- norms ---------------------------------------------------------------


@pytest.mark.parametrize("n,p", [(2, 1.5), (3, 2.0), (3, 2.5)])
def test_bubble_norm_refinement(n, p):
    e = make_exponents(n, p)
    v = bubble(BubbleParams(1.0, 1.0, (0.0,) * n), e)
    r = lp_norm_refined(v, e.p_star, RADIAL)
    assert 0 < r.value < math.inf
    assert r.delta <= 1e-6 * r.value


def test_norm_homogeneity_same_nodes():
    e = make_exponents(2, 1.5)
    v = bubble(BubbleParams(1.0, 1.0, (0.3, 0.1)), e)
    one = lp_norm_refined(v, e.p_star, TENSOR)
    two = lp_norm_refined(scaled(v, 2.0), e.p_star, TENSOR)
    assert two.value == pytest.approx(2 * one.value, rel=1e-12)
    g1 = gradient_lp_norm_refined(v, e, TENSOR)
    g2 = gradient_lp_norm_refined(scaled(v, -2.0), e, TENSOR)
    assert g2.value == pytest.approx(2 * g1.value, rel=1e-12)


def test_zero_function_norms():
    e = make_exponents(2, 1.5)
    v = bubble(BubbleParams(1.0, 1.0, (0.0, 0.0)), e)
    z = v - v
    assert lp_norm(z, e.p_star, e, TENSOR) == 0.0
    assert gradient_lp_norm(z, e, TENSOR) == 0.0


def test_norm_rejects_small_q():
    e = make_exponents(2, 1.5)
    v = bubble(BubbleParams(1.0, 1.0, (0.0, 0.0)), e)
    with pytest.raises(DomainError):
        lp_norm(v, 0.5, e, TENSOR)


@pytest.mark.parametrize("lam", [0.5, 3.0])
@pytest.mark.parametrize("n,p", [(2, 1.5), (3, 2.5)])
def test_dilation_laws(n, p, lam):
    e = make_exponents(n, p)
    v = bubble(BubbleParams(1.0, 1.0, (0.0,) * n), e)
    w = bubble(BubbleParams(1.0, lam, (0.0,) * n), e)
    assert lp_norm(w, e.p_star, e, RADIAL) == pytest.approx(
        lam ** (-n / e.p_star) * lp_norm(v, e.p_star, e, RADIAL), rel=1e-8)
    assert gradient_lp_norm(w, e, RADIAL) == pytest.approx(
        lam ** (1 - n / p) * gradient_lp_norm(v, e, RADIAL), rel=1e-8)


def test_tensor_matches_radial_for_bubble():
    e = make_exponents(2, 1.5)
    v = bubble(BubbleParams(1.0, 1.0, (0.0, 0.0)), e)
    # same function represented without the radial hint
    u = transformed(v, 1.0, 1.0, (0.0, 0.0))
    from dataclasses import replace
    u = replace(u, radial_center=None)
    assert lp_norm(u, e.p_star, e, TENSOR) == pytest.approx(lp_norm(v, e.p_star, e, RADIAL), rel=1e-7)
    assert gradient_lp_norm(u, e, TENSOR) == pytest.approx(gradient_lp_norm(v, e, RADIAL), rel=1e-6)


def test_radial_grid_weights_carry_surface_measure():
    g = radial_grid(3, 128, scale=1.0, decay=math.inf)
    r = g.points[:, 0]
    assert g.integrate(np.exp(-r * r)) == pytest.approx(math.pi**1.5, rel=1e-10)
