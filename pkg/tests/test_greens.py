import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import spiralwave as sw
from spiralwave import greens
from spiralwave.geometry import RectDomain

from oracles import (brute_laplace_assembly, brute_v_component, fd_gradient,
                     fd_laplacian_5pt, k0_small_argument_reg)

DOM200 = RectDomain(200.0, 200.0)
KAPPA = 0.05


# ---------------------------------------------------------------------------
# screened (modified Helmholtz) kernel
# ---------------------------------------------------------------------------

def test_value_is_free_space_plus_small_images():
    x = (100.0, 100.0)
    xi = (50.0, 50.0)
    from scipy.special import k0
    free = -k0(KAPPA * np.hypot(50.0, 50.0)) / (2 * np.pi)
    val = greens.mh_neumann_value(x, xi, KAPPA, DOM200)
    # image corrections at this geometry are small but not negligible
    assert abs(val - free) < 1e-2
    assert val < 0


def test_truncation_doubling_is_inert():
    x = (100.0, 100.0)
    xi = (50.0, 50.0)
    v25 = greens.mh_neumann_value(x, xi, KAPPA, DOM200, greens.ImageTruncation(25))
    v50 = greens.mh_neumann_value(x, xi, KAPPA, DOM200, greens.ImageTruncation(50))
    assert abs(v25 - v50) < 1e-12


@settings(max_examples=20, deadline=None)
@given(st.floats(10.0, 190.0), st.floats(10.0, 190.0),
       st.floats(10.0, 190.0), st.floats(10.0, 190.0))
def test_value_symmetry_in_arguments(x0, y0, x1, y1):
    if np.hypot(x0 - x1, y0 - y1) < 1.0:
        return
    a = greens.mh_neumann_value((x0, y0), (x1, y1), KAPPA, DOM200)
    b = greens.mh_neumann_value((x1, y1), (x0, y0), KAPPA, DOM200)
    assert abs(a - b) < 1e-13
    ad = greens.mh_dirichlet_value((x0, y0), (x1, y1), KAPPA, DOM200)
    bd = greens.mh_dirichlet_value((x1, y1), (x0, y0), KAPPA, DOM200)
    assert abs(ad - bd) < 1e-13


def test_free_space_limit_as_domain_grows():
    from scipy.special import k0
    big = RectDomain(1e4, 1e4)
    x = (5000.0, 5000.0)
    xi = (5030.0, 4960.0)
    r = np.hypot(30.0, 40.0)
    val = greens.mh_neumann_value(x, xi, KAPPA, big)
    assert abs(val - (-k0(KAPPA * r) / (2 * np.pi))) < 1e-12


def test_reg_value_coincidence_matches_small_argument_expansion():
    big = RectDomain(1e5, 1e5)
    x = (5e4, 5e4)
    got = greens.mh_neumann_reg(x, x, KAPPA, big).value
    assert abs(got - k0_small_argument_reg(KAPPA)) < 1e-10


def test_reg_grad_zero_at_center_by_symmetry():
    g = greens.mh_neumann_reg((100.0, 100.0), (100.0, 100.0), KAPPA, DOM200).grad
    assert np.allclose(g, 0.0, atol=1e-12)


def test_reg_grad_matches_finite_differences():
    xi = np.array([150.0, 100.0])

    def val(p):
        return greens.mh_neumann_reg(p, xi, KAPPA, DOM200).value

    got = greens.mh_neumann_reg(xi + [7.0, -4.0], xi, KAPPA, DOM200).grad
    ref = fd_gradient(val, xi + [7.0, -4.0])
    assert np.linalg.norm(got - ref) / np.linalg.norm(ref) < 1e-6


def test_self_reg_grad_matches_approach_limit():
    # gradient of the regular part as the source approaches the field point
    # from four directions; all limits agree with the coincidence formula
    x = np.array([150.0, 100.0])
    got = greens.mh_reg_grad_at_self(x, KAPPA, DOM200)
    approached = []
    for d in ([1, 0], [0, 1], [-1, 0], [0, -1]):
        vals = []
        for h in (1e-3, 5e-4):
            g = greens.mh_neumann_reg(x, x + h * np.array(d, float), KAPPA, DOM200).grad
            vals.append(g)
        approached.append(2 * vals[1] - vals[0])  # Richardson in h
    spread = np.max([np.linalg.norm(a - got) for a in approached])
    assert spread < 1e-6


def test_dirichlet_magnitude_below_neumann():
    # Dirichlet images subtract, so the (negative) value is smaller in
    # magnitude than the all-additive Neumann one
    x = (100.0, 100.0)
    xi = (120.0, 90.0)
    vn = greens.mh_neumann_value(x, xi, KAPPA, DOM200)
    vd = greens.mh_dirichlet_value(x, xi, KAPPA, DOM200)
    assert vn < vd < 0
    assert abs(vd) < abs(vn)


def test_dirichlet_wall_values_vanish():
    xi = (70.0, 120.0)
    for i in range(20):
        s = (i + 0.5) / 20
        for wall_pt in ((0.0, 200 * s), (200.0, 200 * s), (200 * s, 0.0), (200 * s, 200.0)):
            v = greens.mh_dirichlet_value(wall_pt, xi, KAPPA, DOM200)
            assert abs(v) < 1e-12


def test_dirichlet_reg_grad_zero_at_center():
    g = greens.mh_reg_grad_at_self((100.0, 100.0), KAPPA, DOM200, bc="dirichlet")
    assert np.allclose(g, 0.0, atol=1e-12)


def test_neumann_wall_normal_gradient_vanishes():
    xi = (70.0, 120.0)
    for i in range(20):
        s = 200 * (i + 0.5) / 20
        gx = greens.mh_neumann_grad((0.0, s), xi, KAPPA, DOM200)
        assert abs(gx[0]) < 1e-12
        gy = greens.mh_neumann_grad((s, 200.0), xi, KAPPA, DOM200)
        assert abs(gy[1]) < 1e-12


def test_screened_pde_residual_5pt():
    # (lap - kappa^2) G = 0 away from the source, to discretization accuracy
    xi = (70.0, 120.0)

    def val(p):
        return greens.mh_neumann_value(p, xi, KAPPA, DOM200)

    rng = np.random.default_rng(7)
    for _ in range(5):
        p = rng.uniform(10, 190, 2)
        if np.hypot(*(p - np.array(xi))) < 5:
            continue
        h = 0.05
        res = fd_laplacian_5pt(val, p, h) - KAPPA**2 * val(p)
        assert abs(res) < 1e-4 * KAPPA**2


def test_coincidence_raises_outside_reg():
    with pytest.raises(sw.GreensError):
        greens.mh_neumann_value((100.0, 100.0), (100.0, 100.0), KAPPA, DOM200)
    with pytest.raises(sw.GreensError):
        greens.mh_neumann_value((100.0, 100.0), (50.0, 50.0), 0.0, DOM200)


def test_self_grads_bundle_matches_singles():
    x = (130.0, 80.0)
    gn, gd = greens.mh_self_grads(x, KAPPA, DOM200)
    assert np.allclose(gn, greens.mh_reg_grad_at_self(x, KAPPA, DOM200, bc="neumann"),
                       atol=1e-15)
    assert np.allclose(gd, greens.mh_reg_grad_at_self(x, KAPPA, DOM200, bc="dirichlet"),
                       atol=1e-15)


def test_pair_grads_bundle_matches_singles():
    x, xi = (130.0, 80.0), (60.0, 140.0)
    gn, gd = greens.mh_pair_grads(x, xi, KAPPA, DOM200)
    assert np.allclose(gn, greens.mh_neumann_grad(x, xi, KAPPA, DOM200), atol=1e-15)
    assert np.allclose(gd, greens.mh_dirichlet_grad(x, xi, KAPPA, DOM200), atol=1e-15)


# ---------------------------------------------------------------------------
# Laplace kernel closed forms
# ---------------------------------------------------------------------------

def test_vx_against_raw_window_sum():
    # the raw symmetric-window sum carries the uniform background gradient
    # dx/(8 lx ly) on top of the closed form (see oracles)
    lx = ly = 2.0
    dom = RectDomain(lx, ly)
    dx, dy = 0.6, -0.35
    bx, by = brute_v_component(dx, dy, lx, ly, half=2000)
    cx = greens.laplace_vx((dx, dy), (0.0, 0.0), dom)
    cy = greens.laplace_vy((dx, dy), (0.0, 0.0), dom)
    assert abs(bx - dx / (8 * lx * ly) - cx) < 1e-6
    assert abs(by - dy / (8 * lx * ly) - cy) < 1e-6


@settings(max_examples=20, deadline=None)
@given(st.floats(-150.0, 150.0), st.floats(-150.0, 150.0))
def test_vx_antisymmetric_in_dx(dx, dy):
    if abs(dx) < 1e-3 or min(abs(dy), abs(dy - 200), abs(dy + 200)) < 1e-3:
        return
    dom = DOM200
    a = greens.laplace_vx((dx, dy), (0.0, 0.0), dom)
    b = greens.laplace_vx((-dx, dy), (0.0, 0.0), dom)
    assert a == pytest.approx(-b, abs=1e-14)


@settings(max_examples=20, deadline=None)
@given(st.floats(-150.0, 150.0), st.floats(-150.0, 150.0))
def test_vx_periodic_in_dx(dx, dy):
    if min(abs(dy), abs(dy - 200), abs(dy + 200)) < 1e-3:
        return
    dom = DOM200
    a = greens.laplace_vx((dx, dy), (0.0, 0.0), dom)
    b = greens.laplace_vx((dx + 2 * dom.lx, dy), (0.0, 0.0), dom)
    # equality up to trig roundoff of the shifted argument
    assert a == pytest.approx(b, rel=1e-9, abs=1e-10)


@pytest.mark.parametrize("lx,ly", [(2.0, 2.0), (200.0, 200.0)])
def test_laplace_assemblies_match_brute_force(lx, ly):
    dom = RectDomain(lx, ly)
    rng = np.random.default_rng(3)
    for _ in range(3):
        x = rng.uniform(0.15 * lx, 0.85 * lx, 2)
        xi = rng.uniform(0.15 * lx, 0.85 * lx, 2)
        if np.hypot(*(x - xi)) < 0.05 * lx:
            continue
        bn = brute_laplace_assembly(x, xi, lx, ly, (1, 1, 1, 1), half=800)
        bd = brute_laplace_assembly(x, xi, lx, ly, (1, -1, -1, 1), half=800)
        gn = greens.laplace_neumann_grad(x, xi, dom)
        gd = greens.laplace_dirichlet_grad(x, xi, dom)
        assert np.max(np.abs(gn - bn)) < 1e-6
        assert np.max(np.abs(gd - bd)) < 1e-6


def test_square_2x2_specific_point():
    dom = RectDomain(2.0, 2.0)
    x, xi = (1.3, 1.0), (0.7, 1.0)
    gn = greens.laplace_neumann_grad(x, xi, dom)
    gd = greens.laplace_dirichlet_grad(x, xi, dom)
    bn = brute_laplace_assembly(x, xi, 2.0, 2.0, (1, 1, 1, 1), half=2000)
    bd = brute_laplace_assembly(x, xi, 2.0, 2.0, (1, -1, -1, 1), half=2000)
    assert np.max(np.abs(gn - bn)) < 1e-8
    assert np.max(np.abs(gd - bd)) < 1e-8
    assert np.all(np.isfinite(gn)) and np.all(np.isfinite(gd))


def test_neumann_normal_component_vanishes_at_wall():
    dom = DOM200
    xi = (60.0, 140.0)
    for s in (30.0, 100.0, 170.0):
        g = greens.laplace_neumann_grad((0.0, s), xi, dom)
        assert abs(g[0]) < 1e-12
        g = greens.laplace_neumann_grad((s, 0.0), xi, dom)
        assert abs(g[1]) < 1e-12


def test_dirichlet_wall_line_integral_vanishes():
    # the wall value is identically zero, so the tangential line integral of
    # the gradient along a wall segment must vanish
    dom = DOM200
    xi = (60.0, 140.0)
    ss = np.linspace(20.0, 180.0, 161)
    gt = [greens.laplace_dirichlet_grad((0.0, s), xi, dom)[1] for s in ss]
    integral = np.trapezoid(gt, ss)
    assert abs(integral) < 1e-10


def test_laplace_self_reg_center_zero():
    for dom in (DOM200, RectDomain(120.0, 80.0)):
        g = greens.laplace_reg_grad_at_self((dom.lx / 2, dom.ly / 2), dom)
        assert np.allclose(g, 0.0, atol=1e-14)
        g = greens.laplace_reg_grad_at_self((dom.lx / 2, dom.ly / 2), dom, bc="dirichlet")
        assert np.allclose(g, 0.0, atol=1e-14)


def test_laplace_self_reg_matches_approach_limit():
    # compare the reflected-family formula against the limit of
    # grad[G(x; xi) - log|x - xi|/(2 pi)] as xi -> x from four directions
    dom = DOM200
    x = np.array([150.0, 100.0])
    got = greens.laplace_reg_grad_at_self(x, dom)
    for d in ([1, 0], [0, 1], [-1, 0], [0, -1]):
        vals = []
        for h in (1e-3, 5e-4):
            xi = x + h * np.array(d, float)
            g = greens.laplace_neumann_grad(x, xi, dom)
            dxv = x - xi
            r2 = dxv @ dxv
            g = g - dxv / (2 * np.pi * r2)
            vals.append(g)
        lim = 2 * vals[1] - vals[0]
        assert np.linalg.norm(lim - got) < 1e-6


def test_dirichlet_self_grad_points_to_near_wall():
    g = greens.laplace_reg_grad_at_self((5.0, 100.0), DOM200, bc="dirichlet")
    assert g[0] < 0  # toward the x = 0 wall


def test_self_reg_on_wall_raises():
    with pytest.raises(sw.GreensError):
        greens.laplace_reg_grad_at_self((0.0, 100.0), DOM200)


def test_truncation_validation():
    with pytest.raises(sw.ValidationError):
        greens.ImageTruncation(0)
    with pytest.raises(sw.ValidationError):
        greens.ImageTruncation(10, -1.0)
