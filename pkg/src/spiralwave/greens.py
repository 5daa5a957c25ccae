"""Method-of-images Green's functions on a rectangle with Neumann walls.

Two operator families are provided, each with Neumann and Dirichlet wall
conditions:

* screened (modified Helmholtz) kernel with coefficient kappa > 0: values,
  gradients and regular parts built from exponentially convergent sums of
  K0/K1 Bessel terms over the reflected image lattice;
* Laplace kernel: only *gradients* are exposed, via the exponentially
  convergent single-sum closed forms of the doubly periodic image sums
  (the image sums for the Laplace values themselves do not converge).

Conventions: the field point is always the first argument and gradients are
taken with respect to it.  The reflected image families of a source (xi, eta)
carry offsets (x-xi, y-eta), (x+xi, y-eta), (x-xi, y+eta), (x+xi, y+eta);
Neumann combines them with signs (+,+,+,+) and Dirichlet with (+,-,-,+).
All kernels carry the 2D free-space normalization -1/(2 pi) (log |x| / (2 pi)
for Laplace), so screened values are negative.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import k0 as _bessel_k0, k1 as _bessel_k1

from .errors import GreensError, ValidationError
from .geometry import RectDomain

EULER_GAMMA = np.euler_gamma

_NEUMANN_SIGNS = (1.0, 1.0, 1.0, 1.0)
_DIRICHLET_SIGNS = (1.0, -1.0, -1.0, 1.0)

# lattice half-width safety cap; beyond this kappa is too small for the
# screened image sum to be practical
_MAX_HALF_WIDTH = 4000

# treat |x - xi| below this as an exact coincidence evaluation
_COINCIDENCE_TOL = 1e-9


@dataclass(frozen=True)
class ImageTruncation:
    """Image-lattice truncation control.

    m_max is a floor on the lattice half-width; the actual half-width is
    enlarged adaptively so the neglected tail is below tol (the summands
    decay exponentially in both sums).
    """

    m_max: int = 30
    tol: float = 1e-12

    def __post_init__(self):
        if self.m_max < 1:
            raise ValidationError("m_max must be >= 1")
        if not self.tol > 0:
            raise ValidationError("tol must be positive")


DEFAULT_TRUNC = ImageTruncation(30, 1e-12)
DEFAULT_TRUNC_LAPLACE = ImageTruncation(12, 1e-12)


@dataclass(frozen=True)
class GreensEval:
    """Value and first-argument gradient of a Green's function term."""

    value: float | None
    grad: np.ndarray


def _family_offsets(x, xi):
    px, py = float(x[0]), float(x[1])
    sx, sy = float(xi[0]), float(xi[1])
    return ((px - sx, py - sy), (px + sx, py - sy),
            (px - sx, py + sy), (px + sx, py + sy))


def _zcut(tol: float) -> float:
    return max(10.0, -np.log(tol) + 10.0)


def _half_widths(kappa, dx0, dy0, dom, trunc):
    zc = _zcut(trunc.tol)
    hx = int(np.ceil((zc / kappa + abs(dx0)) / (2 * dom.lx))) + 1
    hy = int(np.ceil((zc / kappa + abs(dy0)) / (2 * dom.ly))) + 1
    hx = max(hx, min(trunc.m_max, _MAX_HALF_WIDTH))
    hy = max(hy, min(trunc.m_max, _MAX_HALF_WIDTH))
    if max(hx, hy) > _MAX_HALF_WIDTH:
        raise GreensError(
            f"screened image sum needs half-width {max(hx, hy)} > {_MAX_HALF_WIDTH}; "
            f"kappa = {kappa:.3e} is too small for this domain")
    return hx, hy


def _fam_arrays(dx0, dy0, dom, hx, hy):
    ax = dx0 + 2 * dom.lx * np.arange(-hx, hx + 1)
    ay = dy0 + 2 * dom.ly * np.arange(-hy, hy + 1)
    return ax, ay


def _check_kappa(kappa):
    if not kappa > 0:
        raise GreensError("screened kernel needs kappa > 0 "
                          "(Laplace values diverge; use the gradient forms)")


def _fam_value(dx0, dy0, kappa, dom, trunc, skip_principal=False):
    hx, hy = _half_widths(kappa, dx0, dy0, dom, trunc)
    ax, ay = _fam_arrays(dx0, dy0, dom, hx, hy)
    R = np.hypot(ax[:, None], ay[None, :])
    if skip_principal:
        R[hx, hy] = np.inf
    elif not R.min() > _COINCIDENCE_TOL:
        raise GreensError("field point coincides with a source image")
    return float(_bessel_k0(kappa * R).sum())


def _fam_grad(dx0, dy0, kappa, dom, trunc, skip_principal=False):
    """Sum of kappa K1(kappa R) (ax, ay)/R over the family lattice.

    This is the gradient (w.r.t. the field point) of -sum K0; assemble
    G-gradients as +sign/(2 pi) times this.
    """
    hx, hy = _half_widths(kappa, dx0, dy0, dom, trunc)
    ax, ay = _fam_arrays(dx0, dy0, dom, hx, hy)
    AX = np.broadcast_to(ax[:, None], (ax.size, ay.size))
    AY = np.broadcast_to(ay[None, :], (ax.size, ay.size))
    R = np.hypot(AX, AY)
    if skip_principal:
        R = R.copy()
        R[hx, hy] = np.inf
    elif not R.min() > _COINCIDENCE_TOL:
        raise GreensError("field point coincides with a source image")
    W = kappa * _bessel_k1(kappa * R) / R
    return np.array([(W * AX).sum(), (W * AY).sum()])


def _k0_plus_log(z):
    """K0(z) + log(z/2) + gamma, the regular part of K0 (O(z^2 log z))."""
    return _bessel_k0(z) + np.log(0.5 * z) + EULER_GAMMA


def _zk1_minus_one(z):
    """z K1(z) - 1, the regular factor of the K0 gradient (O(z^2 log z))."""
    if z < 1e-7:
        return 0.5 * z * z * (np.log(0.5 * z) + EULER_GAMMA - 0.5)
    return z * _bessel_k1(z) - 1.0


def _screened_eval(x, xi, kappa, dom, trunc, signs, want_value, want_grad,
                   regular):
    """Shared assembly for screened values / gradients / regular parts."""
    _check_kappa(kappa)
    trunc = trunc or DEFAULT_TRUNC
    fams = _family_offsets(x, xi)
    dxp, dyp = fams[0]
    rp = np.hypot(dxp, dyp)
    coincident = rp <= _COINCIDENCE_TOL

    value = 0.0 if want_value else None
    grad = np.zeros(2) if want_grad else None

    for sign, (dx0, dy0), principal in zip(signs, fams, (True, False, False, False)):
        skip = principal and (regular or coincident)
        if want_value:
            value += -sign / (2 * np.pi) * _fam_value(dx0, dy0, kappa, dom, trunc,
                                                      skip_principal=skip)
        if want_grad:
            grad += sign / (2 * np.pi) * _fam_grad(dx0, dy0, kappa, dom, trunc,
                                                   skip_principal=skip)

    if regular:
        # principal image handled analytically: K0 + log and its gradient
        if coincident:
            if want_value:
                value += (np.log(0.5 * kappa) + EULER_GAMMA) / (2 * np.pi)
            # gradient of the regularized principal term vanishes at coincidence
        else:
            z = kappa * rp
            if want_value:
                value += (np.log(0.5 * kappa) + EULER_GAMMA - _k0_plus_log(z)) / (2 * np.pi)
            if want_grad:
                grad += _zk1_minus_one(z) / (2 * np.pi * rp * rp) * np.array([dxp, dyp])
    elif coincident:
        raise GreensError("value/gradient singular at coincidence; "
                          "use the regular-part evaluators")
    return value, grad


def mh_neumann_value(x, xi, kappa, dom: RectDomain, trunc: ImageTruncation | None = None) -> float:
    """Screened Neumann Green's function value (negative away from sources)."""
    v, _ = _screened_eval(x, xi, kappa, dom, trunc, _NEUMANN_SIGNS,
                          True, False, regular=False)
    return v


def mh_neumann_grad(x, xi, kappa, dom: RectDomain, trunc: ImageTruncation | None = None):
    _, g = _screened_eval(x, xi, kappa, dom, trunc, _NEUMANN_SIGNS,
                          False, True, regular=False)
    return g


def mh_neumann_reg(x, xi, kappa, dom: RectDomain, trunc: ImageTruncation | None = None) -> GreensEval:
    """Regular part (log singularity removed); valid at coincidence x == xi."""
    v, g = _screened_eval(x, xi, kappa, dom, trunc, _NEUMANN_SIGNS,
                          True, True, regular=True)
    return GreensEval(value=v, grad=g)


def mh_dirichlet_value(x, xi, kappa, dom: RectDomain, trunc: ImageTruncation | None = None) -> float:
    v, _ = _screened_eval(x, xi, kappa, dom, trunc, _DIRICHLET_SIGNS,
                          True, False, regular=False)
    return v


def mh_dirichlet_grad(x, xi, kappa, dom: RectDomain, trunc: ImageTruncation | None = None):
    _, g = _screened_eval(x, xi, kappa, dom, trunc, _DIRICHLET_SIGNS,
                          False, True, regular=False)
    return g


def mh_dirichlet_reg(x, xi, kappa, dom: RectDomain, trunc: ImageTruncation | None = None) -> GreensEval:
    v, g = _screened_eval(x, xi, kappa, dom, trunc, _DIRICHLET_SIGNS,
                          True, True, regular=True)
    return GreensEval(value=v, grad=g)


def mh_reg_grad_at_self(x, kappa, dom: RectDomain, trunc: ImageTruncation | None = None,
                        bc: str = "neumann"):
    """Coincidence-limit gradient of the regular part at x.

    The principal family drops out exactly (the (n,m) and (-n,-m) translated
    images cancel pairwise and the regularized principal term has zero
    gradient in the limit), leaving the three reflected families.
    """
    signs = _NEUMANN_SIGNS if bc == "neumann" else _DIRICHLET_SIGNS
    _, g = _screened_eval(x, x, kappa, dom, trunc, signs, False, True, regular=True)
    return g


def mh_self_grads(x, kappa, dom: RectDomain, trunc: ImageTruncation | None = None):
    """(Neumann, Dirichlet) regular-part self gradients sharing family sums."""
    _check_kappa(kappa)
    trunc = trunc or DEFAULT_TRUNC
    px, py = float(x[0]), float(x[1])
    fams = ((2 * px, 0.0), (0.0, 2 * py), (2 * px, 2 * py))
    sums = [_fam_grad(dx0, dy0, kappa, dom, trunc) for dx0, dy0 in fams]
    gn = (sums[0] + sums[1] + sums[2]) / (2 * np.pi)
    gd = (-sums[0] - sums[1] + sums[2]) / (2 * np.pi)
    return gn, gd


def mh_pair_grads(x, xi, kappa, dom: RectDomain, trunc: ImageTruncation | None = None):
    """(Neumann, Dirichlet) full gradients at x for a distinct source xi."""
    _check_kappa(kappa)
    trunc = trunc or DEFAULT_TRUNC
    sums = [_fam_grad(dx0, dy0, kappa, dom, trunc) for dx0, dy0 in _family_offsets(x, xi)]
    gn = (sums[0] + sums[1] + sums[2] + sums[3]) / (2 * np.pi)
    gd = (sums[0] - sums[1] - sums[2] + sums[3]) / (2 * np.pi)
    return gn, gd


# ---------------------------------------------------------------------------
# Laplace kernel: exponentially convergent closed forms for the image-sum
# gradients.  laplace_vx is the doubly infinite sum
#     (1/2pi) sum_{n,m} (dx + 2 lx n) / ((dx + 2 lx n)^2 + (dy + 2 ly m)^2)
# with the x-direction summed in closed form (which fixes the uniform
# compensating background required by a Neumann-compatible source).
# ---------------------------------------------------------------------------

def _laplace_m_half(dy0, dom_long, dom_sum, trunc):
    # terms decay like exp(-pi * |dy0 + 2 L m| / L_long)
    zc = _zcut(trunc.tol)
    h = int(np.ceil((zc * dom_long / np.pi + abs(dy0)) / (2 * dom_sum))) + 1
    return max(h, trunc.m_max)


def _v_closed(dx0, dy0, lsum_dir, lsum_perp, trunc):
    """Closed-form V for offset (dx0, dy0): lsum_dir is the period of the
    direction summed in closed form (appears inside sin/cos), lsum_perp the
    period of the remaining explicit sum."""
    h = _laplace_m_half(dy0, lsum_dir, lsum_perp, trunc)
    m = np.arange(-h, h + 1)
    a = np.pi * (dy0 + 2 * lsum_perp * m) / lsum_dir
    b = np.pi * dx0 / lsum_dir
    sb = np.sin(b)
    out = np.empty_like(a)
    big = np.abs(a) > 35.0
    small = ~big
    # cosh(a) - cos(b) via the cancellation-free identity
    den = 2.0 * (np.sinh(0.5 * a[small]) ** 2 + np.sin(0.5 * b) ** 2)
    if np.any(den < 1e-280):
        raise GreensError("Laplace image-sum coincidence (field point on image lattice)")
    out[small] = sb / (4 * lsum_dir * den)
    out[big] = sb * np.exp(-np.abs(a[big])) / (2 * lsum_dir)
    return float(out.sum())


def laplace_vx(x, seed, dom: RectDomain, trunc: ImageTruncation | None = None) -> float:
    """x-component image sum for a signed source seed (xi, eta)."""
    trunc = trunc or DEFAULT_TRUNC_LAPLACE
    dx0 = float(x[0]) - float(seed[0])
    dy0 = float(x[1]) - float(seed[1])
    return _v_closed(dx0, dy0, dom.lx, dom.ly, trunc)


def laplace_vy(x, seed, dom: RectDomain, trunc: ImageTruncation | None = None) -> float:
    """y-component image sum for a signed source seed (xi, eta)."""
    trunc = trunc or DEFAULT_TRUNC_LAPLACE
    dx0 = float(x[0]) - float(seed[0])
    dy0 = float(x[1]) - float(seed[1])
    return _v_closed(dy0, dx0, dom.ly, dom.lx, trunc)


def _laplace_assembly(x, xi, dom, trunc, signs, skip_principal=False):
    trunc = trunc or DEFAULT_TRUNC_LAPLACE
    sx, sy = float(xi[0]), float(xi[1])
    seeds = ((sx, sy), (-sx, sy), (sx, -sy), (-sx, -sy))
    g = np.zeros(2)
    for sign, seed, principal in zip(signs, seeds, (True, False, False, False)):
        if principal and skip_principal:
            continue
        g[0] += sign * laplace_vx(x, seed, dom, trunc)
        g[1] += sign * laplace_vy(x, seed, dom, trunc)
    return g


def laplace_neumann_grad(x, xi, dom: RectDomain, trunc: ImageTruncation | None = None):
    """Gradient of the Neumann Laplace Green's function (area-compensated)."""
    return _laplace_assembly(x, xi, dom, trunc, _NEUMANN_SIGNS)


def laplace_dirichlet_grad(x, xi, dom: RectDomain, trunc: ImageTruncation | None = None):
    return _laplace_assembly(x, xi, dom, trunc, _DIRICHLET_SIGNS)


def laplace_pair_grads(x, xi, dom: RectDomain, trunc: ImageTruncation | None = None):
    """(Neumann, Dirichlet) Laplace gradients sharing the four family sums."""
    trunc = trunc or DEFAULT_TRUNC_LAPLACE
    sx, sy = float(xi[0]), float(xi[1])
    seeds = ((sx, sy), (-sx, sy), (sx, -sy), (-sx, -sy))
    vs = [np.array([laplace_vx(x, s, dom, trunc), laplace_vy(x, s, dom, trunc)])
          for s in seeds]
    gn = vs[0] + vs[1] + vs[2] + vs[3]
    gd = vs[0] - vs[1] - vs[2] + vs[3]
    return gn, gd


def laplace_reg_grad_at_self(x, dom: RectDomain, trunc: ImageTruncation | None = None,
                             bc: str = "neumann"):
    """Coincidence-limit gradient of the Laplace regular part at x.

    The principal family's translated images cancel pairwise, so only the
    three reflected families contribute.
    """
    if dom.wall_distance(x) <= _COINCIDENCE_TOL:
        raise GreensError("self-gradient undefined on a wall (reflected image coincidence)")
    signs = (_NEUMANN_SIGNS if bc == "neumann" else _DIRICHLET_SIGNS)[1:]
    trunc = trunc or DEFAULT_TRUNC_LAPLACE
    sx, sy = float(x[0]), float(x[1])
    seeds = ((-sx, sy), (sx, -sy), (-sx, -sy))
    g = np.zeros(2)
    for sign, seed in zip(signs, seeds):
        g[0] += sign * laplace_vx(x, seed, dom, trunc)
        g[1] += sign * laplace_vy(x, seed, dom, trunc)
    return g


def laplace_self_grads(x, dom: RectDomain, trunc: ImageTruncation | None = None):
    """(Neumann, Dirichlet) regular-part self gradients sharing family sums."""
    if dom.wall_distance(x) <= _COINCIDENCE_TOL:
        raise GreensError("self-gradient undefined on a wall (reflected image coincidence)")
    trunc = trunc or DEFAULT_TRUNC_LAPLACE
    sx, sy = float(x[0]), float(x[1])
    seeds = ((-sx, sy), (sx, -sy), (-sx, -sy))
    vs = [np.array([laplace_vx(x, s, dom, trunc), laplace_vy(x, s, dom, trunc)])
          for s in seeds]
    gn = vs[0] + vs[1] + vs[2]
    gd = -vs[0] - vs[1] + vs[2]
    return gn, gd
