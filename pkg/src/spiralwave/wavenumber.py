"""Wavenumber selection for multi-defect patterns in a rectangle.

Three routes to the global wavenumber k:

* far-field eigenproblem: k is the smallest positive root of det M(k) = 0
  with all-positive weights, where M couples the defects through the
  screened Neumann Green's function at kappa = q k;
* near-field closed form: k^2 = 2 pi N tan(q log(1/eps)) / (q |Omega|);
* uniform composite blending the two, regular through
  q log(1/eps) = pi/2 where the near-field form blows up.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import svd
from scipy.optimize import brentq

from . import greens
from .errors import ValidationError, WavenumberError
from .geometry import RectDomain, Spiral

# asymptotics break down within a few core radii of a wall or of another
# defect; configurations tighter than this are refused
WALL_MARGIN = 3.0
PAIR_MARGIN = 2.0


@dataclass(frozen=True)
class SpiralConfig:
    """Defect arrangement plus the two scalars the eigenproblem needs."""

    spirals: tuple[Spiral, ...]
    q: float
    dom: RectDomain
    c1: float

    def __post_init__(self):
        if not self.spirals:
            raise ValidationError("need at least one spiral")
        if not (0 < self.q < 1):
            raise ValidationError(f"q must lie in (0, 1), got {self.q}")
        if not np.isfinite(self.c1):
            raise ValidationError("c1 must be finite (solve the core profile first)")
        for s in self.spirals:
            if self.dom.wall_distance((s.x, s.y)) < WALL_MARGIN:
                raise ValidationError(
                    f"spiral at ({s.x}, {s.y}) is within {WALL_MARGIN} core radii of a wall")
        pos = self.positions
        for i in range(len(pos)):
            for j in range(i + 1, len(pos)):
                if np.hypot(*(pos[i] - pos[j])) <= PAIR_MARGIN:
                    raise ValidationError(f"spirals {i} and {j} closer than {PAIR_MARGIN}")

    @property
    def positions(self) -> np.ndarray:
        return np.array([[s.x, s.y] for s in self.spirals])

    @property
    def windings(self) -> np.ndarray:
        return np.array([s.winding for s in self.spirals])

    @property
    def n_spirals(self) -> int:
        return len(self.spirals)

    def with_positions(self, pos) -> "SpiralConfig":
        spirals = tuple(Spiral(float(p[0]), float(p[1]), s.winding)
                        for p, s in zip(pos, self.spirals))
        return SpiralConfig(spirals, self.q, self.dom, self.c1)


@dataclass(frozen=True)
class WavenumberSolution:
    """Root of the wavenumber eigenproblem with its weight vector.

    beta is normalized to max |beta| = 1 with beta[0] > 0; residual is
    |det M| / prod row norms at the root.  roots lists every bracketed root
    of the scan (smallest first) so multiplicity is visible.
    """

    k: float
    beta: np.ndarray
    regime: str
    residual: float
    roots: tuple[float, ...] = field(default_factory=tuple)


def beta_matrix(cfg: SpiralConfig, k: float,
                trunc: greens.ImageTruncation | None = None) -> np.ndarray:
    """Weight-system matrix M(k): diagonal 2 pi G_reg(x_l; x_l) - (c1 - pi/(2 q)),
    off-diagonal 2 pi G(x_l; x_j), all at kappa = q k."""
    if not k > 0:
        raise ValidationError("k must be positive")
    kappa = cfg.q * k
    pos = cfg.positions
    n = cfg.n_spirals
    shift = cfg.c1 - np.pi / (2 * cfg.q)
    M = np.empty((n, n))
    for ell in range(n):
        reg = greens.mh_neumann_reg(pos[ell], pos[ell], kappa, cfg.dom, trunc)
        M[ell, ell] = 2 * np.pi * reg.value - shift
        for j in range(n):
            if j != ell:
                M[ell, j] = 2 * np.pi * greens.mh_neumann_value(
                    pos[ell], pos[j], kappa, cfg.dom, trunc)
    return M


def _scaled_det(M: np.ndarray, floor: float) -> float:
    # row norms floored at the natural diagonal scale |c1 - pi/(2q)| so the
    # scaled determinant still vanishes at the root (a 1x1 system's only row
    # norm would otherwise be the vanishing entry itself)
    norms = np.maximum(np.linalg.norm(M, axis=1), floor)
    return float(np.linalg.det(M / norms[:, None]))


def _null_vector(M: np.ndarray):
    _, s, vt = svd(M)
    beta = vt[-1]
    degenerate = len(s) > 1 and s[-2] < 1e-8 * max(s[0], 1.0)
    imax = np.argmax(np.abs(beta))
    beta = beta / beta[imax] if beta[imax] != 0 else beta
    if beta[0] < 0:
        beta = -beta
    return beta, degenerate


def _k_scan_floor(cfg: SpiralConfig) -> float:
    """Lower end of the root scan: a fixed fraction of the smallest scale any
    root can live at (set by the area term of the screened Green's function)."""
    denom = max(np.pi / (2 * cfg.q) - cfg.c1, 1.0)
    return 0.2 * np.sqrt(2 * np.pi / (cfg.q * cfg.dom.area * denom))


def solve_canonical(cfg: SpiralConfig,
                    trunc: greens.ImageTruncation | None = None,
                    k_lo: float | None = None,
                    k_hi: float | None = None,
                    n_scan: int = 400,
                    warm_start: float | None = None) -> WavenumberSolution:
    """Find k and the weights beta for the far-field eigenproblem.

    Scans det M(k) on a log grid over [k_lo, k_hi], refines every sign
    change, and returns the smallest root whose null vector has
    single-signed weights (required for a positive phase envelope); if no
    root qualifies, the smallest root is returned.  warm_start skips the
    scan by bracketing around a previous nearby root.
    """
    floor = abs(cfg.c1 - np.pi / (2 * cfg.q))
    f = lambda k: _scaled_det(beta_matrix(cfg, k, trunc), floor)

    if warm_start is not None and warm_start > 0:
        root = _refine_near(f, warm_start)
        if root is not None:
            return _solution_at(cfg, root, (root,), trunc, floor)

    lo = k_lo if k_lo is not None else _k_scan_floor(cfg)
    hi = k_hi if k_hi is not None else 2.0 / cfg.q
    if not 0 < lo < hi:
        raise ValidationError(f"bad scan window [{lo}, {hi}]")

    ks = np.geomspace(lo, hi, n_scan)
    vals = np.array([f(k) for k in ks])
    roots = []
    for i in range(len(ks) - 1):
        if vals[i] == 0.0:
            roots.append(ks[i])
        elif vals[i] * vals[i + 1] < 0:
            roots.append(brentq(f, ks[i], ks[i + 1], rtol=8.9e-16, maxiter=200))
    if not roots:
        raise WavenumberError(
            f"no sign change of det M on [{lo:.3e}, {hi:.3e}]; "
            f"det range [{vals.min():.3e}, {vals.max():.3e}]")

    chosen = None
    for r in roots:
        beta, degenerate = _null_vector(beta_matrix(cfg, r, trunc))
        if degenerate:
            continue
        if np.all(beta > -1e-8):
            chosen = r
            break
    if chosen is None:
        chosen = roots[0]
    return _solution_at(cfg, chosen, tuple(roots), trunc, floor)


def _refine_near(f, k_prev: float):
    """Bracket and refine a root near k_prev; None if no nearby sign change."""
    a, b = 0.97 * k_prev, 1.03 * k_prev
    fa, fb = f(a), f(b)
    for _ in range(40):
        if fa * fb <= 0:
            return brentq(f, a, b, rtol=8.9e-16, maxiter=200)
        if abs(fa) < abs(fb):
            a *= 0.9
            fa = f(a)
        else:
            b *= 1.1
            fb = f(b)
    return None


def _solution_at(cfg, k_root, roots, trunc, floor) -> WavenumberSolution:
    M = beta_matrix(cfg, k_root, trunc)
    beta, degenerate = _null_vector(M)
    if degenerate:
        raise WavenumberError(f"null space at k = {k_root:.6g} has dimension > 1")
    residual = abs(_scaled_det(M, floor))
    if residual > 1e-10:
        raise WavenumberError(f"root refinement left residual {residual:.3e} at k = {k_root:.6g}")
    return WavenumberSolution(k=float(k_root), beta=beta, regime="canonical",
                              residual=residual, roots=tuple(sorted(roots)))


def two_spiral_k_residual(cfg: SpiralConfig, k: float,
                          trunc: greens.ImageTruncation | None = None) -> float:
    """Closed-form 2x2 determinant condition; vanishes at the solved k."""
    if cfg.n_spirals != 2:
        raise ValidationError("two_spiral_k_residual needs exactly two spirals")
    kappa = cfg.q * k
    pos = cfg.positions
    shift = cfg.c1 - np.pi / (2 * cfg.q)
    d1 = -2 * np.pi * greens.mh_neumann_reg(pos[0], pos[0], kappa, cfg.dom, trunc).value + shift
    d2 = -2 * np.pi * greens.mh_neumann_reg(pos[1], pos[1], kappa, cfg.dom, trunc).value + shift
    g12 = 2 * np.pi * greens.mh_neumann_value(pos[0], pos[1], kappa, cfg.dom, trunc)
    g21 = 2 * np.pi * greens.mh_neumann_value(pos[1], pos[0], kappa, cfg.dom, trunc)
    return d1 * d2 - g12 * g21


def two_spiral_beta_ratio(cfg: SpiralConfig, k: float,
                          trunc: greens.ImageTruncation | None = None) -> float:
    """beta_2 / beta_1 at wavenumber k from the first row of the weight system."""
    if cfg.n_spirals != 2:
        raise ValidationError("two_spiral_beta_ratio needs exactly two spirals")
    M = beta_matrix(cfg, k, trunc)
    return -M[0, 0] / M[0, 1]


def near_field_k(n_spirals: int, q: float, eps: float, area: float) -> float:
    """Closed-form wavenumber for domains far below the exponential scale."""
    if n_spirals < 0:
        raise ValidationError("n_spirals must be >= 0")
    if not (0 < eps < 1):
        raise ValidationError(f"eps must lie in (0, 1), got {eps}")
    x = q * np.log(1.0 / eps)
    if not 0 < x < np.pi / 2:
        raise WavenumberError(
            f"near-field form needs 0 < q log(1/eps) < pi/2, got {x:.4f}")
    return float(np.sqrt(2 * np.pi * n_spirals * np.tan(x) / (q * area)))


def _tan_minus_pole(x: float) -> float:
    """tan(x) - 1/(pi/2 - x), smooth through x = pi/2."""
    d = x - np.pi / 2
    if abs(d) < 1e-4:
        # tan(x) = -1/d + d/3 + d^3/45 + ...
        return d / 3 + d**3 / 45
    return np.tan(x) + 1.0 / d


def uniform_k(cfg: SpiralConfig, eps: float,
              trunc: greens.ImageTruncation | None = None,
              canonical: WavenumberSolution | None = None) -> float:
    """Composite wavenumber: far-field root plus the near-field correction.

    Valid on both sides of q log(1/eps) = pi/2 (the tangent and its
    matching pole cancel there).  Tiny negative k^2 from cancellation is
    clamped to zero.
    """
    if not (0 < eps < 1):
        raise ValidationError(f"eps must lie in (0, 1), got {eps}")
    sol = canonical if canonical is not None else solve_canonical(cfg, trunc)
    x = cfg.q * np.log(1.0 / eps)
    k2 = sol.k**2 + (2 * np.pi * cfg.n_spirals / (cfg.q * cfg.dom.area)) * _tan_minus_pole(x)
    if k2 < -1e-12:
        raise WavenumberError(f"uniform k^2 = {k2:.3e} < 0: regime mismatch")
    return float(np.sqrt(max(k2, 0.0)))
