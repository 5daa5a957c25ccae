"""Asymptotic laws of motion for defect centres and their integration.

Three velocity fields are provided with a common 4 pi q scale:

* far-field law: perpendicular gradients of the screened Neumann Green's
  function, weights beta and kappa = q k from the eigenproblem;
* near-field law: perpendicular Neumann gradients plus cot(q log eps)
  times plain Dirichlet gradients, all for the Laplace kernel;
* uniform composite: the far-field law plus the cot-weighted Dirichlet
  terms evaluated with the screened kernel.

A drift-corrected variant of the near-field law covers a large imaginary
diffusion coefficient via the mixing parameter btilde.

Trajectories integrate under fixed-step RK4 with event detection (wall
contact, collision) and optional step calibration; backward time is
selected by the sign of the time span.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import greens
from .errors import TrajectoryError, ValidationError, WavenumberError
from .geometry import RectDomain, Spiral
from .wavenumber import SpiralConfig, WavenumberSolution, solve_canonical

LAWS = ("canonical", "near", "uniform", "b_corrected")

# events fire when a defect is closer than this to a wall / another defect
WALL_CONTACT = 3.0
COLLISION = 3.0


def perp(v):
    """Rotate a 2-vector by +90 degrees: (vx, vy) -> (-vy, vx)."""
    return np.array([-v[1], v[0]])


@dataclass(frozen=True)
class EpsilonPolicy:
    """How the inverse-lengthscale eps is evaluated along a trajectory.

    kinds: 'constant' (fixed value, default 4/(lx+ly)); 'single_spiral_walls'
    (root-sum-square of inverse wall distances of the first spiral);
    'symmetric_pair' (adds the inverse half-separation term).
    """

    kind: str = "constant"
    constant_value: float | None = None

    def __post_init__(self):
        if self.kind not in ("constant", "single_spiral_walls", "symmetric_pair"):
            raise ValidationError(f"unknown eps policy kind {self.kind!r}")


def eval_epsilon(state: "SpiralState", dom: RectDomain, policy: EpsilonPolicy) -> float:
    """Evaluate eps for the current positions; always in (0, 1)."""
    if policy.kind == "constant":
        eps = policy.constant_value if policy.constant_value is not None \
            else 4.0 / (dom.lx + dom.ly)
    else:
        x, y = state.positions[0]
        dists = (x, dom.lx - x, y, dom.ly - y)
        if min(dists) <= 0:
            raise ValidationError("spiral on a wall: eps undefined")
        s = sum(1.0 / d**2 for d in dists)
        if policy.kind == "symmetric_pair":
            s += 1.0 / ((dom.lx / 2 - x)**2 + (dom.ly / 2 - y)**2)
        eps = float(np.sqrt(s))
    if not 0 < eps < 1:
        raise ValidationError(f"eps = {eps:.4g} outside (0, 1)")
    return eps


@dataclass
class SpiralState:
    """Positions (N, 2) and windings (N,) at time t."""

    positions: np.ndarray
    windings: np.ndarray
    t: float = 0.0

    @classmethod
    def from_spirals(cls, spirals, t: float = 0.0) -> "SpiralState":
        return cls(positions=np.array([[s.x, s.y] for s in spirals], dtype=float),
                   windings=np.array([s.winding for s in spirals], dtype=int), t=t)

    def as_spirals(self) -> tuple[Spiral, ...]:
        return tuple(Spiral(float(p[0]), float(p[1]), int(n))
                     for p, n in zip(self.positions, self.windings))

    @property
    def n_spirals(self) -> int:
        return len(self.windings)


@dataclass(frozen=True)
class TrajectoryRecord:
    """Recorded trajectory: times (T,), positions (T, N, 2), diagnostics."""

    times: np.ndarray
    positions: np.ndarray
    k_series: np.ndarray
    eps_series: np.ndarray
    termination: str

    @property
    def final_state(self) -> np.ndarray:
        return self.positions[-1]


# ---------------------------------------------------------------------------
# velocity laws
# ---------------------------------------------------------------------------

def _cot(x: float) -> float:
    return np.cos(x) / np.sin(x)


def velocity_canonical(state: SpiralState, cfg: SpiralConfig, k: float,
                       beta: np.ndarray,
                       trunc: greens.ImageTruncation | None = None) -> np.ndarray:
    """Far-field velocities: purely perpendicular (azimuthal) Green gradients."""
    kappa = cfg.q * k
    pos = state.positions
    wind = state.windings
    n = len(wind)
    v = np.zeros((n, 2))
    for ell in range(n):
        g_self = greens.mh_reg_grad_at_self(pos[ell], kappa, cfg.dom, trunc, bc="neumann")
        pair = np.zeros(2)
        for j in range(n):
            if j == ell:
                continue
            pair += beta[j] * greens.mh_neumann_grad(pos[ell], pos[j], kappa, cfg.dom, trunc)
        v[ell] = 4 * np.pi * cfg.q * wind[ell] * (perp(pair) / beta[ell] + perp(g_self))
    return v


def _near_field_groups(state: SpiralState, q: float, eps: float, dom: RectDomain,
                       trunc: greens.ImageTruncation | None):
    """(perpendicular Neumann part, Dirichlet gradient part) of the near law.

    The full velocity is perp_part + cot(q log eps) * dirichlet_part; the
    split is exposed for chirality and magnitude diagnostics.
    """
    pos = state.positions
    wind = state.windings
    n = len(wind)
    vn = np.zeros((n, 2))
    vd = np.zeros((n, 2))
    for ell in range(n):
        gn, gd = greens.laplace_self_grads(pos[ell], dom, trunc)
        pair_n = np.zeros(2)
        pair_d = np.zeros(2)
        for j in range(n):
            if j == ell:
                continue
            pgn, pgd = greens.laplace_pair_grads(pos[ell], pos[j], dom, trunc)
            pair_n += pgn
            pair_d += wind[j] * pgd
        vn[ell] = 4 * np.pi * q * wind[ell] * (perp(gn) + perp(pair_n))
        vd[ell] = -4 * np.pi * q * (gd + wind[ell] * pair_d)
    return vn, vd


def velocity_near_field(state: SpiralState, q: float, eps: float, dom: RectDomain,
                        trunc: greens.ImageTruncation | None = None) -> np.ndarray:
    """Near-field velocities (Laplace kernel, cot-weighted Dirichlet drift)."""
    x = q * np.log(1.0 / eps)
    if not 0 < x < np.pi / 2:
        raise ValidationError(
            f"near-field law needs 0 < q log(1/eps) < pi/2, got {x:.4f}")
    vn, vd = _near_field_groups(state, q, eps, dom, trunc)
    return vn + _cot(q * np.log(eps)) * vd


def _uniform_groups(state: SpiralState, cfg: SpiralConfig, k: float,
                    beta: np.ndarray, trunc: greens.ImageTruncation | None):
    """(perpendicular Neumann part, Dirichlet part) of the composite law."""
    kappa = cfg.q * k
    pos = state.positions
    wind = state.windings
    n = len(wind)
    vn = np.zeros((n, 2))
    vd = np.zeros((n, 2))
    for ell in range(n):
        gn, gd = greens.mh_self_grads(pos[ell], kappa, cfg.dom, trunc)
        pair_n = np.zeros(2)
        pair_d = np.zeros(2)
        for j in range(n):
            if j == ell:
                continue
            pgn, pgd = greens.mh_pair_grads(pos[ell], pos[j], kappa, cfg.dom, trunc)
            pair_n += beta[j] * pgn
            pair_d += wind[j] * pgd
        vn[ell] = 4 * np.pi * cfg.q * wind[ell] * (perp(gn) + perp(pair_n) / beta[ell])
        vd[ell] = -4 * np.pi * cfg.q * (gd + wind[ell] * pair_d)
    return vn, vd


def velocity_uniform(state: SpiralState, cfg: SpiralConfig, eps: float,
                     k: float, beta: np.ndarray,
                     trunc: greens.ImageTruncation | None = None) -> np.ndarray:
    """Composite velocities, valid across both regimes.

    cot(q log eps) passes smoothly through zero at q log(1/eps) = pi/2, so
    unlike the pure near-field law this is usable on both sides.
    """
    vn, vd = _uniform_groups(state, cfg, k, beta, trunc)
    return vn + _cot(cfg.q * np.log(eps)) * vd


def velocity_near_field_bcorrected(state: SpiralState, q: float, eps: float,
                                   dom: RectDomain, btilde: float,
                                   trunc: greens.ImageTruncation | None = None) -> np.ndarray:
    """Near-field law with an O(1/q) imaginary diffusion coefficient.

    A nonzero btilde mixes the perpendicular drive with a plain-gradient
    component; btilde = 0 reduces exactly to velocity_near_field and the
    speed decays like 1/btilde for large btilde.
    """
    x = q * np.log(1.0 / eps)
    if not 0 < x < np.pi / 2:
        raise ValidationError(
            f"near-field law needs 0 < q log(1/eps) < pi/2, got {x:.4f}")
    if btilde < 0:
        raise ValidationError("btilde must be >= 0")
    wind = state.windings
    out = np.zeros((len(wind), 2))
    for ell in range(len(wind)):
        s = q * wind[ell] * np.log(eps)
        c, sn = np.cos(s), np.sin(s)
        g = _twist_potential_grad(state, ell, q, eps, dom, trunc)
        pref = 2 * q * c / (btilde**2 * c**2 + sn**2)
        out[ell] = pref * (btilde * c * g + sn * perp(g))
    return out


def _twist_potential_grad(state: SpiralState, ell: int, q: float, eps: float,
                          dom: RectDomain, trunc) -> np.ndarray:
    """Gradient of the regularized outer phase potential at spiral ell.

    2 pi [ tan(q log eps) (grad Gn_reg self + sum_j grad Gn pair)
           + n_ell perp(grad Gd_reg self) + sum_j n_j perp(grad Gd pair) ].
    The near-field law is 2 q cot(q n_ell log eps) perp(of this).
    """
    pos = state.positions
    wind = state.windings
    tn = np.tan(q * np.log(eps))
    gn, gd = greens.laplace_self_grads(pos[ell], dom, trunc)
    acc = tn * gn + wind[ell] * perp(gd)
    for j in range(len(wind)):
        if j == ell:
            continue
        pgn, pgd = greens.laplace_pair_grads(pos[ell], pos[j], dom, trunc)
        acc += tn * pgn + wind[j] * perp(pgd)
    return 2 * np.pi * acc


# ---------------------------------------------------------------------------
# trajectory integration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StepControl:
    """Fixed-step RK4 control.

    h is the base step; with calibrate=True the step is halved (up to
    max_halvings) until two successive refinements of a probe segment agree
    to pos_tol per 100 time units in final position.
    """

    h: float = 0.5
    calibrate: bool = True
    pos_tol: float = 1e-6
    max_halvings: int = 8


class _LawEvaluator:
    """Per-step velocity evaluation with cached eigenproblem warm starts."""

    def __init__(self, cfg: SpiralConfig, law: str, policy: EpsilonPolicy,
                 btilde: float, trunc):
        if law not in LAWS:
            raise ValidationError(f"law must be one of {LAWS}, got {law!r}")
        self.cfg = cfg
        self.law = law
        self.policy = policy
        self.btilde = btilde
        self.trunc = trunc
        self._k_warm: float | None = None
        self.k_last = np.nan
        self.eps_last = np.nan

    def refresh(self, state: SpiralState):
        """Re-solve k/beta and eps for the current positions (once per step)."""
        self.eps_last = eval_epsilon(state, self.cfg.dom, self.policy) \
            if self.law != "canonical" else np.nan
        if self.law in ("canonical", "uniform"):
            cfg_now = self.cfg.with_positions(state.positions)
            sol = solve_canonical(cfg_now, self.trunc, warm_start=self._k_warm)
            self._k_warm = sol.k
            self.k_last = sol.k
            self._beta = sol.beta
        else:
            self.k_last = np.nan

    def velocity(self, positions: np.ndarray, state: SpiralState) -> np.ndarray:
        st = SpiralState(positions=positions, windings=state.windings, t=state.t)
        if self.law == "canonical":
            return velocity_canonical(st, self.cfg, self.k_last, self._beta, self.trunc)
        if self.law == "uniform":
            return velocity_uniform(st, self.cfg, self.eps_last, self.k_last,
                                    self._beta, self.trunc)
        if self.law == "near":
            return velocity_near_field(st, self.cfg.q, self.eps_last,
                                       self.cfg.dom, self.trunc)
        return velocity_near_field_bcorrected(st, self.cfg.q, self.eps_last,
                                              self.cfg.dom, self.btilde, self.trunc)


def _rk4_step(ev: _LawEvaluator, state: SpiralState, h: float) -> np.ndarray:
    p = state.positions
    k1 = ev.velocity(p, state)
    k2 = ev.velocity(p + 0.5 * h * k1, state)
    k3 = ev.velocity(p + 0.5 * h * k2, state)
    k4 = ev.velocity(p + h * k3, state)
    return p + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def _event(positions: np.ndarray, dom: RectDomain) -> str | None:
    for p in positions:
        if dom.wall_distance(p) < WALL_CONTACT:
            return "wall_contact"
    n = len(positions)
    for i in range(n):
        for j in range(i + 1, n):
            if np.hypot(*(positions[i] - positions[j])) < COLLISION:
                return "collision"
    return None


def _integrate_fixed(cfg, law, policy, state0, t_span, h, btilde, trunc,
                     record=True):
    t0, t1 = t_span
    direction = 1.0 if t1 > t0 else -1.0
    h_signed = direction * abs(h)
    ev = _LawEvaluator(cfg, law, policy, btilde, trunc)
    state = SpiralState(state0.positions.copy(), state0.windings.copy(), t0)

    times = [t0]
    traj = [state.positions.copy()]
    ks = []
    epss = []
    termination = "t_max"
    t = t0
    while direction * (t1 - t) > 1e-12:
        step = h_signed if direction * (t1 - t) > abs(h_signed) else (t1 - t)
        try:
            ev.refresh(state)
        except WavenumberError as exc:
            termination = f"k_solve_failure: {exc}"
            break
        newpos = _rk4_step(ev, state, step)
        t += step
        state = SpiralState(newpos, state.windings, t)
        if record:
            times.append(t)
            traj.append(newpos.copy())
            ks.append(ev.k_last)
            epss.append(ev.eps_last)
        evt = _event(newpos, cfg.dom)
        if evt is not None:
            termination = evt
            break
    if record:
        ks = [ks[0] if ks else np.nan] + ks
        epss = [epss[0] if epss else np.nan] + epss
        return TrajectoryRecord(np.array(times), np.array(traj), np.array(ks),
                                np.array(epss), termination), state
    return None, state


def integrate(cfg: SpiralConfig, law: str, policy: EpsilonPolicy,
              t_span: tuple[float, float],
              step_ctrl: StepControl | None = None,
              state0: SpiralState | None = None,
              btilde: float = 0.0,
              trunc: greens.ImageTruncation | None = None) -> TrajectoryRecord:
    """Integrate the chosen law over t_span (backward if t1 < t0).

    The eigenproblem (for canonical/uniform) and eps (for dynamic policies)
    are refreshed once per step, not per stage.
    """
    ctrl = step_ctrl or StepControl()
    if state0 is None:
        state0 = SpiralState.from_spirals(cfg.spirals)
    t0, t1 = t_span
    if t0 == t1:
        raise ValidationError("empty time span")

    h = ctrl.h
    if ctrl.calibrate:
        h = _calibrate_step(cfg, law, policy, state0, t_span, ctrl, btilde, trunc)

    rec, _ = _integrate_fixed(cfg, law, policy, state0, t_span, h, btilde, trunc)
    return rec


def _calibrate_step(cfg, law, policy, state0, t_span, ctrl, btilde, trunc) -> float:
    """Halve h until two refinements agree on a probe segment."""
    t0, t1 = t_span
    seg = min(100.0, abs(t1 - t0))
    t_mid = t0 + np.sign(t1 - t0) * seg
    h = ctrl.h
    _, s_prev = _integrate_fixed(cfg, law, policy, state0, (t0, t_mid), h,
                                 btilde, trunc, record=False)
    for _ in range(ctrl.max_halvings):
        _, s_half = _integrate_fixed(cfg, law, policy, state0, (t0, t_mid), h / 2,
                                     btilde, trunc, record=False)
        diff = np.max(np.abs(s_half.positions - s_prev.positions))
        if diff < ctrl.pos_tol * (seg / 100.0):
            return h
        h /= 2
        s_prev = s_half
    return h


# ---------------------------------------------------------------------------
# periodic orbit search
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OrbitResult:
    """Outcome of a reversed-time periodic-orbit search."""

    found: bool
    crossing_x: float = np.nan
    period: float = np.nan
    seed: float = np.nan
    n_crossings: int = 0
    crossings: tuple[float, ...] = field(default_factory=tuple)


def _hermite_coeffs(h, f0, df0, f1, df1):
    # cubic in s = (t - t0)/h, ascending order
    return (f0, h * df0,
            3 * (f1 - f0) - h * (2 * df0 + df1),
            2 * (f0 - f1) + h * (df0 + df1))


def _hermite_crossing(t0, p0, v0, t1, p1, v1, y_target):
    """Cubic-Hermite root of y(t) - y_target inside one step; returns (t, x)."""
    h = t1 - t0
    cy = _hermite_coeffs(h, p0[1] - y_target, v0[1], p1[1] - y_target, v1[1])
    roots = np.roots(cy[::-1])
    inside = [r.real for r in roots if abs(r.imag) < 1e-10 and -1e-9 <= r.real <= 1 + 1e-9]
    if inside:
        s = min(inside, key=lambda r: abs(r - 0.5))
    else:
        s = (y_target - p0[1]) / (p1[1] - p0[1])
    cx = _hermite_coeffs(h, p0[0], v0[0], p1[0], v1[0])
    x = float(cx[0] + s * (cx[1] + s * (cx[2] + s * cx[3])))
    return t0 + s * h, x


def find_periodic_orbit(cfg: SpiralConfig, law: str, policy: EpsilonPolicy,
                        seeds=None,
                        crossing_tol: float = 1e-3,
                        max_crossings: int = 60,
                        max_steps: int = 400000,
                        step_length: float = 1.0,
                        trunc: greens.ImageTruncation | None = None,
                        btilde: float = 0.0) -> OrbitResult:
    """Hunt a closed single-defect trajectory by reversed-time integration.

    The orbit is unstable forward in time, so reversed integration is
    attracting.  Crossings of the half-line y = ly/2, x > lx/2 are refined
    by Hermite interpolation; convergence of successive crossing abscissae
    to crossing_tol signals the orbit.  Trajectories collapsing onto the
    centre fixed point or leaving through a wall report no orbit.
    """
    if cfg.n_spirals != 1:
        raise ValidationError("orbit search is defined for a single spiral")
    dom = cfg.dom
    if seeds is None:
        seeds = (dom.lx / 2 + 0.15 * dom.lx, dom.lx / 2 + 0.25 * dom.lx,
                 dom.lx / 2 + 0.35 * dom.lx)
    y_mid = dom.ly / 2
    center_margin = 5.0

    for seed in seeds:
        state = SpiralState(np.array([[float(seed), y_mid]]),
                            cfg.spirals[0].winding * np.ones(1, dtype=int), 0.0)
        ev = _LawEvaluator(cfg, law, policy, btilde, trunc)
        crossings: list[tuple[float, float]] = []
        t = 0.0
        bail = False
        for _ in range(max_steps):
            try:
                ev.refresh(state)
            except WavenumberError:
                bail = True
                break
            v0 = ev.velocity(state.positions, state)
            speed = float(np.linalg.norm(v0[0]))
            if speed < 1e-14:
                bail = True
                break
            # arc-length stepping: advance about step_length units per step
            h = -min(max(step_length / speed, 0.25), 1e5)
            newpos = _rk4_step(ev, state, h)
            t_new = t + h
            p0, p1 = state.positions[0], newpos[0]
            if (p0[1] - y_mid) * (p1[1] - y_mid) < 0 and p1[0] > dom.lx / 2:
                v1 = ev.velocity(newpos, state)
                tc, xc = _hermite_crossing(t, p0, v0[0], t_new, p1, v1[0], y_mid)
                crossings.append((tc, xc))
                if len(crossings) >= 3:
                    dx_now = abs(crossings[-1][1] - crossings[-2][1])
                    if dx_now < crossing_tol and crossings[-1][1] > dom.lx / 2 + center_margin:
                        period = abs(crossings[-1][0] - crossings[-2][0])
                        return OrbitResult(found=True, crossing_x=crossings[-1][1],
                                           period=period, seed=seed,
                                           n_crossings=len(crossings),
                                           crossings=tuple(c[1] for c in crossings))
                if len(crossings) >= max_crossings:
                    bail = True
                    break
            state = SpiralState(newpos, state.windings, t_new)
            t = t_new
            if dom.wall_distance(p1) < WALL_CONTACT:
                bail = True
                break
            if np.hypot(p1[0] - dom.lx / 2, p1[1] - dom.ly / 2) < center_margin:
                bail = True
                break
        if bail:
            continue
    return OrbitResult(found=False)
