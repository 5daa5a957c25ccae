"""Side-by-side pipelines: simulation vs asymptotic laws, and orbit scans."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import pde, svgplot
from .config import CompareSection, ExperimentConfig, dump_config, write_manifest
from .core_profile import default_core_constants
from .errors import ValidationError
from .motion import (EpsilonPolicy, SpiralState, StepControl, eval_epsilon,
                     find_periodic_orbit, integrate, velocity_canonical,
                     velocity_near_field, velocity_near_field_bcorrected,
                     velocity_uniform)
from .wavenumber import SpiralConfig, solve_canonical


@dataclass
class ComparisonReport:
    """Aligned simulation/model series for the primary defect set.

    All arrays share the time stamps `times` (the simulation snapshot grid
    restricted to where smoothed velocities exist).  Velocities are the
    smoothed track derivative and the law evaluated along the track.
    """

    times: np.ndarray            # (T,)
    track_positions: np.ndarray  # (T, N, 2)
    track_velocity: np.ndarray   # (T, N, 2)
    law_velocity: np.ndarray     # (T, N, 2)
    model_positions: np.ndarray  # (T, N, 2) anchored model trajectory
    anchor_time: float
    transient_cutoff: float
    rms_speed: float
    rms_deviation: float
    trajectory_divergence: float
    symmetry_violation: float

    @property
    def rms_ratio(self) -> float:
        return self.rms_deviation / self.rms_speed if self.rms_speed > 0 else np.inf


def law_velocity_at(cfg: SpiralConfig, law: str, policy: EpsilonPolicy,
                    positions, windings, btilde: float = 0.0,
                    warm: dict | None = None) -> np.ndarray:
    """Evaluate the chosen law for given positions (re-solving k each call)."""
    state = SpiralState(np.asarray(positions, float), np.asarray(windings, int))
    cfg_now = cfg.with_positions(state.positions)
    if law in ("canonical", "uniform"):
        ws = warm.get("k") if warm else None
        sol = solve_canonical(cfg_now, warm_start=ws)
        if warm is not None:
            warm["k"] = sol.k
        if law == "canonical":
            return velocity_canonical(state, cfg_now, sol.k, sol.beta)
        eps = eval_epsilon(state, cfg.dom, policy)
        return velocity_uniform(state, cfg_now, eps, sol.k, sol.beta)
    eps = eval_epsilon(state, cfg.dom, policy)
    if law == "near":
        return velocity_near_field(state, cfg.q, eps, cfg.dom)
    return velocity_near_field_bcorrected(state, cfg.q, eps, cfg.dom, btilde)


def _anchor_crossing(times, positions, dom):
    """First crossing of the quartic reference curve
    (x-cx)^4 + (y-cy)^4 = r^4 with r = 0.45 (lx+ly)/2, inside to outside."""
    cx, cy = dom.lx / 2, dom.ly / 2
    r4 = (0.45 * (dom.lx + dom.ly) / 2) ** 4
    f = (positions[:, 0] - cx) ** 4 + (positions[:, 1] - cy) ** 4 - r4
    for i in range(len(f) - 1):
        if f[i] < 0 <= f[i + 1]:
            a = f[i] / (f[i] - f[i + 1])
            t = times[i] + a * (times[i + 1] - times[i])
            p = positions[i] + a * (positions[i + 1] - positions[i])
            return t, p
    return None


def _interp_trajectory(rec_times, rec_pos, sample_times):
    """Linear interpolation of an (T, N, 2) trajectory onto sample times."""
    order = np.argsort(rec_times)
    rt = rec_times[order]
    rp = rec_pos[order]
    out = np.empty((len(sample_times), rp.shape[1], 2))
    for n in range(rp.shape[1]):
        for c in range(2):
            out[:, n, c] = np.interp(sample_times, rt, rp[:, n, c])
    return out


def run_compare(cfg: ExperimentConfig, out_dir: str | None = None) -> ComparisonReport:
    """Run the field simulation, anchor the law trajectory to the measured
    track, and report aligned positions and velocities."""
    if cfg.sim is None:
        raise ValidationError("comparison requires sim params")
    c1, _ = default_core_constants()
    params = cfg.sim.sim_params(cfg.q)
    probe = None
    if cfg.sim.probe_x is not None and cfg.sim.probe_y is not None:
        probe = (cfg.sim.probe_x, cfg.sim.probe_y)
    sim = pde.simulate(cfg.spirals, cfg.dom, params, probe=probe, c1=c1)

    # main tracks: one per seeded spiral, matched at birth by proximity
    tracks = _match_tracks(sim.tracks, cfg.spirals)
    times, tpos = _common_track_arrays(tracks)

    # smoothed velocities on the common grid
    window = cfg.compare.window
    tv, vel0 = pde.estimate_velocity(times, tpos[:, 0, :], window=window)
    vels = np.empty((len(tv), len(tracks), 2))
    vels[:, 0, :] = vel0
    for n in range(1, len(tracks)):
        _, vn = pde.estimate_velocity(times, tpos[:, n, :], window=window)
        vels[:, n, :] = vn
    sel = np.isin(times, tv)
    times_v = times[sel]
    tpos_v = tpos[sel]

    scfg = SpiralConfig(cfg.spirals, cfg.q, cfg.dom, c1)

    # law velocity along the measured track
    warm: dict = {}
    law_v = np.empty_like(vels)
    for i in range(len(times_v)):
        law_v[i] = law_velocity_at(scfg, cfg.law, cfg.eps_policy, tpos_v[i],
                                   scfg.windings, cfg.btilde, warm)

    # anchored model trajectory (backward from the reference-curve crossing
    # of the first track; forward from the first sample if it never exits)
    anchor = _anchor_crossing(times_v, tpos_v[:, 0, :], cfg.dom)
    ctrl = cfg.integrate.step_control()
    if anchor is not None and len(tracks) == 1:
        t_a, p_a = anchor
        state_a = SpiralState(np.array([p_a]), scfg.windings, t_a)
        model_pos = _two_sided_model(scfg, cfg, state_a, (times_v[0], times_v[-1]), ctrl)
        anchor_time = t_a
    else:
        state_0 = SpiralState(tpos_v[0].copy(), scfg.windings, times_v[0])
        rec = integrate(scfg.with_positions(tpos_v[0]), cfg.law, cfg.eps_policy,
                        (times_v[0], times_v[-1]), ctrl, state0=state_0,
                        btilde=cfg.btilde)
        model_pos = (rec.times, rec.positions)
        anchor_time = times_v[0]
    model_on_grid = _interp_trajectory(model_pos[0], model_pos[1], times_v)

    cut = cfg.compare.transient_cutoff
    mask = times_v >= cut
    dev = np.linalg.norm(vels[mask] - law_v[mask], axis=2)
    spd = np.linalg.norm(vels[mask], axis=2)
    rms_speed = float(np.sqrt(np.mean(spd**2))) if mask.any() else np.nan
    rms_dev = float(np.sqrt(np.mean(dev**2))) if mask.any() else np.nan
    div = float(np.max(np.linalg.norm(model_on_grid - tpos_v, axis=2))) if len(times_v) else np.nan

    sym = np.nan
    if len(tracks) == 2:
        target = np.array([cfg.dom.lx, cfg.dom.ly])
        sym = float(np.max(np.linalg.norm(tpos_v[:, 0, :] + tpos_v[:, 1, :] - target, axis=1)))

    report = ComparisonReport(times=times_v, track_positions=tpos_v,
                              track_velocity=vels, law_velocity=law_v,
                              model_positions=model_on_grid, anchor_time=anchor_time,
                              transient_cutoff=cut, rms_speed=rms_speed,
                              rms_deviation=rms_dev, trajectory_divergence=div,
                              symmetry_violation=sym)
    if out_dir is not None:
        _write_compare_outputs(cfg, report, out_dir)
    return report


def _two_sided_model(scfg, cfg, state_a, t_range, ctrl):
    """Integrate the law backward and forward from the anchor state."""
    t0, t1 = t_range
    t_a = state_a.t
    times = [np.array([t_a])]
    pos = [state_a.positions[None, :, :]]
    if t_a > t0:
        back = integrate(scfg.with_positions(state_a.positions), cfg.law,
                         cfg.eps_policy, (t_a, t0), ctrl, state0=state_a,
                         btilde=cfg.btilde)
        times.append(back.times[1:])
        pos.append(back.positions[1:])
    if t_a < t1:
        fwd = integrate(scfg.with_positions(state_a.positions), cfg.law,
                        cfg.eps_policy, (t_a, t1), ctrl, state0=state_a,
                        btilde=cfg.btilde)
        times.append(fwd.times[1:])
        pos.append(fwd.positions[1:])
    t_all = np.concatenate(times)
    p_all = np.concatenate(pos, axis=0)
    return t_all, p_all


def _match_tracks(tracks, spirals):
    """One track per seeded spiral: the longest track born nearest its seed."""
    chosen = []
    for s in spirals:
        best = None
        for tr in tracks:
            if tr.winding != s.winding or len(tr.times) < 4 or tr in chosen:
                continue
            d0 = float(np.hypot(*(tr.positions[0] - np.array([s.x, s.y]))))
            score = (d0, -len(tr.times))
            if best is None or score < best[0]:
                best = (score, tr)
        if best is None:
            raise ValidationError(f"no track found for seed spiral at ({s.x}, {s.y})")
        chosen.append(best[1])
    return chosen


def _common_track_arrays(tracks):
    """Common time stamps across tracks plus positions (T, N, 2)."""
    common = set(np.round(tracks[0].times, 9))
    for tr in tracks[1:]:
        common &= set(np.round(tr.times, 9))
    common = np.array(sorted(common))
    out = np.empty((len(common), len(tracks), 2))
    for n, tr in enumerate(tracks):
        tt = np.round(np.array(tr.times), 9)
        pp = np.array(tr.positions)
        sel = np.isin(tt, common)
        out[:, n, :] = pp[sel]
    return common, out


def _csv_row(values) -> str:
    return ",".join(repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)
                    for v in values)


def _write_compare_outputs(cfg: ExperimentConfig, rep: ComparisonReport, out_dir: str):
    os.makedirs(out_dir, exist_ok=True)
    n = rep.track_positions.shape[1]
    header = ["t"]
    for i in range(n):
        header += [f"x{i+1}_num", f"y{i+1}_num", f"x{i+1}_law", f"y{i+1}_law",
                   f"vx{i+1}_num", f"vy{i+1}_num", f"vx{i+1}_law", f"vy{i+1}_law"]
    lines = [",".join(header)]
    for i, t in enumerate(rep.times):
        row = [t]
        for j in range(n):
            row += [rep.track_positions[i, j, 0], rep.track_positions[i, j, 1],
                    rep.model_positions[i, j, 0], rep.model_positions[i, j, 1],
                    rep.track_velocity[i, j, 0], rep.track_velocity[i, j, 1],
                    rep.law_velocity[i, j, 0], rep.law_velocity[i, j, 1]]
        lines.append(_csv_row(row))
    with open(os.path.join(out_dir, "comparison.csv"), "w") as fh:
        fh.write("\n".join(lines) + "\n")

    summary = [
        ("rms_speed", rep.rms_speed),
        ("rms_deviation", rep.rms_deviation),
        ("rms_ratio", rep.rms_ratio),
        ("trajectory_divergence", rep.trajectory_divergence),
        ("symmetry_violation", rep.symmetry_violation),
        ("anchor_time", rep.anchor_time),
        ("transient_cutoff", rep.transient_cutoff),
    ]
    with open(os.path.join(out_dir, "summary.csv"), "w") as fh:
        fh.write("metric,value\n")
        for k, v in summary:
            fh.write(f"{k},{repr(float(v))}\n")

    emit_plots(cfg, rep, out_dir)
    write_manifest(os.path.join(out_dir, "manifest.json"), dump_config(cfg),
                   default_core_constants()[0], "compare")


def emit_plots(cfg: ExperimentConfig, rep: ComparisonReport, out_dir: str):
    """Trajectory and velocity SVGs: dashed measured, solid model."""
    os.makedirs(out_dir, exist_ok=True)
    curves = []
    for j in range(rep.track_positions.shape[1]):
        curves.append((rep.track_positions[:, j, :], "#c0392b", True))
        curves.append((rep.model_positions[:, j, :], "#2c3e50", False))
    with open(os.path.join(out_dir, "trajectories.svg"), "w") as fh:
        fh.write(svgplot.trajectory_svg(cfg.dom.lx, cfg.dom.ly, curves))
    series = []
    for j in range(rep.track_positions.shape[1]):
        series.append((rep.times, rep.track_velocity[:, j, 0], "#c0392b", True))
        series.append((rep.times, rep.law_velocity[:, j, 0], "#2c3e50", False))
        series.append((rep.times, rep.track_velocity[:, j, 1], "#e67e22", True))
        series.append((rep.times, rep.law_velocity[:, j, 1], "#16a085", False))
    with open(os.path.join(out_dir, "velocity.svg"), "w") as fh:
        fh.write(svgplot.series_svg(series))


def run_bifurcation_scan(q_list, cfg: ExperimentConfig, out_dir: str | None = None):
    """Orbit search across q values; per-q failures are recorded, not raised.

    Returns rows (q, orbit_found, crossing_x, period).
    """
    c1, _ = default_core_constants()
    rows = []
    for q in q_list:
        try:
            scfg = SpiralConfig(cfg.spirals, float(q), cfg.dom, c1)
            res = find_periodic_orbit(scfg, cfg.law, cfg.eps_policy, btilde=cfg.btilde)
            rows.append((float(q), res.found, res.crossing_x, res.period))
        except Exception as exc:  # per-q failures recorded, scan continues
            rows.append((float(q), False, np.nan, np.nan))
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        lines = ["q,orbit_found,crossing_x,period"]
        for q, found, xc, per in rows:
            lines.append(f"{repr(q)},{int(found)},{repr(float(xc))},{repr(float(per))}")
        found_x = [xc for _, f, xc, _ in rows if f]
        growing = all(b > a for a, b in zip(found_x, found_x[1:]))
        lines.append(f"# orbits_found={sum(1 for _, f, _, _ in rows if f)} "
                     f"crossing_monotone={int(growing)}")
        with open(os.path.join(out_dir, "bifurcation_scan.csv"), "w") as fh:
            fh.write("\n".join(lines) + "\n")
        write_manifest(os.path.join(out_dir, "manifest.json"), dump_config(cfg), c1, "scan")
    return rows
