"""Command-line entry point.

    spiralwave core|greens|k|trajectory|orbit|simulate|compare|scan \
        --config FILE --out DIR

Exit codes: 0 success, 2 validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import compare as compare_mod
from . import greens, pde
from .config import dump_config, parse_config, write_manifest
from .core_profile import compute_c1, default_core_constants, solve_core_amplitude
from .errors import NumericalError, ValidationError
from .motion import find_periodic_orbit, integrate
from .wavenumber import SpiralConfig, near_field_k, solve_canonical, uniform_k


def _fmt(x) -> str:
    return repr(float(x))


def _load(args):
    cfg = parse_config(args.config)
    os.makedirs(args.out, exist_ok=True)
    return cfg


def cmd_core(args):
    profile = solve_core_amplitude(r_max=args.r_max, n_nodes=args.n_nodes)
    print(f"c1 = {profile.c1:.6f}")
    print(f"slope_at_zero = {profile.slope_at_zero:.6f}")
    print(f"far_field_coeff = {profile.far_field_coeff:.6f}")
    print(f"ode_residual = {profile.ode_residual:.3e}")
    if args.csv:
        from .core_profile import phase_gradient_correction
        with open(args.csv, "w") as fh:
            fh.write("r,f,dphi02\n")
            for r, f in zip(profile.r_nodes, profile.f_values):
                d = phase_gradient_correction(profile, r) if r > 0 else 0.0
                fh.write(f"{_fmt(r)},{_fmt(f)},{_fmt(d)}\n")
    return 0


def cmd_greens(args):
    cfg = _load(args)
    c1, _ = default_core_constants()
    scfg = SpiralConfig(cfg.spirals, cfg.q, cfg.dom, c1)
    sol = solve_canonical(scfg)
    kappa = cfg.q * sol.k if args.kappa is None else args.kappa
    n = args.grid
    xs = np.linspace(cfg.dom.lx / (n + 1), cfg.dom.lx * n / (n + 1), n)
    ys = np.linspace(cfg.dom.ly / (n + 1), cfg.dom.ly * n / (n + 1), n)
    src = (cfg.spirals[0].x, cfg.spirals[0].y)
    path = os.path.join(args.out, "greens_grid.csv")
    with open(path, "w") as fh:
        fh.write("x,y,gn_value,gn_grad_x,gn_grad_y,gd_grad_x,gd_grad_y\n")
        for y in ys:
            for x in xs:
                if np.hypot(x - src[0], y - src[1]) < 1e-9:
                    continue
                v = greens.mh_neumann_value((x, y), src, kappa, cfg.dom)
                gn, gd = greens.mh_pair_grads((x, y), src, kappa, cfg.dom)
                fh.write(",".join(map(_fmt, (x, y, v, gn[0], gn[1], gd[0], gd[1]))) + "\n")
    print(f"wrote {path} (kappa = {kappa:.6g})")
    return 0


def cmd_k(args):
    cfg = _load(args)
    c1, _ = default_core_constants()
    scfg = SpiralConfig(cfg.spirals, cfg.q, cfg.dom, c1)
    sol = solve_canonical(scfg)
    from .motion import SpiralState, eval_epsilon

    eps = eval_epsilon(SpiralState.from_spirals(cfg.spirals), cfg.dom, cfg.eps_policy)
    rows = [("k_canonical", sol.k), ("residual", sol.residual), ("eps", eps)]
    x = cfg.q * np.log(1 / eps)
    if 0 < x < np.pi / 2:
        rows.append(("k_near_field", near_field_k(len(cfg.spirals), cfg.q, eps, cfg.dom.area)))
    rows.append(("k_uniform", uniform_k(scfg, eps, canonical=sol)))
    print("quantity,value")
    for name, val in rows:
        print(f"{name},{_fmt(val)}")
    for i, b in enumerate(sol.beta):
        print(f"beta{i+1},{_fmt(b)}")
    path = os.path.join(args.out, "wavenumber.csv")
    with open(path, "w") as fh:
        fh.write("quantity,value\n")
        for name, val in rows:
            fh.write(f"{name},{_fmt(val)}\n")
        for i, b in enumerate(sol.beta):
            fh.write(f"beta{i+1},{_fmt(b)}\n")
    write_manifest(os.path.join(args.out, "manifest.json"), dump_config(cfg), c1, "k")
    return 0


def cmd_trajectory(args):
    cfg = _load(args)
    c1, _ = default_core_constants()
    scfg = SpiralConfig(cfg.spirals, cfg.q, cfg.dom, c1)
    rec = integrate(scfg, cfg.law, cfg.eps_policy,
                    (cfg.integrate.t_start, cfg.integrate.t_end),
                    cfg.integrate.step_control(), btilde=cfg.btilde)
    path = os.path.join(args.out, "trajectory.csv")
    n = rec.positions.shape[1]
    with open(path, "w") as fh:
        cols = ["t"] + [f"{c}_{i+1}" for i in range(n) for c in ("x", "y")] + ["k", "eps"]
        fh.write(",".join(cols) + "\n")
        for i, t in enumerate(rec.times):
            row = [t] + [rec.positions[i, j, c] for j in range(n) for c in (0, 1)]
            row += [rec.k_series[i], rec.eps_series[i]]
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    print(f"wrote {path} ({len(rec.times)} samples, termination: {rec.termination})")
    write_manifest(os.path.join(args.out, "manifest.json"), dump_config(cfg), c1, "trajectory")
    return 0


def cmd_orbit(args):
    cfg = _load(args)
    c1, _ = default_core_constants()
    scfg = SpiralConfig(cfg.spirals, cfg.q, cfg.dom, c1)
    res = find_periodic_orbit(scfg, cfg.law, cfg.eps_policy, btilde=cfg.btilde)
    if res.found:
        print(f"orbit found: crossing_x = {res.crossing_x:.4f}, period = {res.period:.2f}")
    else:
        print("no orbit found")
    write_manifest(os.path.join(args.out, "manifest.json"), dump_config(cfg), c1, "orbit")
    return 0


def cmd_simulate(args):
    cfg = _load(args)
    if cfg.sim is None:
        raise ValidationError("simulate requires a [sim] section")
    c1, _ = default_core_constants()
    params = cfg.sim.sim_params(cfg.q)
    probe = None
    if cfg.sim.probe_x is not None and cfg.sim.probe_y is not None:
        probe = (cfg.sim.probe_x, cfg.sim.probe_y)
    dump_prefix = os.path.join(args.out, "field") if cfg.sim.field_dump_every else None
    sim = pde.simulate(cfg.spirals, cfg.dom, params, probe=probe, c1=c1,
                       field_dump_every=cfg.sim.field_dump_every,
                       dump_prefix=dump_prefix)
    path = os.path.join(args.out, "tracks.csv")
    with open(path, "w") as fh:
        fh.write("t,id,x,y,winding,min_modulus\n")
        for tid, tr in enumerate(sim.tracks):
            for t, p in zip(tr.times, tr.positions):
                fh.write(f"{_fmt(t)},{tid},{_fmt(p[0])},{_fmt(p[1])},{tr.winding},nan\n")
    print(f"wrote {path} ({len(sim.tracks)} tracks, t_end = {sim.final_grid.t:.1f})")
    write_manifest(os.path.join(args.out, "manifest.json"), dump_config(cfg), c1, "simulate")
    return 0


def cmd_compare(args):
    cfg = _load(args)
    rep = compare_mod.run_compare(cfg, out_dir=args.out)
    print(f"rms_speed = {rep.rms_speed:.4e}")
    print(f"rms_deviation = {rep.rms_deviation:.4e}")
    print(f"rms_ratio = {rep.rms_ratio:.3f}")
    print(f"trajectory_divergence = {rep.trajectory_divergence:.3f}")
    return 0


def cmd_scan(args):
    cfg = _load(args)
    q_list = [float(tok) for tok in args.q_list.split(",") if tok]
    rows = compare_mod.run_bifurcation_scan(q_list, cfg, out_dir=args.out)
    print("q,orbit_found,crossing_x,period")
    for q, found, xc, per in rows:
        print(f"{q},{int(found)},{xc},{per}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spiralwave",
                                description="Spiral-defect dynamics: asymptotic laws "
                                            "of motion vs direct simulation")
    sub = p.add_subparsers(dest="command", required=True)

    core = sub.add_parser("core", help="solve the core profile, print constants")
    core.add_argument("--r-max", type=float, default=80.0)
    core.add_argument("--n-nodes", type=int, default=8000)
    core.add_argument("--csv", default=None, help="dump profile as CSV (r, f, dphi02)")
    core.set_defaults(func=cmd_core)

    for name, fn, extra in [
        ("greens", cmd_greens, "dump a Green's function grid as CSV"),
        ("k", cmd_k, "wavenumber report for the configuration"),
        ("trajectory", cmd_trajectory, "integrate the law of motion, write CSV"),
        ("orbit", cmd_orbit, "search for the periodic orbit"),
        ("simulate", cmd_simulate, "run the field simulation, write tracks"),
        ("compare", cmd_compare, "simulation vs law-of-motion comparison"),
        ("scan", cmd_scan, "orbit search across a q list"),
    ]:
        sp = sub.add_parser(name, help=extra)
        sp.add_argument("--config", required=True)
        sp.add_argument("--out", default=".")
        if name == "greens":
            sp.add_argument("--kappa", type=float, default=None)
            sp.add_argument("--grid", type=int, default=20)
        if name == "scan":
            sp.add_argument("--q-list", default="0.3,0.35,0.4,0.45")
        sp.set_defaults(func=fn)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
