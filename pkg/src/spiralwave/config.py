"""Experiment configuration: a flat INI file mirrored by dataclasses.

The format is diff-friendly and language-neutral; parse -> dump -> parse is
the identity on every field.  Example::

    [domain]
    lx = 200.0
    ly = 200.0

    [model]
    q = 0.45
    law = uniform
    btilde = 0.0

    [eps]
    kind = single_spiral_walls

    [spirals]
    s1 = 161.0 100.0 1

    [integrate]
    t_start = 0.0
    t_end = 2000.0
    h = 0.5
    calibrate = true

    [sim]
    dx = 0.5
    t_end = 600.0
    snapshot_every = 200
    phase_seed = auto
    eps_seed = 0.01
    detect_threshold = 0.4
    probe_x = 50.0
    probe_y = 50.0

    [compare]
    transient_cutoff = 50.0
    window = 21
"""

from __future__ import annotations

import configparser
import hashlib
import io
import json
from dataclasses import dataclass, field

from .errors import ValidationError
from .geometry import RectDomain, Spiral
from .motion import LAWS, EpsilonPolicy, StepControl
from .pde import SimParams


@dataclass(frozen=True)
class IntegrateSection:
    t_start: float = 0.0
    t_end: float = 1000.0
    h: float = 0.5
    calibrate: bool = True

    def step_control(self) -> StepControl:
        return StepControl(h=self.h, calibrate=self.calibrate)


@dataclass(frozen=True)
class CompareSection:
    transient_cutoff: float = 50.0
    window: int = 21


@dataclass(frozen=True)
class SimSection:
    dx: float = 0.5
    dt: float | None = None
    t_end: float = 600.0
    snapshot_every: int = 200
    phase_seed: str = "auto"
    eps_seed: float = 0.01
    detect_threshold: float = 0.4
    probe_x: float | None = None
    probe_y: float | None = None
    field_dump_every: int = 0

    def sim_params(self, q: float) -> SimParams:
        return SimParams(q=q, dx=self.dx, dt=self.dt, t_end=self.t_end,
                         snapshot_every=self.snapshot_every,
                         phase_seed=self.phase_seed, eps_seed=self.eps_seed,
                         detect_threshold=self.detect_threshold)


@dataclass(frozen=True)
class ExperimentConfig:
    dom: RectDomain
    q: float
    spirals: tuple[Spiral, ...]
    law: str = "uniform"
    btilde: float = 0.0
    eps_policy: EpsilonPolicy = field(default_factory=EpsilonPolicy)
    integrate: IntegrateSection = field(default_factory=IntegrateSection)
    sim: SimSection | None = None
    compare: CompareSection = field(default_factory=CompareSection)

    def __post_init__(self):
        if self.law not in LAWS:
            raise ValidationError(f"law must be one of {LAWS}, got {self.law!r}")
        if not (0 < self.q < 1):
            raise ValidationError(f"q must lie in (0, 1), got {self.q}")
        if not self.spirals:
            raise ValidationError("at least one spiral required")
        for s in self.spirals:
            if not self.dom.contains((s.x, s.y)):
                raise ValidationError(f"spiral at ({s.x}, {s.y}) outside the domain")


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def parse_config(text_or_path) -> ExperimentConfig:
    """Parse a configuration from a path or raw INI text."""
    cp = configparser.ConfigParser()
    text = text_or_path
    if "\n" not in str(text_or_path):
        try:
            with open(text_or_path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ValidationError(f"cannot read config: {exc}") from exc
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ValidationError(f"bad config syntax: {exc}") from exc

    try:
        dom = RectDomain(cp.getfloat("domain", "lx"), cp.getfloat("domain", "ly"))
        q = cp.getfloat("model", "q")
        law = cp.get("model", "law", fallback="uniform")
        btilde = cp.getfloat("model", "btilde", fallback=0.0)

        spirals = []
        for key in sorted(cp["spirals"]):
            parts = cp.get("spirals", key).split()
            if len(parts) != 3:
                raise ValidationError(f"spiral {key!r} needs 'x y winding'")
            spirals.append(Spiral(float(parts[0]), float(parts[1]), int(parts[2])))

        kind = cp.get("eps", "kind", fallback="constant")
        cval = cp.getfloat("eps", "constant_value", fallback=None) \
            if cp.has_option("eps", "constant_value") else None
        eps_policy = EpsilonPolicy(kind=kind, constant_value=cval)

        integ = IntegrateSection(
            t_start=cp.getfloat("integrate", "t_start", fallback=0.0),
            t_end=cp.getfloat("integrate", "t_end", fallback=1000.0),
            h=cp.getfloat("integrate", "h", fallback=0.5),
            calibrate=cp.getboolean("integrate", "calibrate", fallback=True),
        ) if cp.has_section("integrate") else IntegrateSection()

        sim = None
        if cp.has_section("sim"):
            dt_raw = cp.get("sim", "dt", fallback="auto")
            sim = SimSection(
                dx=cp.getfloat("sim", "dx", fallback=0.5),
                dt=None if dt_raw in ("auto", "", None) else float(dt_raw),
                t_end=cp.getfloat("sim", "t_end", fallback=600.0),
                snapshot_every=cp.getint("sim", "snapshot_every", fallback=200),
                phase_seed=cp.get("sim", "phase_seed", fallback="auto"),
                eps_seed=cp.getfloat("sim", "eps_seed", fallback=0.01),
                detect_threshold=cp.getfloat("sim", "detect_threshold", fallback=0.4),
                probe_x=cp.getfloat("sim", "probe_x", fallback=None)
                if cp.has_option("sim", "probe_x") else None,
                probe_y=cp.getfloat("sim", "probe_y", fallback=None)
                if cp.has_option("sim", "probe_y") else None,
                field_dump_every=cp.getint("sim", "field_dump_every", fallback=0),
            )

        comp = CompareSection(
            transient_cutoff=cp.getfloat("compare", "transient_cutoff", fallback=50.0),
            window=cp.getint("compare", "window", fallback=21),
        ) if cp.has_section("compare") else CompareSection()
    except (configparser.Error, KeyError, ValueError) as exc:
        raise ValidationError(f"bad config: {exc}") from exc

    return ExperimentConfig(dom=dom, q=q, spirals=tuple(spirals), law=law,
                            btilde=btilde, eps_policy=eps_policy, integrate=integ,
                            sim=sim, compare=comp)


def dump_config(cfg: ExperimentConfig) -> str:
    """Serialize a configuration; parse(dump(cfg)) == cfg."""
    out = io.StringIO()

    def sec(name, pairs):
        out.write(f"[{name}]\n")
        for k, v in pairs:
            if v is not None:
                out.write(f"{k} = {_fmt(v)}\n")
        out.write("\n")

    sec("domain", [("lx", cfg.dom.lx), ("ly", cfg.dom.ly)])
    sec("model", [("q", cfg.q), ("law", cfg.law), ("btilde", cfg.btilde)])
    sec("eps", [("kind", cfg.eps_policy.kind),
                ("constant_value", cfg.eps_policy.constant_value)])
    sec("spirals", [(f"s{i+1}", f"{_fmt(s.x)} {_fmt(s.y)} {s.winding}")
                    for i, s in enumerate(cfg.spirals)])
    sec("integrate", [("t_start", cfg.integrate.t_start), ("t_end", cfg.integrate.t_end),
                      ("h", cfg.integrate.h), ("calibrate", cfg.integrate.calibrate)])
    if cfg.sim is not None:
        s = cfg.sim
        sec("sim", [("dx", s.dx), ("dt", "auto" if s.dt is None else s.dt),
                    ("t_end", s.t_end), ("snapshot_every", s.snapshot_every),
                    ("phase_seed", s.phase_seed), ("eps_seed", s.eps_seed),
                    ("detect_threshold", s.detect_threshold),
                    ("probe_x", s.probe_x), ("probe_y", s.probe_y),
                    ("field_dump_every", s.field_dump_every)])
    sec("compare", [("transient_cutoff", cfg.compare.transient_cutoff),
                    ("window", cfg.compare.window)])
    return out.getvalue()


def config_hash(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def write_manifest(path, cfg_text: str, c1: float, command: str):
    """Record what produced the outputs next to them."""
    from . import __version__

    payload = {
        "command": command,
        "config_sha256": config_hash(cfg_text),
        "package_version": __version__,
        "c1": c1,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
