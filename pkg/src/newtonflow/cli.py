"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 mathematical failure.
"""
from __future__ import annotations

import argparse
import io
import json
import math
import re
import sys
from dataclasses import asdict, dataclass, fields
from typing import Optional, Sequence

import numpy as np

from .algebra import NotRationalError, RootFindingError, rational_from_expr
from .elliptic import Lattice, NotEllipticError
from .expr import ParseError, parse
from .flow import FlowError, error_series, exact_trajectory, rk4, rkf45
from .formats import atomic_write
from .newton import BasePointError, FieldSpec, NoPsiError, field_from_phi, field_from_psi
from .render import (
    RasterRegion,
    StripPartition,
    build_sphere_mesh,
    overlay,
    render_level_curve,
    render_phase_portrait,
    render_strips_plane,
    render_strips_sphere,
)

COMMANDS = ("plane", "sphere", "curve", "trajectory", "compare", "phase", "mesh")
SOURCES = ("f", "rational", "psi", "phi", "elliptic_wp")
EXTENSIONS = {"plane": "ppm", "curve": "ppm", "phase": "ppm", "sphere": "ply", "mesh": "ply",
              "trajectory": "csv", "compare": "csv"}


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    command: Optional[str] = None
    f: Optional[str] = None
    rational: Optional[str] = None
    psi: Optional[str] = None
    phi: Optional[str] = None
    elliptic_wp: bool = False
    lattice: str = "1,0.25+1.25i"
    region: str = "-2,2,-2,2"
    res: str = "800x800"
    bins: int = 24
    palette: str = "two-tone"
    z0: Optional[str] = None
    tau: float = 1.0
    h: float = 0.01
    tol: float = 1e-8
    steps: Optional[int] = None
    method: str = "rk4"
    depth: int = 5
    output: Optional[str] = None
    workers: int = 1

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


_FIELD_NAMES = {f.name for f in fields(RunConfig)}


def parse_complex(text: str) -> complex:
    """``a``, ``bi``, ``a+bi`` or ``a-bi`` with no spaces."""
    s = str(text).strip()
    if not s or " " in s:
        raise ConfigError(f"malformed complex number {text!r}")
    s = re.sub(r"(^|[+-])i$", r"\g<1>1i", s).replace("i", "j")
    try:
        return complex(s)
    except ValueError:
        raise ConfigError(f"malformed complex number {text!r}") from None


def _floats(text: str, n: int, what: str) -> list[float]:
    try:
        vals = [float(v) for v in str(text).split(",")]
    except ValueError:
        vals = []
    if len(vals) != n:
        raise ConfigError(f"--{what} expects {n} comma-separated numbers, got {text!r}")
    return vals


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="newtonflow",
        description="Render and integrate complex analytic vector fields through their Newton maps.",
        argument_default=argparse.SUPPRESS,
    )
    # validated later: argparse would check the suppressed default against choices
    p.add_argument("command", nargs="?", metavar="{" + ",".join(COMMANDS) + "}")
    src = p.add_argument_group("field source (exactly one)")
    src.add_argument("--f", metavar="EXPR", help="field f(z) of f(z) d/dz")
    src.add_argument("--rational", metavar="EXPR", help="rational field, e.g. \"z*(2*z-i)^2/(2*z+i)^2\"")
    src.add_argument("--psi", metavar="EXPR", help="distinguished parameter; field is 1/psi'")
    src.add_argument("--phi", metavar="EXPR", help="Newton map; field is -phi/phi'")
    src.add_argument("--elliptic-wp", dest="elliptic_wp", action="store_true", help="field -wp/wp' on --lattice")
    p.add_argument("--lattice", metavar="W1,W2", help="lattice generators (default 1,0.25+1.25i)")
    p.add_argument("--region", metavar="X0,X1,Y0,Y1")
    p.add_argument("--res", metavar="NxM")
    p.add_argument("--bins", type=int)
    p.add_argument("--palette", choices=("two-tone", "hue12"))
    p.add_argument("--z0", metavar="A+BI")
    p.add_argument("--tau", type=float)
    p.add_argument("--h", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--method", choices=("rk4", "rkf45"))
    p.add_argument("--depth", type=int)
    p.add_argument("-o", "--output", metavar="PATH")
    p.add_argument("--workers", type=int)
    p.add_argument("--config", metavar="JSON", help="config file; explicit flags take precedence")
    p.add_argument("--dump-config", dest="dump_config", action="store_true",
                   help="print the effective configuration as JSON and exit")
    return p


def _attach_values(parser: argparse.ArgumentParser, argv: Sequence[str]) -> list[str]:
    """Join ``--flag value`` into ``--flag=value`` so values such as ``-2,2,-1,1`` parse."""
    takes_value = {s for a in parser._actions if a.option_strings and a.nargs != 0 for s in a.option_strings}
    out, it = [], iter(argv)
    for tok in it:
        if tok in takes_value:
            nxt = next(it, None)
            out.append(tok if nxt is None else f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


def parse_args(argv: Sequence[str]) -> tuple[RunConfig, bool]:
    """Merge defaults < config file < flags.  Returns ``(config, dump_only)``."""
    parser = build_parser()
    ns = vars(parser.parse_args(_attach_values(parser, argv)))
    dump = ns.pop("dump_config", False)
    merged = asdict(RunConfig())
    cfg_path = ns.pop("config", None)
    if cfg_path is not None:
        try:
            with open(cfg_path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {cfg_path}: {exc}") from None
        unknown = set(data) - _FIELD_NAMES
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        merged.update(data)
    merged.update(ns)
    cfg = RunConfig(**merged)
    validate(cfg)
    return cfg, dump


def validate(cfg: RunConfig) -> None:
    if cfg.command is None:
        raise ConfigError("a command is required: " + ", ".join(COMMANDS))
    if cfg.command not in COMMANDS:
        raise ConfigError(f"unknown command {cfg.command!r}")
    given = [s for s in SOURCES if getattr(cfg, s)]
    if cfg.command != "mesh" and len(given) != 1:
        raise ConfigError(f"exactly one field source is required (got {len(given)})")
    if cfg.command == "mesh" and len(given) > 1:
        raise ConfigError("exactly one field source may be given")
    if cfg.command in ("curve", "trajectory", "compare") and cfg.z0 is None:
        raise ConfigError(f"{cfg.command} needs --z0")
    if cfg.z0 is not None:
        parse_complex(cfg.z0)
    _floats(cfg.region, 4, "region")
    _resolution(cfg.res)
    if cfg.bins < 2:
        raise ConfigError("--bins must be at least 2")
    if not 0 <= cfg.depth <= 8:
        raise ConfigError("--depth must be between 0 and 8")
    if cfg.h <= 0 or cfg.tol <= 0:
        raise ConfigError("--h and --tol must be positive")
    if cfg.workers < 1:
        raise ConfigError("--workers must be at least 1")
    if cfg.method not in ("rk4", "rkf45"):
        raise ConfigError("--method must be rk4 or rkf45")


def _resolution(text: str) -> tuple[int, int]:
    m = re.fullmatch(r"(\d+)x(\d+)", str(text))
    if not m or int(m.group(1)) < 1 or int(m.group(2)) < 1:
        raise ConfigError(f"--res expects NxM, got {text!r}")
    return int(m.group(1)), int(m.group(2))


def _lattice(cfg: RunConfig) -> Lattice:
    parts = str(cfg.lattice).split(",")
    if len(parts) != 2:
        raise ConfigError("--lattice expects two generators W1,W2")
    try:
        return Lattice(parse_complex(parts[0]), parse_complex(parts[1]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _expr(cfg: RunConfig, text: str):
    lattice = _lattice(cfg) if re.search(r"\bw(p|zeta|sigma)", text) else None
    return parse(text, lattice=lattice)


def build_field(cfg: RunConfig) -> FieldSpec:
    if cfg.elliptic_wp:
        return FieldSpec.elliptic_wp(_lattice(cfg))
    if cfg.rational:
        try:
            return FieldSpec.from_rational(rational_from_expr(_expr(cfg, cfg.rational)))
        except NotRationalError as exc:
            raise ConfigError(f"--rational: {exc}") from None
    if cfg.f:
        return FieldSpec.from_expression(_expr(cfg, cfg.f))
    if cfg.psi:
        return field_from_psi(_expr(cfg, cfg.psi))
    return field_from_phi(_expr(cfg, cfg.phi))


def _region(cfg: RunConfig) -> RasterRegion:
    x0, x1, y0, y1 = _floats(cfg.region, 4, "region")
    n, m = _resolution(cfg.res)
    try:
        return RasterRegion(x0, x1, y0, y1, n, m)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _csv(header: str, rows) -> str:
    buf = io.StringIO()
    buf.write(header + "\n")
    for row in rows:
        buf.write(",".join("nan" if math.isnan(v) else f"{v:.17g}" for v in row) + "\n")
    return buf.getvalue()


def run(cfg: RunConfig) -> str:
    """Execute one command and return the path written."""
    out = cfg.output or f"{cfg.command}.{EXTENSIONS[cfg.command]}"
    part = StripPartition.named(cfg.bins, cfg.palette)
    if cfg.command == "mesh":
        atomic_write(out, build_sphere_mesh(cfg.depth).to_ply())
        return out
    if cfg.command == "phase":
        text = cfg.f or cfg.rational or cfg.psi or cfg.phi
        fn = parse("wp(z)", lattice=_lattice(cfg)) if cfg.elliptic_wp else _expr(cfg, text)
        render_phase_portrait(fn, _region(cfg), cfg.workers).save(out)
        return out

    spec = build_field(cfg)
    if cfg.command == "plane":
        render_strips_plane(spec, _region(cfg), part, cfg.workers).save(out)
    elif cfg.command == "sphere":
        mesh = build_sphere_mesh(cfg.depth)
        atomic_write(out, mesh.to_ply(render_strips_sphere(spec, mesh, part, cfg.workers)))
    elif cfg.command == "curve":
        region = _region(cfg)
        z0 = parse_complex(cfg.z0)
        image = render_strips_plane(spec, region, part, cfg.workers)
        mask = render_level_curve(spec, z0, region, workers=cfg.workers)
        overlay(image, mask, (220, 20, 20)).save(out)
    elif cfg.command == "trajectory":
        z0 = parse_complex(cfg.z0)
        steps = cfg.steps or max(1, round(cfg.tau / cfg.h))
        traj = exact_trajectory(spec, z0, np.linspace(0.0, cfg.tau, steps + 1), strict=True)
        atomic_write(out, _csv("tau,re,im", [(t, z.real, z.imag) for t, z in traj.samples]))
    elif cfg.command == "compare":
        z0 = parse_complex(cfg.z0)
        if cfg.method == "rk4":
            steps = cfg.steps or max(1, round(cfg.tau / cfg.h))
            traj = rk4(spec, z0, cfg.h, steps)
        else:
            traj = rkf45(spec, z0, cfg.tau, cfg.tol)
        buf = io.StringIO()
        error_series(spec, z0, traj).write_csv(buf)
        atomic_write(out, buf.getvalue())
    return out


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    if not argv:
        parser.print_usage(sys.stderr)
        print("newtonflow: error: a command is required", file=sys.stderr)
        return 2
    try:
        cfg, dump = parse_args(argv)
    except SystemExit as exc:  # argparse already printed usage
        return 0 if exc.code == 0 else 2
    except ConfigError as exc:
        parser.print_usage(sys.stderr)
        print(f"newtonflow: error: {exc}", file=sys.stderr)
        return 2
    if dump:
        print(cfg.to_json())
        return 0
    try:
        run(cfg)
    except (ConfigError, ParseError, NoPsiError) as exc:
        print(f"newtonflow: error: {exc}", file=sys.stderr)
        return 2
    except (FlowError, RootFindingError, BasePointError, NotEllipticError, ArithmeticError) as exc:
        print(f"newtonflow: mathematical failure in {cfg.command}: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
