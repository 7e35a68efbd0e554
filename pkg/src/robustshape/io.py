"""Config files, field exports and run logs.

Config format: INI-style ``key = value`` lines under ``[section]`` headers,
``#`` comments. Sections and keys::

    [domain]    x0 y0 x1 y1 nx ny
    [source]    kind value left right split slope path
    [problem]   delta p
    [optimize]  M alpha m optimizer max_outer_iter move_limit kkt_tol
                objective_tol patience
    [state]     fixed_point_tol fixed_point_max_iter linear_tol
                zero_norm_guard relaxation
    [run]       output_dir seed

Unknown sections or keys are rejected. Missing keys take the defaults of
:class:`~robustshape.problem.ProblemSpec`, i.e. the unit-square benchmark.
"""
import configparser
import dataclasses
import json
import re

import numpy as np

from .errors import ParseError, ValidationError
from .grid import RectDomain, StructuredMesh
from .optimize import OptimizationConfig
from .problem import ProblemSpec, SourceSpec
from .state import StateConfig

_INT_KEYS = {"nx", "ny", "max_outer_iter", "patience", "fixed_point_max_iter", "seed"}
_STR_KEYS = {"kind", "path", "optimizer", "output_dir"}
_OPTIONAL_KEYS = {"zero_norm_guard"}

_SECTIONS = {
    "domain": ("x0", "y0", "x1", "y1", "nx", "ny"),
    "source": tuple(f.name for f in dataclasses.fields(SourceSpec)),
    "problem": ("delta", "p"),
    "optimize": (
        "M", "alpha", "m", "optimizer", "max_outer_iter", "move_limit",
        "kkt_tol", "objective_tol", "patience",
    ),
    "state": tuple(f.name for f in dataclasses.fields(StateConfig)),
    "run": ("output_dir", "seed"),
}


def _convert(section, key, raw):
    raw = raw.strip()
    if key in _STR_KEYS:
        return raw
    if key in _OPTIONAL_KEYS and raw.lower() in ("", "none", "auto"):
        return None
    try:
        if key in _INT_KEYS:
            return int(raw)
        value = float(raw)
    except ValueError:
        kind = "an integer" if key in _INT_KEYS else "a number"
        raise ValidationError(f"{section}.{key}", f"expected {kind}, got {raw!r}") from None
    if not np.isfinite(value):
        raise ValidationError(f"{section}.{key}", "must be finite")
    return value


def _key_lines(text):
    """Map ``(section, key)`` to its line number for error messages."""
    lines, section = {}, None
    for n, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"\[(.*)\]$", s)
        if m:
            section = m.group(1).strip()
        elif s and not s.startswith(("#", ";")) and "=" in s and section:
            lines[(section, s.split("=", 1)[0].strip())] = n
    return lines


def parse_config(text: str) -> ProblemSpec:
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",),
                                       comment_prefixes=("#", ";"), default_section="\0")
    parser.optionxform = str  # keys are case sensitive ("M" vs "m")
    try:
        parser.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ParseError("key outside of any [section]", exc.lineno) from None
    except configparser.DuplicateOptionError as exc:
        raise ParseError(f"duplicate key {exc.option!r}", exc.lineno) from None
    except configparser.DuplicateSectionError as exc:
        raise ParseError(f"duplicate section [{exc.section}]", exc.lineno) from None
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] if exc.errors else None
        raise ParseError("malformed line, expected 'key = value'", lineno) from None

    where = _key_lines(text)
    values = {}
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ValidationError(section, "unknown section")
        for key, raw in parser.items(section):
            if key not in _SECTIONS[section]:
                n = where.get((section, key))
                suffix = f" (line {n})" if n else ""
                raise ValidationError(f"{section}.{key}", f"unknown key{suffix}")
            values[(section, key)] = _convert(section, key, raw)
    return _build_spec(values)


def _build_spec(values) -> ProblemSpec:
    def pick(section):
        return {k: v for (s, k), v in values.items() if s == section}

    default = ProblemSpec()
    dom = pick("domain")
    nx = dom.pop("nx", default.nx)
    ny = dom.pop("ny", default.ny)
    run = pick("run")
    prob = pick("problem")

    def build(field, cls, **kw):
        try:
            return cls(**kw)
        except (TypeError, ValueError) as exc:
            raise ValidationError(field, str(exc)) from None

    domain = build("domain", RectDomain, **{**dataclasses.asdict(default.domain), **dom})
    source = build("source", SourceSpec, **{**dataclasses.asdict(default.source), **pick("source")})
    opt = build("optimize", OptimizationConfig, **pick("optimize"))
    state = build("state", StateConfig, **pick("state"))
    delta = prob.get("delta", default.delta)
    p = prob.get("p", default.p)
    if delta < 0:
        raise ValidationError("problem.delta", "delta must be nonnegative")
    if not p > 1:
        raise ValidationError("problem.p", "p must exceed 1")
    if nx < 1 or ny < 1:
        raise ValidationError("domain.nx" if nx < 1 else "domain.ny", "must be a positive integer")
    if opt.m > domain.area:
        raise ValidationError("optimize.m", "volume bound exceeds the domain area")
    return build(
        "problem", ProblemSpec,
        domain=domain, nx=nx, ny=ny, source=source, delta=delta, p=p,
        optimization=opt, state=state,
        output_dir=run.get("output_dir", default.output_dir), seed=run.get("seed", default.seed),
    )


def read_config(path) -> ProblemSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    return "none" if value is None else str(value)


def format_config(spec: ProblemSpec) -> str:
    """Serialise a spec; ``parse_config(format_config(s)) == s``."""
    groups = {
        "domain": {**dataclasses.asdict(spec.domain), "nx": spec.nx, "ny": spec.ny},
        "source": dataclasses.asdict(spec.source),
        "problem": {"delta": spec.delta, "p": spec.p},
        "optimize": dataclasses.asdict(spec.optimization),
        "state": dataclasses.asdict(spec.state),
        "run": {"output_dir": spec.output_dir, "seed": spec.seed},
    }
    out = []
    for section, keys in _SECTIONS.items():
        out.append(f"[{section}]")
        for key in keys:
            out.append(f"{key} = {_fmt(groups[section][key])}")
        out.append("")
    return "\n".join(out)


# fields -----------------------------------------------------------------

EXPORT_FORMATS = ("csv", "vtk", "pgm")


def export_field(mesh: StructuredMesh, values, fmt, path, name="value"):
    values = np.asarray(values, dtype=float)
    if values.shape != (mesh.n_nodes,):
        raise ValueError(f"field has {values.size} values, mesh has {mesh.n_nodes} nodes")
    if fmt == "csv":
        text = _csv(mesh, values)
    elif fmt == "vtk":
        text = _vtk(mesh, values, name)
    elif fmt == "pgm":
        text = _pgm(mesh, values)
    else:
        raise ValueError(f"unknown format {fmt!r}, expected one of {EXPORT_FORMATS}")
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(text)


def _g9(v):
    return f"{v:.9g}"


def _csv(mesh, values):
    rows = ["x,y,value"]
    rows += [f"{_g9(x)},{_g9(y)},{_g9(v)}" for (x, y), v in zip(mesh.nodes, values)]
    return "\n".join(rows) + "\n"


def _vtk(mesh, values, name):
    d = mesh.domain
    head = [
        "# vtk DataFile Version 3.0",
        name,
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {mesh.nx + 1} {mesh.ny + 1} 1",
        f"ORIGIN {_g9(d.x0)} {_g9(d.y0)} 0",
        f"SPACING {_g9(mesh.hx)} {_g9(mesh.hy)} 1",
        f"POINT_DATA {mesh.n_nodes}",
        f"SCALARS {name} double 1",
        "LOOKUP_TABLE default",
    ]
    return "\n".join(head + [_g9(v) for v in values]) + "\n"


def _pgm(mesh, values):
    lo, hi = values.min(), values.max()
    if hi > lo:
        gray = np.rint((values - lo) / (hi - lo) * 255).astype(int)
    else:
        gray = np.zeros(values.shape, dtype=int)
    # image rows run top to bottom, i.e. from y1 down to y0
    img = mesh.as_grid(gray)[::-1]
    lines = ["P2", f"{mesh.nx + 1} {mesh.ny + 1}", "255"]
    lines += [" ".join(map(str, row)) for row in img]
    return "\n".join(lines) + "\n"


def read_field(mesh: StructuredMesh, path) -> np.ndarray:
    """Read a CSV export back; node coordinates must match the mesh."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape != (mesh.n_nodes, 3):
        raise ValueError(f"{path}: expected {mesh.n_nodes} rows of x,y,value, got {data.shape}")
    tol = 1e-6 * max(mesh.hx, mesh.hy)
    if not np.allclose(data[:, :2], mesh.nodes, atol=tol, rtol=0):
        raise ValueError(f"{path}: node coordinates do not match the mesh")
    return data[:, 2].copy()


def read_vtk_header(path):
    """Return the DIMENSIONS tuple and POINT_DATA count of a legacy VTK file."""
    dims = count = None
    with open(path, encoding="ascii") as fh:
        for line in fh:
            parts = line.split()
            if parts and parts[0] == "DIMENSIONS":
                dims = tuple(int(v) for v in parts[1:4])
            elif parts and parts[0] == "POINT_DATA":
                count = int(parts[1])
                break
    return dims, count


# run log ----------------------------------------------------------------


def write_run_log(path, spec: ProblemSpec, result, note=""):
    """Plain-text run log: spec echo, one row per iteration, final summary."""
    lines = ["# spec"]
    lines += ["# " + line if line else "#" for line in format_config(spec).splitlines()]
    if note:
        lines.append(f"# note: {note}")
    lines.append("iter,objective,constraint,kkt,state_iters")
    for k, F, c, kkt, it in result.rows():
        lines.append(f"{k},{F:.10g},{c:.6e},{kkt:.6e},{it}")
    summary = {
        "objective": result.objective,
        "constraint": result.constraint_history[-1],
        "iterations": result.iterations,
        "converged": result.converged,
        "reason": result.reason,
        "wall_time": round(result.wall_time, 3),
    }
    lines.append("# summary " + json.dumps(summary))
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_run_log(path):
    """Return ``(spec, rows, summary)`` from :func:`write_run_log` output."""
    echo, rows, summary = [], [], None
    with open(path, encoding="ascii") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("# summary "):
                summary = json.loads(line[len("# summary "):])
            elif line == "# spec" or line.startswith("# note:"):
                continue
            elif line.startswith("#"):
                echo.append(line[2:] if line.startswith("# ") else "")
            elif line and not line.startswith("iter"):
                k, F, c, kkt, it = line.split(",")
                rows.append((int(k), float(F), float(c), float(kkt), int(it)))
    return parse_config("\n".join(echo)), rows, summary
