"""INI run configuration.

Sections and keys (anything else is an error)::

    [grid]     nx, nz, Lx, d
    [params]   rho0, mu, eta, cp, mu0, M_S, alpha, C_p
    [law]      name, slope, s, values, chi0, chi1
    [forcing]  T, nsteps, F, g, variant, zeta, zeta_plus
    [solver]   tol_period, max_outer, damping, anderson_depth, picard_tol,
               picard_max, inner_tol, inner_max, inner, potential_damping,
               regularized, epsilon, force_form
    [output]   snapshot_every, directory

Forcing descriptors (``T``, ``Lx`` and ``d`` come from the other keys)::

    F     zero | cosmode(amp, mx, mz, k)
    g     const(c) | cos(mean, amp, k)
    zeta  const(c) | mode(mean, amp, mx, k) | ramp(c0, rate) | csv(path)
          | heat(amp, mx, k)

``cosmode`` is ``amp cos(2 pi k t/T) cos(mx pi x/Lx) cos(mz pi z/d)``;
``mode`` is ``mean + amp cos(mx pi x/Lx) cos(2 pi k t/T)``; ``heat`` builds
admissible data from the driver ``amp cos(mx pi x/Lx) cos(2 pi k t/T)``.
"""
from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .constitutive import PhysParams, make_law
from .errors import CompatibilityError, ConfigError
from .grid import Grid
from .hydro import KelvinForceSpec
from .magnetostatics import PotentialSolveOptions
from .periodic import Forcing, PeriodicOptions, poincare_constant
from .thermal import BoundaryVariant, ZetaProfile, check_neumann_compatible, construct_admissible_zeta

SCHEMA = {
    "grid": {"nx": int, "nz": int, "Lx": float, "d": float},
    "params": {"rho0": float, "mu": float, "eta": float, "cp": float, "mu0": float, "M_S": float,
               "alpha": float, "C_p": float},
    "law": {"name": str, "slope": float, "s": "floats", "values": "floats", "chi0": float, "chi1": float},
    "forcing": {"T": float, "nsteps": int, "F": str, "g": str, "variant": str, "zeta": str, "zeta_plus": str},
    "solver": {"tol_period": float, "max_outer": int, "damping": float, "anderson_depth": int,
               "picard_tol": float, "picard_max": int, "inner_tol": float, "inner_max": int, "inner": str,
               "potential_damping": float, "regularized": bool, "epsilon": float, "force_form": str},
    "output": {"snapshot_every": int, "directory": str},
}

DEFAULTS = {
    "grid": {"nx": 64, "nz": 64, "Lx": 1.0, "d": 1.0},
    "params": {"rho0": 1.0, "mu": 1.0, "eta": 1.0, "cp": 1.0, "mu0": 1.0, "M_S": 1.0, "alpha": 0.0},
    "law": {"name": "langevin"},
    "forcing": {"T": 1.0, "nsteps": 200, "F": "zero", "g": "const(0)", "variant": "dirichlet_bottom",
                "zeta": "const(1)"},
    "solver": {"tol_period": 1e-8, "max_outer": 50, "damping": 1.0, "anderson_depth": 3,
               "picard_tol": 1e-10, "picard_max": 200, "inner_tol": 1e-13, "inner_max": 5000,
               "inner": "direct", "regularized": False, "epsilon": 0.0, "force_form": "pointwise"},
    "output": {"snapshot_every": 0, "directory": "out"},
}

_CALL = re.compile(r"^\s*([a-z_]+)\s*(?:\((.*)\))?\s*$", re.IGNORECASE)


@dataclass(frozen=True)
class RunConfig:
    """Parsed configuration: one dict per section, defaults filled in."""

    grid: dict
    params: dict
    law: dict
    forcing: dict
    solver: dict
    output: dict
    base_dir: str = field(default=".", compare=False)

    def section(self, name) -> dict:
        return getattr(self, name)


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

def _line_index(text: str):
    """``(section, key) -> line number`` and ``section -> line number``."""
    keys, sections = {}, {}
    current = None
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        m = re.match(r"^\[([^\]]+)\]$", line)
        if m:
            current = m.group(1).strip()
            sections.setdefault(current, n)
            continue
        m = re.match(r"^([^=:]+?)\s*[=:]", line)
        if m and current is not None:
            keys.setdefault((current, m.group(1).strip()), n)
    return keys, sections


def _convert(kind, raw: str):
    if kind is bool:
        v = raw.strip().lower()
        if v in ("1", "true", "yes", "on"):
            return True
        if v in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if kind == "floats":
        return tuple(float(p) for p in raw.replace(",", " ").split())
    if kind is int:
        return int(raw)
    if kind is float:
        v = float(raw)
        if not math.isfinite(v):
            raise ValueError(f"expected a finite number, got {raw!r}")
        return v
    return raw.strip()


def parse_descriptor(text: str):
    """``'mode(1, 0.5, 1, 1)' -> ('mode', [1.0, 0.5, 1.0, 1.0])``; ``csv``
    keeps its argument as a string."""
    m = _CALL.match(text)
    if not m:
        raise ValueError(f"malformed descriptor {text!r}")
    name = m.group(1).lower()
    arg = (m.group(2) or "").strip()
    if name == "csv":
        return name, [arg.strip("'\"")]
    args = [float(a) for a in arg.split(",")] if arg else []
    return name, args


def parse_config(text: str, base_dir=".") -> RunConfig:
    """Parse and fully validate a configuration text.

    Raises :class:`ConfigError` with a line number for anything malformed,
    unknown or physically inadmissible.
    """
    keys, sections = _line_index(text)
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        raise ConfigError(f"line {line}: {exc.message if hasattr(exc, 'message') else exc}"
                          if line else f"malformed config: {exc}") from None

    data = {name: dict(vals) for name, vals in DEFAULTS.items()}
    for sec in cp.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"line {sections.get(sec, '?')}: unknown section [{sec}]")
        for key, raw in cp.items(sec):
            line = keys.get((sec, key), "?")
            if key not in SCHEMA[sec]:
                raise ConfigError(f"line {line}: unknown key '{key}' in [{sec}]")
            try:
                data[sec][key] = _convert(SCHEMA[sec][key], raw)
            except ValueError as exc:
                raise ConfigError(f"line {line}: [{sec}] {key}: {exc}") from None
    cfg = RunConfig(**data, base_dir=str(base_dir))
    try:
        build(cfg)
    except ConfigError:
        raise
    except (ValueError, CompatibilityError, KeyError, OSError) as exc:
        raise ConfigError(_locate(exc, keys)) from None
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, base_dir=path.parent)


class _Located(ValueError):
    def __init__(self, section, key, msg):
        super().__init__(msg)
        self.section, self.key = section, key


def _locate(exc, keys):
    if isinstance(exc, _Located):
        line = keys.get((exc.section, exc.key))
        where = f"line {line}" if line else "default value"
        return f"{where}: [{exc.section}] {exc.key}: {exc}"
    return f"invalid configuration: {exc}"


def serialize(cfg: RunConfig) -> str:
    """INI text that parses back to an equal :class:`RunConfig`."""
    out = []
    for sec in SCHEMA:
        out.append(f"[{sec}]")
        for key, val in cfg.section(sec).items():
            if isinstance(val, tuple):
                val = ", ".join(repr(v) for v in val)
            elif isinstance(val, float):
                val = repr(val)
            out.append(f"{key} = {val}")
        out.append("")
    return "\n".join(out)


# ---------------------------------------------------------------------------
# domain objects
# ---------------------------------------------------------------------------

@dataclass
class Setup:
    grid: Grid
    params: PhysParams
    law: object
    forcing: Forcing
    spec: KelvinForceSpec
    options: PeriodicOptions
    C_p: float


def _wrap(section, key, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except _Located:
        raise
    except (ValueError, CompatibilityError, OSError) as exc:
        raise _Located(section, key, str(exc)) from None


def _nargs(name, args, n):
    if len(args) != n:
        raise ValueError(f"{name}(...) takes {n} arguments, got {len(args)}")


def source_descriptor(text, grid: Grid, T):
    name, args = parse_descriptor(text)
    if name == "zero":
        _nargs(name, args, 0)
        return lambda t: 0.0
    if name == "const":
        _nargs(name, args, 1)
        if args[0] != 0.0:
            raise ValueError("F must have zero spatial mean; const(c) is only admissible for c = 0")
        return lambda t: 0.0
    if name == "cosmode":
        _nargs(name, args, 4)
        amp, mx, mz, k = args
        if mx == 0 and mz == 0:
            raise ValueError("cosmode(amp, 0, 0, k) has nonzero spatial mean; F must have zero mean")
        _integer(k, "time mode k")
        xc, zc = grid.centers()
        shape = np.cos(mx * np.pi * xc / grid.Lx) * np.cos(mz * np.pi * zc / grid.d)
        if abs(shape.mean()) > 1e-12 * np.abs(shape).max():
            raise ValueError("cosmode with non-integer wavenumbers has nonzero spatial mean")
        return lambda t: amp * math.cos(2.0 * math.pi * k * t / T) * shape
    raise ValueError(f"unknown F descriptor {name!r}")


def gravity_descriptor(text, T):
    name, args = parse_descriptor(text)
    if name == "const":
        _nargs(name, args, 1)
        if args[0] < 0:
            raise ValueError("gravity magnitude must be >= 0")
        c = args[0]
        return lambda t: c
    if name == "cos":
        _nargs(name, args, 3)
        mean, amp, k = args
        _integer(k, "time mode k")
        if mean - abs(amp) < 0:
            raise ValueError("gravity magnitude must stay >= 0")
        return lambda t: mean + amp * math.cos(2.0 * math.pi * k * t / T)
    raise ValueError(f"unknown g descriptor {name!r}")


def _integer(v, what):
    if v != int(v):
        raise ValueError(f"{what} must be an integer for time-periodicity")


def zeta_descriptor(text, grid: Grid, T, params: PhysParams, base_dir=".", nt=None) -> ZetaProfile:
    name, args = parse_descriptor(text)
    x = grid.xc
    if name == "const":
        _nargs(name, args, 1)
        return ZetaProfile.constant(args[0], grid, T)
    if name == "mode":
        _nargs(name, args, 4)
        mean, amp, mx, k = args
        w = 2.0 * math.pi * k / T
        prof = ZetaProfile.from_function(
            lambda t, xx: mean + amp * np.cos(mx * np.pi * xx / grid.Lx) * math.cos(w * t),
            lambda t, xx: -amp * w * np.cos(mx * np.pi * xx / grid.Lx) * math.sin(w * t), grid, T)
        check_neumann_compatible(prof, grid.Lx)
        return prof
    if name == "ramp":
        _nargs(name, args, 2)
        c0, rate = args
        return ZetaProfile.from_function(lambda t, xx: c0 + rate * t + 0.0 * xx,
                                         lambda t, xx: rate + 0.0 * xx, grid, T)
    if name == "heat":
        _nargs(name, args, 3)
        amp, mx, k = args
        if mx == 0:
            raise ValueError("heat driver needs mx >= 1 (zero space-time mean)")
        _integer(k, "time mode k")
        nt = nt or 64
        t = np.arange(nt) * T / nt
        f = amp * np.cos(2.0 * math.pi * k * t / T)[:, None] * np.cos(mx * np.pi * x / grid.Lx)[None, :]
        return construct_admissible_zeta(f, params, grid, T)
    if name == "csv":
        from .io import read_zeta_csv

        path = Path(args[0])
        if not path.is_absolute():
            path = Path(base_dir) / path
        times, xs, vals = read_zeta_csv(path)
        return zeta_from_table(times, xs, vals, grid, T)
    raise ValueError(f"unknown zeta descriptor {name!r}")


def zeta_from_table(times, xs, vals, grid: Grid, T) -> ZetaProfile:
    """Samples on a tensor grid ``(t, x_hat)``, linearly resampled in ``x``
    onto the cell centres."""
    samples = np.array([np.interp(grid.xc, xs, row) for row in vals])
    include_endpoint = abs(times[-1] - T) <= 1e-12 * T
    nt = len(times) - (1 if include_endpoint else 0)
    expected = np.arange(len(times)) * T / nt
    if abs(times[0]) > 1e-12 * T or np.abs(times - expected).max() > 1e-9 * T:
        raise ValueError("zeta CSV times must be uniform over [0, T)")
    return ZetaProfile.from_samples(samples, grid, T, include_endpoint=include_endpoint)


def build(cfg: RunConfig) -> Setup:
    """Turn a configuration into validated domain objects."""
    g, p, lw, fo, so = cfg.grid, cfg.params, cfg.law, cfg.forcing, cfg.solver
    grid = _wrap("grid", "nx", lambda: Grid(g["nx"], g["nz"], g["Lx"], g["d"]))
    T = fo["T"]
    if not T > 0:
        raise _Located("forcing", "T", "period must be positive")
    if fo["nsteps"] < 1:
        raise _Located("forcing", "nsteps", "must be >= 1")
    phys = {k: p[k] for k in ("rho0", "mu", "eta", "cp", "mu0", "M_S", "alpha")}
    for k, v in phys.items():
        if not (v >= 0 if k == "alpha" else v > 0):
            raise _Located("params", k, "must be positive" if k != "alpha" else "must be >= 0")
    base = PhysParams(**phys)
    law_kw = {k: v for k, v in lw.items() if k != "name"}
    if lw["name"].lower() == "tabulated" and not {"s", "values", "chi0", "chi1"} <= set(law_kw):
        raise _Located("law", "name", "tabulated law needs s, values and the bounds chi0, chi1")
    law = _wrap("law", "name", make_law, lw["name"], **law_kw)

    kind = fo["variant"]
    zm = _wrap("forcing", "zeta", zeta_descriptor, fo["zeta"], grid, T, base, cfg.base_dir)
    zp = None
    if kind == "dirichlet_both":
        if "zeta_plus" not in fo:
            raise _Located("forcing", "variant", "dirichlet_both needs zeta_plus")
        zp = _wrap("forcing", "zeta_plus", zeta_descriptor, fo["zeta_plus"], grid, T, base, cfg.base_dir)
    elif "zeta_plus" in fo:
        raise _Located("forcing", "zeta_plus", "only used with variant = dirichlet_both")
    variant = _wrap("forcing", "variant", BoundaryVariant, kind, zm, zp)
    F = _wrap("forcing", "F", source_descriptor, fo["F"], grid, T)
    gfun = _wrap("forcing", "g", gravity_descriptor, fo["g"], T)
    forcing = _wrap("forcing", "F", Forcing, T, variant, F, gfun)
    params = PhysParams(**phys, tau_star=variant.tau_star)

    spec = _wrap("solver", "epsilon", KelvinForceSpec, so["regularized"], so["epsilon"], so["force_form"])
    _wrap("solver", "epsilon", spec.validate, grid)
    popts = _wrap("solver", "picard_tol", PotentialSolveOptions, so["picard_tol"], so["picard_max"],
                  so["inner_tol"], so["inner_max"], so.get("potential_damping"), so["inner"])
    opts = _wrap("solver", "tol_period", PeriodicOptions, so["tol_period"], so["max_outer"], so["damping"],
                 so["anderson_depth"], fo["nsteps"], popts)
    if cfg.output["snapshot_every"] < 0:
        raise _Located("output", "snapshot_every", "must be >= 0")
    C_p = p.get("C_p", poincare_constant(grid))
    if not C_p > 0:
        raise _Located("params", "C_p", "must be positive")
    return Setup(grid, params, law, forcing, spec, opts, C_p)
