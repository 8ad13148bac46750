"""Snapshots (legacy VTK, ASCII), diagnostics CSV and zeta sample CSV."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .constitutive import PhysParams
from .grid import Grid, VectorField, divergence_fc, lp_norm, norms
from .magnetostatics import field_H, field_magnitude

DIAG_VERSION = "ferroperiod-diagnostics v1"
FMT = "%.17g"


# ---------------------------------------------------------------------------
# snapshots
# ---------------------------------------------------------------------------

def _xfast(a) -> np.ndarray:
    """Cell array ``a[i, j]`` flattened with ``i`` (x) fastest."""
    return np.asarray(a, dtype=float).T.ravel()


def _write_values(fh, values, per_line=6):
    values = np.asarray(values, dtype=float).ravel()
    for k in range(0, values.size, per_line):
        fh.write(" ".join(FMT % v for v in values[k:k + per_line]))
        fh.write("\n")


def write_snapshot(state, grid: Grid, path, pressure=None, H: VectorField | None = None):
    """Write ``tau_tilde``, ``phi``, ``|H|``, cell-averaged ``U`` and ``p`` as
    point data on the cell centres. The exact face velocities and the time
    ride along as dataset field data, so a snapshot reloads losslessly."""
    path = Path(path)
    H = field_H(state.phi, grid) if H is None else H
    p = grid.zeros() if pressure is None else np.asarray(pressure, dtype=float)
    ux, uz = state.U.cell_average()
    n = grid.nx * grid.nz
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(f"ferroperiod snapshot t={state.t!r}\n")
        fh.write("ASCII\nDATASET STRUCTURED_POINTS\n")
        fh.write("FIELD FieldData 3\n")
        fh.write("TIME 1 1 double\n")
        _write_values(fh, [state.t])
        fh.write(f"u_faces 1 {(grid.nx + 1) * grid.nz} double\n")
        _write_values(fh, state.U.u.T.ravel())
        fh.write(f"w_faces 1 {grid.nx * (grid.nz + 1)} double\n")
        _write_values(fh, state.U.w.T.ravel())
        fh.write(f"DIMENSIONS {grid.nx} {grid.nz} 1\n")
        fh.write(f"ORIGIN {FMT % (grid.dx / 2)} {FMT % (grid.dz / 2)} 0\n")
        fh.write(f"SPACING {FMT % grid.dx} {FMT % grid.dz} 1\n")
        fh.write(f"POINT_DATA {n}\n")
        for name, arr in (("tau_tilde", state.tau_tilde), ("phi", state.phi),
                          ("H_magnitude", field_magnitude(H)), ("pressure", p)):
            fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
            _write_values(fh, _xfast(arr))
        fh.write("VECTORS velocity double\n")
        vec = np.column_stack([_xfast(ux), _xfast(uz), np.zeros(n)])
        _write_values(fh, vec, per_line=3)


@dataclass
class Snapshot:
    t: float
    nx: int
    nz: int
    dx: float
    dz: float
    fields: dict


def read_snapshot(path) -> Snapshot:
    """Parse a file written by :func:`write_snapshot`; cell arrays come back
    with shape ``(nx, nz)`` and the face arrays with their MAC shapes."""
    tokens = Path(path).read_text().split("\n")
    it = iter(tokens[4:])
    header = {}
    fields_ = {}
    pending = []

    def numbers(count):
        out = []
        while len(out) < count:
            out.extend(float(v) for v in next(it).split())
        return np.array(out)

    for line in it:
        parts = line.split()
        if not parts:
            continue
        key = parts[0]
        if key == "FIELD":
            for _ in range(int(parts[2])):
                name, _, ntup, _ = next(it).split()
                pending.append((name, numbers(int(ntup))))
        elif key in ("DIMENSIONS", "ORIGIN", "SPACING"):
            header[key] = [float(v) for v in parts[1:]]
        elif key == "POINT_DATA":
            header["n"] = int(parts[1])
        elif key == "SCALARS":
            next(it)
            fields_[parts[1]] = numbers(header["n"])
        elif key == "VECTORS":
            fields_[parts[1]] = numbers(3 * header["n"]).reshape(-1, 3)
    nx, nz = int(header["DIMENSIONS"][0]), int(header["DIMENSIONS"][1])
    out = {}
    for name, arr in fields_.items():
        if arr.ndim == 2:
            out[name + "_x"] = arr[:, 0].reshape(nz, nx).T
            out[name + "_z"] = arr[:, 1].reshape(nz, nx).T
        else:
            out[name] = arr.reshape(nz, nx).T
    t = 0.0
    for name, arr in pending:
        if name == "TIME":
            t = float(arr[0])
        elif name == "u_faces":
            out[name] = arr.reshape(nz, nx + 1).T
        elif name == "w_faces":
            out[name] = arr.reshape(nz + 1, nx).T
    dx, dz = header["SPACING"][:2]
    return Snapshot(t, nx, nz, dx, dz, out)


def state_from_snapshot(snap: Snapshot):
    from .periodic import State

    U = VectorField(snap.fields["u_faces"].copy(), snap.fields["w_faces"].copy())
    return State(U, snap.fields["tau_tilde"].copy(), snap.fields["phi"].copy(), snap.t)


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

@dataclass
class DiagnosticsRecord:
    kind: str
    iteration: int
    t: float
    E: float
    U_L2: float
    U_H1: float
    tau_L2: float
    tau_H1: float
    tau_min: float
    tau_max: float
    div_max: float
    H_L2: float
    H_L3: float
    picard_iterations: int
    defect: float


DIAG_COLUMNS = [f.name for f in fields(DiagnosticsRecord)]


def compute_diagnostics(state, grid: Grid, params: PhysParams, variant, H: VectorField | None = None,
                        picard_iterations=0, kind="step", iteration=0, defect=math.nan) -> DiagnosticsRecord:
    """Record for one state. ``|grad tau_tilde|`` uses the variant's
    boundary tag with homogeneous data."""
    H = field_H(state.phi, grid) if H is None else H
    uL2, uH1, _ = norms(state.U, grid)
    robin = params.eta if variant.bc == "robin_bottom" else None
    tL2, tH1, _ = norms(state.tau_tilde, grid, variant.bc, robin_eta=robin)
    tau = state.tau_tilde + variant.offset(state.t, grid)
    E = params.rho0 * (uL2 ** 2 + params.cp * tL2 ** 2)
    return DiagnosticsRecord(kind, int(iteration), float(state.t), E, uL2, uH1, tL2, tH1,
                             float(tau.min()), float(tau.max()),
                             float(np.abs(divergence_fc(state.U, grid)).max()),
                             norms(H, grid)[0], lp_norm(H, grid, 3.0), int(picard_iterations), float(defect))


class DiagnosticsWriter:
    """Append-only CSV sink; every row is flushed as it is written."""

    def __init__(self, path):
        self.path = Path(path)
        self._fh = open(self.path, "w", newline="")
        self._fh.write(f"# {DIAG_VERSION}\n")
        self._w = csv.writer(self._fh)
        self._w.writerow(DIAG_COLUMNS)
        self._fh.flush()

    def write(self, rec: DiagnosticsRecord):
        row = []
        for name in DIAG_COLUMNS:
            v = getattr(rec, name)
            row.append(FMT % v if isinstance(v, float) else v)
        self._w.writerow(row)
        self._fh.flush()

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_diagnostics(path):
    """Rows as dicts of floats (``kind`` kept as a string)."""
    with open(path, newline="") as fh:
        first = fh.readline().strip()
        if first != f"# {DIAG_VERSION}":
            raise ValueError(f"unsupported diagnostics header {first!r}")
        rows = []
        for row in csv.DictReader(fh):
            rows.append({k: (v if k == "kind" else float(v)) for k, v in row.items()})
    return rows


# ---------------------------------------------------------------------------
# zeta samples
# ---------------------------------------------------------------------------

def write_zeta_csv(path, times, x, values):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "x", "value"])
        for k, t in enumerate(times):
            for i, xi in enumerate(x):
                w.writerow([FMT % t, FMT % xi, FMT % values[k][i]])


def read_zeta_csv(path):
    """``(times, x, values[nt, nx])`` from long-format ``t, x, value`` rows
    on a tensor grid."""
    data = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for n, row in enumerate(reader, start=1):
            if not row or row[0].strip().startswith("#"):
                continue
            if n == 1 and not _is_number(row[0]):
                continue
            if len(row) != 3:
                raise ValueError(f"{path}:{n}: expected 3 columns (t, x, value)")
            t, x, v = (float(c) for c in row)
            data[(t, x)] = v
    times = np.array(sorted({k[0] for k in data}))
    xs = np.array(sorted({k[1] for k in data}))
    if len(data) != times.size * xs.size:
        raise ValueError(f"{path}: samples do not form a (t, x) tensor grid")
    values = np.array([[data[(t, x)] for x in xs] for t in times])
    return times, xs, values


def _is_number(s):
    try:
        float(s)
        return True
    except ValueError:
        return False
