"""Config parsing, run orchestration, file emitters and the ``fracfem`` command.

Configs are TOML. Parsing is strict: unknown keys are errors, and every
problem found is reported, not just the first one.
"""
import argparse
import hashlib
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from ._accel import set_num_threads
from .assembly import ElementQuadrature
from .fespace import FESpace
from .flow import SIDES, BoundarySegment, FractureInterface, LineInterface, solve_flow
from .flow import ConfigError as FlowConfigError
from .geometry import BoxDomain, Fracture, GeometryError, MaterialField, MatrixRegion
from .linalg import SolverError
from .mesh import audit_mesh, build_mesh
from .transport import (LIMITERS, FLUXES, TransportConfig, build_transport_operators,
                        darcy_velocity, run_transport)

SCHEMA_VERSION = 1
EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3
FMT = ".17g"


class ConfigError(FlowConfigError):
    """Raised with the full list of validation problems in ``errors``."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


# ------------------------------------------------------------------ config
@dataclass
class SampleSpec:
    id: str
    start: tuple
    end: tuple
    n: int = 101
    fields: tuple = ("pressure",)


@dataclass
class RunConfig:
    version: int
    domain: BoxDomain
    material: MaterialField
    be_x: int
    be_y: int
    amr_steps: int
    boundary: list
    stabilize: bool = True
    solver: str = "auto"
    transport: TransportConfig = None
    interfaces: dict = field(default_factory=dict)
    samples: list = field(default_factory=list)
    output_dir: str = "out"
    hash: str = ""
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def fractures(self):
        return self.material.fractures


class _Checker:
    """Collects errors while walking the parsed tree."""

    def __init__(self):
        self.errors = []

    def err(self, msg):
        self.errors.append(msg)

    def table(self, data, path, required=(), optional=()):
        if not isinstance(data, dict):
            self.err(f"{path}: expected a table")
            return {}
        allowed = set(required) | set(optional)
        for key in data:
            if key not in allowed:
                self.err(f"{path}.{key}: unknown key")
        for key in required:
            if key not in data:
                self.err(f"{path}.{key}: required key missing")
        return data

    def number(self, data, key, path, default=None, positive=False, nonneg=False):
        if key not in data:
            return default
        v = data[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not np.isfinite(v):
            self.err(f"{path}.{key}: expected a finite number")
            return default
        if positive and not v > 0:
            self.err(f"{path}.{key}: must be positive")
        if nonneg and v < 0:
            self.err(f"{path}.{key}: must be non-negative")
        return float(v)

    def integer(self, data, key, path, default=None, minimum=None):
        if key not in data:
            return default
        v = data[key]
        if isinstance(v, bool) or not isinstance(v, int):
            self.err(f"{path}.{key}: expected an integer")
            return default
        if minimum is not None and v < minimum:
            self.err(f"{path}.{key}: must be >= {minimum}")
        return v

    def vector(self, data, key, path, size):
        if key not in data:
            return None
        v = data[key]
        ok = (isinstance(v, list) and len(v) == size
              and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v))
        if not ok:
            self.err(f"{path}.{key}: expected {size} numbers")
            return None
        return tuple(float(x) for x in v)

    def choice(self, data, key, path, options, default):
        v = data.get(key, default)
        if v not in options:
            self.err(f"{path}.{key}: must be one of {list(options)}")
            return default
        return v

    def boolean(self, data, key, path, default):
        v = data.get(key, default)
        if not isinstance(v, bool):
            self.err(f"{path}.{key}: expected true or false")
            return default
        return v

    def array(self, data, key, path):
        v = data.get(key, [])
        if not isinstance(v, list):
            self.err(f"{path}: expected an array of tables")
            return []
        return v


def config_hash(text):
    if isinstance(text, str):
        text = text.encode()
    return hashlib.sha256(text).hexdigest()[:16]


def _segment(ck, item, path, domain, kinds=("dirichlet", "neumann"), kind=None):
    keys = ["side", "value"] + ([] if kind else ["kind"])
    ck.table(item, path, required=keys, optional=("start", "end"))
    side = ck.choice(item, "side", path, SIDES, None)
    k = kind or ck.choice(item, "kind", path, kinds, None)
    value = ck.number(item, "value", path)
    if side is None or k is None or value is None or domain is None:
        return None
    lo, hi = (domain.x0, domain.x1) if side in ("bottom", "top") else (domain.y0, domain.y1)
    s = ck.number(item, "start", path, lo)
    e = ck.number(item, "end", path, hi)
    if s is None or e is None:
        return None
    tol = 1e-12 * max(domain.width, domain.height)
    if not (lo - tol <= s < e <= hi + tol):
        ck.err(f"{path}: segment [{s}, {e}] must lie on the {side} side [{lo}, {hi}] with start < end")
        return None
    return BoundarySegment(side, s, e, k, value)


def parse_config(text):
    """Validated ``RunConfig`` from TOML text; raises ``ConfigError`` listing all problems."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"syntax: {exc}"]) from exc
    ck = _Checker()
    top = ck.table(data, "config", required=("version", "domain", "mesh"),
                   optional=("matrix", "fracture", "flow", "transport", "postprocess", "output"))
    version = ck.integer(top, "version", "config")
    if version is not None and version != SCHEMA_VERSION:
        ck.err(f"config.version: unsupported schema version {version} (expected {SCHEMA_VERSION})")

    domain = None
    if "domain" in top:
        d = ck.table(top["domain"], "domain", required=("bounds",))
        b = ck.vector(d, "bounds", "domain", 4)
        if b is not None:
            try:
                domain = BoxDomain(*b)
            except GeometryError as exc:
                ck.err(f"domain.bounds: {exc}")

    regions = []
    for i, item in enumerate(ck.array(top, "matrix", "matrix")):
        p = f"matrix[{i}]"
        ck.table(item, p, required=("k", "phi"), optional=("box",))
        k = ck.number(item, "k", p, positive=True)
        phi = ck.number(item, "phi", p, positive=True)
        box = ck.vector(item, "box", p, 4) if "box" in item else (domain.bounds if domain else None)
        if None not in (k, phi, box):
            try:
                regions.append(MatrixRegion(box, k, phi))
            except GeometryError as exc:
                ck.err(f"{p}: {exc}")
    if "matrix" not in top:
        ck.err("matrix: at least one matrix region is required")

    fractures = []
    for i, item in enumerate(ck.array(top, "fracture", "fracture")):
        p = f"fracture[{i}]"
        ck.table(item, p, required=("k", "phi"), optional=("start", "end", "aperture", "corners", "name"))
        k = ck.number(item, "k", p, positive=True)
        phi = ck.number(item, "phi", p, positive=True)
        try:
            if "corners" in item:
                corners = item["corners"]
                fractures.append(Fracture.from_corners(np.asarray(corners, dtype=float), k or 1.0, phi or 1.0))
            else:
                a = ck.vector(item, "start", p, 2)
                b = ck.vector(item, "end", p, 2)
                ap = ck.number(item, "aperture", p, positive=True)
                if None in (a, b, ap):
                    ck.err(f"{p}: needs start, end and aperture, or corners")
                    continue
                fractures.append(Fracture.from_segment(a, b, ap, k or 1.0, phi or 1.0))
        except (GeometryError, ValueError, TypeError) as exc:
            ck.err(f"{p}: {exc}")

    material = None
    if domain is not None and regions:
        try:
            material = MaterialField(domain, regions, fractures)
        except GeometryError as exc:
            ck.err(f"geometry: {exc}")

    be_x = be_y = amr = None
    if "mesh" in top:
        m = ck.table(top["mesh"], "mesh", required=("be_x", "amr_steps"), optional=("be_y", "import"))
        if "import" in m:
            ck.err("mesh.import: resolved-mesh import is not supported; use be_x/be_y/amr_steps")
        be_x = ck.integer(m, "be_x", "mesh", minimum=1)
        be_y = ck.integer(m, "be_y", "mesh", be_x, minimum=1)
        amr = ck.integer(m, "amr_steps", "mesh", minimum=0)

    flow = ck.table(top.get("flow", {}), "flow", optional=("stabilize", "solver", "bc"))
    stabilize = ck.boolean(flow, "stabilize", "flow", True)
    solver = ck.choice(flow, "solver", "flow", ("auto", "direct", "cg", "bicgstab"), "auto")
    boundary = []
    for i, item in enumerate(ck.array(flow, "bc", "flow.bc")):
        seg = _segment(ck, item, f"flow.bc[{i}]", domain)
        if seg is not None:
            boundary.append(seg)
    if "flow" in top and not any(s.kind == "dirichlet" for s in boundary):
        ck.err("flow.bc: at least one dirichlet segment is required")
    elif "flow" not in top:
        ck.err("flow: required table missing")
    _check_overlaps(ck, boundary, "flow.bc")

    transport = None
    if "transport" in top:
        t = ck.table(top["transport"], "transport",
                     optional=("enabled", "dt", "t_final", "c0", "limiter", "flux", "snapshots", "inflow"))
        if ck.boolean(t, "enabled", "transport", True):
            dt = ck.number(t, "dt", "transport", positive=True)
            tf = ck.number(t, "t_final", "transport", positive=True)
            if dt is None or tf is None:
                ck.err("transport: dt and t_final are required when enabled")
            c0 = ck.number(t, "c0", "transport", 0.0)
            limiter = ck.choice(t, "limiter", "transport", LIMITERS, "zalesak")
            flux = ck.choice(t, "flux", "transport", FLUXES, "linearized")
            snaps = t.get("snapshots", [])
            if not isinstance(snaps, list) or not all(
                    isinstance(x, (int, float)) and not isinstance(x, bool) for x in snaps):
                ck.err("transport.snapshots: expected an array of times")
                snaps = []
            inflow = []
            for i, item in enumerate(ck.array(t, "inflow", "transport.inflow")):
                seg = _segment(ck, item, f"transport.inflow[{i}]", domain, kind="dirichlet")
                if seg is not None:
                    inflow.append(seg)
            if dt is not None and tf is not None:
                if any(s > tf for s in snaps):
                    ck.err("transport.snapshots: times must not exceed t_final")
                try:
                    transport = TransportConfig(dt, tf, inflow, c0, limiter, flux, tuple(snaps))
                except ValueError as exc:
                    ck.err(f"transport: {exc}")

    interfaces, samples = {}, []
    if "postprocess" in top:
        pp = ck.table(top["postprocess"], "postprocess", optional=("interface", "sample"))
        for i, item in enumerate(ck.array(pp, "interface", "postprocess.interface")):
            p = f"postprocess.interface[{i}]"
            ck.table(item, p, required=("id", "type"), optional=("point", "normal"))
            iid = item.get("id")
            if not isinstance(iid, str) or not iid:
                ck.err(f"{p}.id: expected a non-empty string")
                continue
            if iid in interfaces:
                ck.err(f"{p}.id: duplicate interface id {iid!r}")
            kind = ck.choice(item, "type", p, ("line", "fracture"), None)
            if kind == "line":
                pt = ck.vector(item, "point", p, 2)
                nr = ck.vector(item, "normal", p, 2)
                if pt is None or nr is None:
                    ck.err(f"{p}: line interfaces need point and normal")
                    continue
                if np.hypot(*nr) == 0:
                    ck.err(f"{p}.normal: must be nonzero")
                    continue
                iface = LineInterface(pt, nr, iid)
                if domain is not None and not _separates(iface, domain):
                    ck.err(f"{p}: line does not separate the domain")
                interfaces[iid] = iface
            elif kind == "fracture":
                if not fractures:
                    ck.err(f"{p}: fracture interface needs at least one fracture")
                interfaces[iid] = FractureInterface(iid)
        for i, item in enumerate(ck.array(pp, "sample", "postprocess.sample")):
            p = f"postprocess.sample[{i}]"
            ck.table(item, p, required=("id", "start", "end"), optional=("n", "fields"))
            a = ck.vector(item, "start", p, 2)
            b = ck.vector(item, "end", p, 2)
            n = ck.integer(item, "n", p, 101, minimum=2)
            fields = item.get("fields", ["pressure"])
            if not isinstance(fields, list) or not set(fields) <= {"pressure", "concentration"}:
                ck.err(f"{p}.fields: subset of ['pressure', 'concentration'] expected")
                fields = ["pressure"]
            sid = item.get("id")
            if not isinstance(sid, str) or not sid:
                ck.err(f"{p}.id: expected a non-empty string")
                continue
            if None in (a, b):
                continue
            if domain is not None and not domain.contains(np.array([a, b]), tol=1e-12).all():
                ck.err(f"{p}: endpoints must lie in the domain")
            samples.append(SampleSpec(sid, a, b, n, tuple(fields)))

    out = ck.table(top.get("output", {}), "output", optional=("dir",))
    outdir = out.get("dir", "out")
    if not isinstance(outdir, str):
        ck.err("output.dir: expected a string")
        outdir = "out"

    if ck.errors:
        raise ConfigError(ck.errors)
    return RunConfig(version, domain, material, be_x, be_y, amr, boundary, stabilize, solver,
                     transport, interfaces, samples, outdir, config_hash(text), data)


def _check_overlaps(ck, segs, path):
    for side in SIDES:
        on = sorted((s.start, s.end) for s in segs if s.side == side)
        for (a0, a1), (b0, b1) in zip(on, on[1:]):
            if b0 < a1:
                ck.err(f"{path}: overlapping segments on the {side} side")


def _separates(iface, domain):
    c = np.array([[domain.x0, domain.y0], [domain.x1, domain.y0],
                  [domain.x0, domain.y1], [domain.x1, domain.y1]])
    s = iface.side(c)
    return bool((s == 1).any() and (s == 2).any())


def load_config(path):
    return parse_config(Path(path).read_text())


# -------------------------------------------------------------------- VTK
VTK_QUAD = 9
CCW = [0, 1, 3, 2]  # tensor order -> counter-clockwise


def write_vtk(path, mesh, point_data=None, cell_data=None, title="fracfem"):
    """Legacy ASCII unstructured grid with quad cells; point fields are all-node."""
    point_data = point_data or {}
    cell_data = cell_data or {}
    nodes = mesh.nodes
    cells = mesh.cells[:, CCW]
    lines = ["# vtk DataFile Version 3.0", title.replace("\n", " ")[:255], "ASCII",
             "DATASET UNSTRUCTURED_GRID", f"POINTS {len(nodes)} double"]
    lines += [f"{x:{FMT}} {y:{FMT}} 0" for x, y in nodes]
    lines.append(f"CELLS {len(cells)} {5 * len(cells)}")
    lines += ["4 " + " ".join(map(str, c)) for c in cells]
    lines.append(f"CELL_TYPES {len(cells)}")
    lines += [str(VTK_QUAD)] * len(cells)
    for header, data, size in (("POINT_DATA", point_data, len(nodes)),
                               ("CELL_DATA", cell_data, len(cells))):
        if not data:
            continue
        lines.append(f"{header} {size}")
        for name, values in data.items():
            values = np.asarray(values, dtype=float)
            if values.shape != (size,):
                raise ValueError(f"field {name!r} has {values.shape[0]} values, expected {size}")
            lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
            lines += [f"{v:{FMT}}" for v in values]
    Path(path).write_text("\n".join(lines) + "\n")


def read_vtk(path):
    """Inverse of ``write_vtk``: points, cells (CCW), point and cell fields."""
    tokens = Path(path).read_text().split("\n")
    out = {"title": tokens[1], "point_data": {}, "cell_data": {}}
    i = 4
    it = iter(tokens[i:])
    section = None
    sizes = {}
    for line in it:
        parts = line.split()
        if not parts:
            continue
        key = parts[0]
        if key == "POINTS":
            n = int(parts[1])
            out["points"] = np.array([next(it).split() for _ in range(n)], dtype=float)
        elif key == "CELLS":
            n = int(parts[1])
            out["cells"] = np.array([next(it).split()[1:] for _ in range(n)], dtype=np.int64)
        elif key == "CELL_TYPES":
            n = int(parts[1])
            out["cell_types"] = np.array([next(it) for _ in range(n)], dtype=np.int64)
        elif key in ("POINT_DATA", "CELL_DATA"):
            section = "point_data" if key == "POINT_DATA" else "cell_data"
            sizes[section] = int(parts[1])
        elif key == "SCALARS":
            next(it)  # LOOKUP_TABLE
            out[section][parts[1]] = np.array([next(it) for _ in range(sizes[section])], dtype=float)
    return out


# -------------------------------------------------------------------- CSV
def _csv(path, header, rows, chash):
    lines = [f"# config_hash={chash}", ",".join(header)]
    for r in rows:
        lines.append(",".join(f"{v:{FMT}}" if isinstance(v, float) else str(v) for v in r))
    Path(path).write_text("\n".join(lines) + "\n")


@dataclass
class LineSample:
    start: np.ndarray
    end: np.ndarray
    s: np.ndarray  # arc length
    points: np.ndarray
    values: np.ndarray


def sample_line(space, values, a, b, n=101):
    """Conforming FE function with dof vector ``values`` at ``n`` points on ``a -> b``."""
    if n < 2:
        raise ValueError("need at least two sample points")
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if not space.mesh.domain.contains(np.array([a, b]), tol=1e-12).all():
        raise ValueError("sample line endpoints must lie in the domain")
    t = np.linspace(0.0, 1.0, n)
    pts = a + np.outer(t, b - a)
    vals = space.evaluate(np.asarray(values, dtype=float), pts)
    return LineSample(a, b, t * float(np.hypot(*(b - a))), pts, vals)


# ---------------------------------------------------------------- workflow
def make_mesh(cfg):
    return build_mesh(cfg.domain, cfg.be_x, cfg.be_y, cfg.fractures, cfg.amr_steps)


def _mesh_vtk(path, mesh, cfg, extra=None):
    cd = {"level": mesh.level.astype(float)}
    write_vtk(path, mesh, extra, cd, title=f"fracfem config_hash={cfg.hash}")


def run(cfg, outdir=None, log=print):
    """Mesh, flow, interface fluxes, samples and optional transport; writes files."""
    out = Path(outdir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    mesh = make_mesh(cfg)
    problems = audit_mesh(mesh)
    if problems:
        raise SolverError("mesh audit failed: " + "; ".join(problems[:5]))
    space = FESpace(mesh)
    log(f"mesh: {mesh.n_leaves} leaves, {space.n_dofs} dofs")
    _mesh_vtk(out / "mesh.vtk", mesh, cfg)
    quad = ElementQuadrature(mesh, cfg.material)
    sol = solve_flow(space, cfg.material, cfg.boundary, stabilize=cfg.stabilize, quad=quad,
                     method=cfg.solver)
    p = sol.pressure
    write_vtk(out / "pressure.vtk", mesh, {"pressure": space.to_nodes(p)}, None,
              title=f"fracfem config_hash={cfg.hash}")
    _csv(out / "flux_report.csv", *flux_rows(sol, cfg), cfg.hash)

    conc = {}
    if cfg.transport is not None:
        tc = cfg.transport
        vel, bvel = darcy_velocity(sol)
        ops = build_transport_operators(space, quad, vel, tc.dt, tc.inflow, bvel)
        res = run_transport(space, ops, tc)
        _csv(out / "dmp_monitor.csv", ("step", "t", "min_c", "max_c"), res.monitor_rows(), cfg.hash)
        conc = dict(res.snapshots)
        conc.setdefault(float(res.times[-1]), res.final)
        for t, c in sorted(conc.items()):
            write_vtk(out / f"conc_{t:.6g}.vtk", mesh, {"concentration": space.to_nodes(c)},
                      None, title=f"fracfem config_hash={cfg.hash} t={t:{FMT}}")
        log(f"transport: {len(res.times) - 1} steps, c in [{res.minimum.min():.6g}, {res.maximum.max():.6g}]")

    if cfg.samples:
        (out / "samples").mkdir(exist_ok=True)
    for s in cfg.samples:
        cols = {}
        if "pressure" in s.fields:
            cols["pressure"] = sample_line(space, p, s.start, s.end, s.n)
        if "concentration" in s.fields:
            for t, c in sorted(conc.items()):
                cols[f"c_{t:.6g}"] = sample_line(space, c, s.start, s.end, s.n)
        if not cols:
            continue
        first = next(iter(cols.values()))
        rows = [(float(first.s[i]), float(first.points[i, 0]), float(first.points[i, 1]),
                 *[float(v.values[i]) for v in cols.values()]) for i in range(s.n)]
        _csv(out / "samples" / f"{s.id}.csv", ("s", "x", "y", *cols), rows, cfg.hash)
    return sol


def flux_rows(sol, cfg, ids=None):
    header = ("quantity", "side", "value", "n_dofs", "off_interface", "density")
    b = sol.balance()
    rows = [("dirichlet_flux", "", b["dirichlet"], "", "", ""),
            ("neumann_flux", "", b["neumann"], "", "", ""),
            ("global_imbalance", "", b["imbalance"], "", "", "")]
    for iid, iface in cfg.interfaces.items():
        if ids is not None and iid not in ids:
            continue
        q = [sol.interface_flux(iface, side) for side in (1, 2)]
        for side, r in zip((1, 2), q):
            rows.append((iid, side, r.total, len(r.dofs), r.off_interface, r.density_kind))
        rows.append((iid, "sum", q[0].total + q[1].total, "", "", ""))
    return header, rows


# --------------------------------------------------------------------- CLI
def _parser():
    ap = argparse.ArgumentParser(prog="fracfem", description="Flow and transport in fractured media on quadtree meshes.")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="full run: mesh, flow, fluxes, transport")
    r.add_argument("config")
    r.add_argument("-o", "--output", help="output directory (overrides output.dir)")
    m = sub.add_parser("mesh", help="build and audit the mesh only")
    m.add_argument("config")
    m.add_argument("-o", "--output")
    f = sub.add_parser("flux", help="solve flow and print one interface flux")
    f.add_argument("config")
    f.add_argument("--interface", required=True)
    v = sub.add_parser("validate", help="check a config and list every problem")
    v.add_argument("config")
    return ap


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        set_num_threads()
    except ValueError as exc:
        print(f"error: FRACFEM_NUM_THREADS: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = parse_config(text)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "validate":
        print(f"ok: {args.config} (config_hash={cfg.hash})")
        return EXIT_OK
    if args.command == "flux" and args.interface not in cfg.interfaces:
        print(f"config error: unknown interface {args.interface!r}; known: {sorted(cfg.interfaces)}",
              file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "mesh":
            out = Path(args.output or cfg.output_dir)
            out.mkdir(parents=True, exist_ok=True)
            mesh = make_mesh(cfg)
            problems = audit_mesh(mesh)
            for p in problems:
                print(f"audit: {p}", file=sys.stderr)
            _mesh_vtk(out / "mesh.vtk", mesh, cfg)
            s = mesh.summary()
            print(" ".join(f"{k}={v}" for k, v in s.items()))
            return EXIT_SOLVER if problems else EXIT_OK
        if args.command == "flux":
            mesh = make_mesh(cfg)
            space = FESpace(mesh)
            sol = solve_flow(space, cfg.material, cfg.boundary, stabilize=cfg.stabilize,
                             method=cfg.solver)
            header, rows = flux_rows(sol, cfg, ids={args.interface})
            print(",".join(header))
            for r in rows:
                print(",".join(f"{v:{FMT}}" if isinstance(v, float) else str(v) for v in r))
            return EXIT_OK
        run(cfg, args.output)
        return EXIT_OK
    except FlowConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, GeometryError, np.linalg.LinAlgError, RuntimeError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        diag = getattr(exc, "diagnostics", None)
        if diag:
            print("diagnostics: " + ", ".join(f"{k}={v}" for k, v in diag.items()), file=sys.stderr)
        return EXIT_SOLVER


def bundled_config(name):
    """Path of a config shipped with the package (``regular`` or ``single``)."""
    return Path(__file__).parent / "data" / f"{name}.cfg"


if __name__ == "__main__":
    sys.exit(main())
