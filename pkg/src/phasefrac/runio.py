"""Configuration parsing, run orchestration, and artifact emission.

Config grammar (INI, parsed case-sensitively, no interpolation) -- every key
is optional and validated; unknown sections or keys are errors:

    [case]
    name = traction            ; traction | surfing | thermal_shock
    ell = 0.1                  ; internal length
    h = 0.02                   ; mesh size, default ell/5
    L = 1.0                    ; domain length (case-dependent default)
    H = 0.3                    ; domain height (case-dependent default)
    n_steps = 30               ; number of load steps (case-dependent default)
    E = 1.0                    ; Young's modulus
    nu = 0.3                   ; Poisson ratio
    Gc = 1.0                   ; fracture toughness
    k_ell = 1e-06              ; residual stiffness
    beta = 1.0                 ; thermal expansion coefficient
    load_max_factor = 1.5      ; traction: final load in units of t_c
    t_end = 1.0                ; surfing: final load time
    dT_factor = 1.0            ; thermal shock: amplitude in units of dT_c
    tau_min = 0.05             ; thermal shock: first time
    tau_max = 3.0              ; thermal shock: last time

    [solver]
    method = am                ; am | oram | oram_n | newton_only
    omega = 1.0                ; over-relaxation weight, must lie in (0, 2)
    outer_atol = 1e-07
    am_rtol = 0.1
    max_am_iterations = 1000
    max_newton_iterations = 30
    max_outer_cycles = 20

    [linear]
    elastic = direct           ; direct | cg
    elastic_precond = ssor     ; jacobi | ssor | chebyshev
    elastic_rtol = 1e-10
    coupled = fieldsplit       ; direct | fieldsplit
    fieldsplit_inner = direct  ; direct | cg
    fieldsplit_cg_budget = 5
    fieldsplit_rtol = 1e-06

    [output]
    directory = out
    snapshot_stride = 1
    seed = 0                   ; reserved for property tests; runs are deterministic

A sweep file adds one section:

    [sweep]
    parameter = omega          ; omega | ell | h | dT_factor
    values = 1.0, 1.2, 1.6

``run`` writes into the output directory: ``energies.csv`` (one row per load
step, columns step,load,elastic,dissipated,total,am_iters,newton_iters,
krylov_iters,omega_bar_min), ``iterations.csv`` (per nonlinear iteration),
``step_NNNN.vtk`` legacy ASCII snapshots, and ``provenance.txt`` (version and
config echo; no timestamps, so reruns are bitwise identical).  ``sweep`` runs
one sub-run per value and writes ``summary.csv``.
"""

from __future__ import annotations

import configparser
import dataclasses
import io
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .cases import (ProblemSetup, StepFailureError, run_quasistatic,
                    setup_surfing, setup_thermal_shock, setup_traction)
from .model import Material
from .solver import SolverConfig


class ConfigError(ValueError):
    """Invalid or unparsable configuration (CLI exit code 2)."""


_CASES = ("traction", "surfing", "thermal_shock")
_METHODS = ("am", "oram", "oram_n", "newton_only")
_CASE_DEFAULTS = {
    "traction": {"L": 1.0, "H": 0.3, "n_steps": 30},
    "surfing": {"L": 2.0, "H": 1.0, "n_steps": 25},
    "thermal_shock": {"L": 20.0, "H": 10.0, "n_steps": 40},
}


@dataclass
class RunConfig:
    """Fully resolved configuration; every default already applied."""

    # [case]
    case: str = "traction"
    ell: float = 0.1
    h: float = 0.02
    L: float = 1.0
    H: float = 0.3
    n_steps: int = 30
    E: float = 1.0
    nu: float = 0.3
    Gc: float = 1.0
    k_ell: float = 1e-6
    beta: float = 1.0
    load_max_factor: float = 1.5
    t_end: float = 1.0
    dT_factor: float = 1.0
    tau_min: float = 0.05
    tau_max: float = 3.0
    # [solver]
    method: str = "am"
    omega: float = 1.0
    outer_atol: float = 1e-7
    am_rtol: float = 0.1
    max_am_iterations: int = 1000
    max_newton_iterations: int = 30
    max_outer_cycles: int = 20
    # [linear]
    elastic: str = "direct"
    elastic_precond: str = "ssor"
    elastic_rtol: float = 1e-10
    coupled: str = "fieldsplit"
    fieldsplit_inner: str = "direct"
    fieldsplit_cg_budget: int = 5
    fieldsplit_rtol: float = 1e-6
    # [output]
    directory: str = "out"
    snapshot_stride: int = 1
    seed: int = 0


@dataclass
class SweepSpec:
    """One swept parameter, its values, and the base configuration."""

    parameter: str
    values: list
    base: RunConfig

    def __post_init__(self):
        if self.parameter not in _SWEEPABLE:
            raise ConfigError(
                f"sweep parameter must be one of {_SWEEPABLE}, got {self.parameter!r}")
        if not self.values:
            raise ConfigError("sweep values list must not be empty")


_SWEEPABLE = ("omega", "ell", "h", "dT_factor")

# (section, key) -> (attribute, type); types: f float, i int, s string
_SCHEMA = {
    "case": [("name", "case", "s"), ("ell", "ell", "f"), ("h", "h", "f"),
             ("L", "L", "f"), ("H", "H", "f"), ("n_steps", "n_steps", "i"),
             ("E", "E", "f"), ("nu", "nu", "f"), ("Gc", "Gc", "f"),
             ("k_ell", "k_ell", "f"), ("beta", "beta", "f"),
             ("load_max_factor", "load_max_factor", "f"),
             ("t_end", "t_end", "f"), ("dT_factor", "dT_factor", "f"),
             ("tau_min", "tau_min", "f"), ("tau_max", "tau_max", "f")],
    "solver": [("method", "method", "s"), ("omega", "omega", "f"),
               ("outer_atol", "outer_atol", "f"), ("am_rtol", "am_rtol", "f"),
               ("max_am_iterations", "max_am_iterations", "i"),
               ("max_newton_iterations", "max_newton_iterations", "i"),
               ("max_outer_cycles", "max_outer_cycles", "i")],
    "linear": [("elastic", "elastic", "s"),
               ("elastic_precond", "elastic_precond", "s"),
               ("elastic_rtol", "elastic_rtol", "f"),
               ("coupled", "coupled", "s"),
               ("fieldsplit_inner", "fieldsplit_inner", "s"),
               ("fieldsplit_cg_budget", "fieldsplit_cg_budget", "i"),
               ("fieldsplit_rtol", "fieldsplit_rtol", "f")],
    "output": [("directory", "directory", "s"),
               ("snapshot_stride", "snapshot_stride", "i"),
               ("seed", "seed", "i")],
}


def _read_ini(text: str) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    return parser


def _convert(raw: str, kind: str, section: str, key: str):
    try:
        if kind == "f":
            return float(raw)
        if kind == "i":
            return int(raw)
        return raw.strip()
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r}") from exc


def validate_config(cfg: RunConfig) -> None:
    """Range/choice checks shared by parsing and per-row sweep rebuilds."""
    if cfg.case not in _CASES:
        raise ConfigError(f"[case] name must be one of {_CASES}, got {cfg.case!r}")
    if cfg.method not in _METHODS:
        raise ConfigError(f"[solver] method must be one of {_METHODS}, got {cfg.method!r}")
    if not 0.0 < cfg.omega < 2.0:
        raise ConfigError(
            f"[solver] omega must lie strictly inside (0, 2), got {cfg.omega!r}")
    if cfg.method == "am" and cfg.omega != 1.0:
        raise ConfigError(
            "[solver] method 'am' is the unrelaxed scheme (omega = 1); "
            "use method 'oram' to set omega")
    for key in ("ell", "h", "L", "H", "E", "Gc", "beta", "outer_atol",
                "am_rtol", "elastic_rtol", "fieldsplit_rtol", "tau_min",
                "tau_max", "t_end", "load_max_factor", "dT_factor"):
        if getattr(cfg, key) <= 0.0:
            raise ConfigError(f"{key} must be positive, got {getattr(cfg, key)!r}")
    if not -1.0 < cfg.nu < 0.5:
        raise ConfigError(f"[case] nu must lie in (-1, 0.5), got {cfg.nu!r}")
    if cfg.k_ell < 0.0:
        raise ConfigError(f"[case] k_ell must be nonnegative, got {cfg.k_ell!r}")
    if cfg.tau_min >= cfg.tau_max:
        raise ConfigError("[case] tau_min must be smaller than tau_max")
    for key in ("n_steps", "max_am_iterations", "max_newton_iterations",
                "max_outer_cycles", "fieldsplit_cg_budget"):
        if getattr(cfg, key) < 1:
            raise ConfigError(f"{key} must be at least 1, got {getattr(cfg, key)!r}")
    if cfg.snapshot_stride < 0:
        raise ConfigError(f"snapshot_stride must be nonnegative, got {cfg.snapshot_stride!r}")
    if cfg.elastic not in ("direct", "cg"):
        raise ConfigError(f"[linear] elastic must be direct or cg, got {cfg.elastic!r}")
    if cfg.elastic_precond not in ("jacobi", "ssor", "chebyshev"):
        raise ConfigError(
            f"[linear] elastic_precond must be jacobi, ssor or chebyshev, "
            f"got {cfg.elastic_precond!r}")
    if cfg.coupled not in ("direct", "fieldsplit"):
        raise ConfigError(f"[linear] coupled must be direct or fieldsplit, got {cfg.coupled!r}")
    if cfg.fieldsplit_inner not in ("direct", "cg"):
        raise ConfigError(
            f"[linear] fieldsplit_inner must be direct or cg, got {cfg.fieldsplit_inner!r}")


def _parse_sections(parser: configparser.ConfigParser,
                    extra_sections: tuple = ()) -> RunConfig:
    unknown_sections = [s for s in parser.sections()
                        if s not in _SCHEMA and s not in extra_sections]
    if unknown_sections:
        raise ConfigError(f"unknown config sections: {', '.join(unknown_sections)}")

    values = {}
    for section, entries in _SCHEMA.items():
        if not parser.has_section(section):
            continue
        known = {key for key, _, _ in entries}
        unknown = [k for k in parser[section] if k not in known]
        if unknown:
            raise ConfigError(
                f"unknown keys in [{section}]: {', '.join(sorted(unknown))}")
        for key, attr, kind in entries:
            if parser.has_option(section, key):
                values[attr] = _convert(parser.get(section, key), kind, section, key)

    case = values.get("case", "traction")
    if case not in _CASES:
        raise ConfigError(f"[case] name must be one of {_CASES}, got {case!r}")
    # case-dependent defaults, then the generic mesh-size rule h = ell/5
    for attr, default in _CASE_DEFAULTS[case].items():
        values.setdefault(attr, default)
    if "ell" not in values and case == "thermal_shock":
        values["ell"] = 1.0
    values.setdefault("ell", 0.1)
    values.setdefault("h", values["ell"] / 5.0)

    cfg = RunConfig(**values)
    validate_config(cfg)
    return cfg


def parse_config(text: str) -> RunConfig:
    """Parse and validate a run configuration; all defaults are resolved."""
    return _parse_sections(_read_ini(text))


def parse_sweep(text: str) -> SweepSpec:
    """Parse a sweep file: a [sweep] section plus a base run configuration."""
    parser = _read_ini(text)
    if not parser.has_section("sweep"):
        raise ConfigError("sweep file requires a [sweep] section")
    known = {"parameter", "values"}
    unknown = [k for k in parser["sweep"] if k not in known]
    if unknown:
        raise ConfigError(f"unknown keys in [sweep]: {', '.join(sorted(unknown))}")
    if not parser.has_option("sweep", "parameter"):
        raise ConfigError("[sweep] parameter is required")
    parameter = parser.get("sweep", "parameter").strip()
    raw_values = parser.get("sweep", "values", fallback="")
    tokens = [tok for tok in raw_values.replace(",", " ").split() if tok]
    try:
        sweep_values = [float(tok) for tok in tokens]
    except ValueError as exc:
        raise ConfigError(f"[sweep] values: cannot parse {raw_values!r}") from exc
    base = _parse_sections(parser, extra_sections=("sweep",))
    return SweepSpec(parameter=parameter, values=sweep_values, base=base)


def _fmt(value) -> str:
    return repr(value) if isinstance(value, float) else str(value)


def echo_config(cfg: RunConfig) -> str:
    """Canonical INI text of a config; parse(echo(cfg)) == cfg."""
    lines = []
    for section, entries in _SCHEMA.items():
        lines.append(f"[{section}]")
        for key, attr, _ in entries:
            lines.append(f"{key} = {_fmt(getattr(cfg, attr))}")
        lines.append("")
    return "\n".join(lines)


# -- building the pieces a run needs --------------------------------------------


def build_material(cfg: RunConfig) -> Material:
    return Material(E=cfg.E, nu=cfg.nu, Gc=cfg.Gc, ell=cfg.ell,
                    k_ell=cfg.k_ell, beta=cfg.beta)


_METHOD_MAP = {"am": "am", "oram": "am", "oram_n": "oram_newton",
               "newton_only": "newton_only"}


def build_solver_config(cfg: RunConfig) -> SolverConfig:
    return SolverConfig(
        method=_METHOD_MAP[cfg.method],
        omega=cfg.omega,
        outer_atol=cfg.outer_atol,
        am_rtol=cfg.am_rtol,
        max_am_iterations=cfg.max_am_iterations,
        max_newton_iterations=cfg.max_newton_iterations,
        max_outer_cycles=cfg.max_outer_cycles,
        elastic_solver=cfg.elastic,
        elastic_rtol=cfg.elastic_rtol,
        elastic_precond=cfg.elastic_precond,
        coupled_solver=cfg.coupled,
        fieldsplit_inner=cfg.fieldsplit_inner,
        fieldsplit_cg_budget=cfg.fieldsplit_cg_budget,
        fieldsplit_rtol=cfg.fieldsplit_rtol)


def build_setup(cfg: RunConfig) -> ProblemSetup:
    material = build_material(cfg)
    if cfg.case == "traction":
        return setup_traction(material, L=cfg.L, H=cfg.H, h=cfg.h,
                              n_steps=cfg.n_steps,
                              load_max_factor=cfg.load_max_factor)
    if cfg.case == "surfing":
        return setup_surfing(material, L=cfg.L, H=cfg.H, h=cfg.h,
                             n_steps=cfg.n_steps, t_end=cfg.t_end)
    return setup_thermal_shock(material, L=cfg.L, H=cfg.H, h=cfg.h,
                               dT_factor=cfg.dT_factor, n_steps=cfg.n_steps,
                               tau_min=cfg.tau_min, tau_max=cfg.tau_max)


# -- artifact writers -------------------------------------------------------------

ENERGY_COLUMNS = ("step", "load", "elastic", "dissipated", "total",
                  "am_iters", "newton_iters", "krylov_iters", "omega_bar_min")
ITERATION_COLUMNS = ("step", "phase", "cycle", "iteration", "residual",
                     "omega_bar", "elastic", "dissipated", "total")


def _write_text(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def write_energies_csv(path: Path, records: list) -> None:
    rows = [",".join(ENERGY_COLUMNS)]
    for rec in records:
        r = rec.report
        rows.append(",".join([
            str(rec.step), _fmt(rec.load),
            _fmt(rec.energy.elastic), _fmt(rec.energy.dissipated),
            _fmt(rec.energy.total), str(r.am_iterations),
            str(r.newton_iterations), str(r.total_krylov_iterations),
            _fmt(r.omega_bar_min)]))
    _write_text(path, "\n".join(rows) + "\n")


def write_iterations_csv(path: Path, log_rows: list) -> None:
    rows = [",".join(ITERATION_COLUMNS)]
    for rec in log_rows:
        rows.append(",".join(_fmt(rec[c]) if isinstance(rec[c], float) else str(rec[c])
                             for c in ITERATION_COLUMNS))
    _write_text(path, "\n".join(rows) + "\n")


def write_vtk(path: Path, mesh, alpha: np.ndarray, u: np.ndarray,
              title: str = "snapshot") -> None:
    """Legacy ASCII VTK unstructured grid with damage and displacement."""
    n = mesh.n_vertices
    T = mesh.n_triangles
    out = io.StringIO()
    out.write("# vtk DataFile Version 3.0\n")
    out.write(f"{title}\n")
    out.write("ASCII\nDATASET UNSTRUCTURED_GRID\n")
    out.write(f"POINTS {n} double\n")
    for x, y in mesh.vertices:
        out.write(f"{float(x)!r} {float(y)!r} 0.0\n")
    out.write(f"CELLS {T} {4 * T}\n")
    for a, b, c in mesh.triangles:
        out.write(f"3 {a} {b} {c}\n")
    out.write(f"CELL_TYPES {T}\n")
    for _ in range(T):
        out.write("5\n")
    out.write(f"POINT_DATA {n}\n")
    out.write("SCALARS alpha double 1\nLOOKUP_TABLE default\n")
    for v in alpha:
        out.write(f"{float(v)!r}\n")
    out.write("VECTORS displacement double\n")
    for i in range(n):
        out.write(f"{float(u[2 * i])!r} {float(u[2 * i + 1])!r} 0.0\n")
    _write_text(path, out.getvalue())


def write_provenance(path: Path, cfg: RunConfig, setup: ProblemSetup) -> None:
    lines = [f"phasefrac {__version__}",
             "elastic_regime = plane_stress",
             f"case = {setup.name}"]
    for key in sorted(setup.params):
        lines.append(f"{key} = {_fmt(setup.params[key])}")
    lines.append("")
    lines.append("--- config echo ---")
    lines.append(echo_config(cfg))
    _write_text(path, "\n".join(lines))


# -- run / sweep -------------------------------------------------------------------


def _execute(cfg: RunConfig):
    """Build and run a config.  Returns (setup, records, log_rows, error)."""
    setup = build_setup(cfg)
    solver_cfg = build_solver_config(cfg)

    log_rows: list = []
    step_counter = {"step": -1}
    inner_apply = setup.apply_load

    def apply_hook(problem, state, t):
        step_counter["step"] += 1
        inner_apply(problem, state, t)

    def log_cb(rec: dict) -> None:
        log_rows.append({"step": step_counter["step"], **rec})

    setup.apply_load = apply_hook
    solver_cfg.log_callback = log_cb

    error: Optional[StepFailureError] = None
    try:
        records = run_quasistatic(setup, solver_cfg,
                                  snapshot_stride=cfg.snapshot_stride)
    except StepFailureError as exc:
        records = exc.records
        error = exc
    return setup, records, log_rows, error


def run(cfg: RunConfig, output_dir: Optional[str] = None,
        snapshot_stride: Optional[int] = None) -> int:
    """Execute a run and write its artifacts.

    Returns 0 on full convergence, 3 when the solver failed at some step
    (partial outputs are still written).  Identical configs produce bitwise
    identical energies/iterations/VTK files.
    """
    if output_dir is not None:
        cfg = dataclasses.replace(cfg, directory=output_dir)
    if snapshot_stride is not None:
        cfg = dataclasses.replace(cfg, snapshot_stride=snapshot_stride)
    validate_config(cfg)

    setup, records, log_rows, error = _execute(cfg)
    out = Path(cfg.directory)
    write_provenance(out / "provenance.txt", cfg, setup)
    write_energies_csv(out / "energies.csv", records)
    write_iterations_csv(out / "iterations.csv", log_rows)
    for rec in records:
        if rec.alpha is not None:
            write_vtk(out / f"step_{rec.step:04d}.vtk", setup.mesh,
                      rec.alpha, rec.u, title=f"{setup.name} step {rec.step}")
    if error is not None:
        _write_text(out / "FAILED.txt", f"{error}\n")
        print(f"solver failure: {error}", file=sys.stderr)
        return 3
    return 0


SUMMARY_COLUMNS = ("parameter", "value", "total_am_iters", "total_newton_iters",
                   "avg_krylov_per_newton", "wall_time_s", "reduction", "status")


def _sweep_row(args) -> dict:
    """Worker for one sweep row (module-level so process pools can pickle it)."""
    cfg, parameter, value = args
    row = {"parameter": parameter, "value": value, "total_am_iters": 0,
           "total_newton_iters": 0, "avg_krylov_per_newton": 0.0,
           "wall_time_s": 0.0, "reduction": 0.0, "status": "failed"}
    start = time.perf_counter()
    try:
        row_cfg = dataclasses.replace(cfg, **{parameter: value})
        row_cfg = dataclasses.replace(
            row_cfg, directory=str(Path(cfg.directory) / f"{parameter}_{value:g}"))
        validate_config(row_cfg)
        status = run(row_cfg)
        records_csv = Path(row_cfg.directory) / "energies.csv"
        am, newton, krylov = _totals_from_csv(records_csv)
        row.update(total_am_iters=am, total_newton_iters=newton,
                   avg_krylov_per_newton=(krylov / newton if newton else 0.0),
                   status="ok" if status == 0 else "failed")
    except Exception:
        # a failed row must not abort the sweep; it is reported as 'failed'
        pass
    row["wall_time_s"] = time.perf_counter() - start
    return row


def _totals_from_csv(path: Path):
    am = newton = krylov = 0
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        idx = {name: i for i, name in enumerate(header)}
        for line in fh:
            parts = line.strip().split(",")
            am += int(parts[idx["am_iters"]])
            newton += int(parts[idx["newton_iters"]])
            krylov += int(parts[idx["krylov_iters"]])
    return am, newton, krylov


def sweep(spec: SweepSpec, threads: int = 1,
          output_dir: Optional[str] = None) -> int:
    """Run one sub-run per swept value and write ``summary.csv``.

    The reduction column compares total AM iterations against the reference
    row (the omega = 1 row when sweeping omega, otherwise the first row);
    positive values mean fewer iterations.  Failed rows are recorded with
    status 'failed' and do not abort the sweep.
    """
    base = spec.base
    if output_dir is not None:
        base = dataclasses.replace(base, directory=output_dir)
    jobs = [(base, spec.parameter, float(v)) for v in spec.values]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(_sweep_row, jobs))
    else:
        rows = [_sweep_row(job) for job in jobs]

    ref = None
    if spec.parameter == "omega":
        for row in rows:
            if row["value"] == 1.0 and row["status"] == "ok":
                ref = row
                break
    if ref is None:
        ref = rows[0]
    ref_am = ref["total_am_iters"]
    for row in rows:
        if ref["status"] == "ok" and row["status"] == "ok" and ref_am > 0:
            row["reduction"] = 1.0 - row["total_am_iters"] / ref_am
        else:
            row["reduction"] = 0.0

    lines = [",".join(SUMMARY_COLUMNS)]
    for row in rows:
        lines.append(",".join(
            _fmt(row[c]) if isinstance(row[c], float) else str(row[c])
            for c in SUMMARY_COLUMNS))
    _write_text(Path(base.directory) / "summary.csv", "\n".join(lines) + "\n")
    return 0
