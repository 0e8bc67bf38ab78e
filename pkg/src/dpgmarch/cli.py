"""Batch driver: single solves and convergence studies.

Usage:
    dpgmarch <command> --config <path> [key=value ...]

Commands: run, converge-space, converge-time, converge-projection,
heat-identity.  The JSON config uses flat keys (see RunConfig); trailing
key=value pairs override config entries, with values parsed as JSON when
possible.  Studies write a CSV table with the ErrorReport columns and print
an EOC table; `run` can additionally dump the field as a legacy ASCII VTK
snapshot.  Exit codes: 0 success, 2 validation error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field

import numpy as np

from .assembly import assemble_condensed
from .cases import CASE_IDS, make_case
from .dofmap import build_dofmap
from .elliptic import project
from .errors import ErrorReport, SpatialFields, eoc, field_error, trace_dual_error, \
    trace_seminorm_discrete
from .galerkin import galerkin_march
from .linalg import SolverError
from .mesh import build_structured_mesh
from .timestep import march

COMMANDS = ("run", "converge-space", "converge-time", "converge-projection", "heat-identity")

HEAT_IDENTITY_TOL = 1e-9


class ConfigError(ValueError):
    pass


@dataclass
class KPolicy:
    """Time-step policy: fixed k, k = c*h, k = c*h^2, or an explicit list."""

    kind: str
    value: float = 0.0
    values: tuple = ()

    @classmethod
    def parse(cls, text: str) -> "KPolicy":
        try:
            kind, _, payload = str(text).partition(":")
            if kind == "fixed":
                return cls(kind="fixed", value=float(payload))
            if kind in ("h", "h2"):
                return cls(kind=kind, value=float(payload))
            if kind == "list":
                values = tuple(float(v) for v in payload.split(","))
                if not values:
                    raise ValueError
                return cls(kind="list", values=values)
        except (TypeError, ValueError):
            pass
        raise ConfigError(
            f"invalid k_policy {text!r}; expected 'fixed:K', 'h:C', 'h2:C' or 'list:K1,K2,...'"
        )

    def k_for(self, h_max: float) -> float:
        if self.kind == "fixed":
            return self.value
        if self.kind == "h":
            return self.value * h_max
        if self.kind == "h2":
            return self.value * h_max**2
        raise ConfigError("an explicit k list cannot be evaluated per mesh level")


@dataclass
class RunConfig:
    command: str
    case_id: str
    p: int = 0
    levels: list = field(default_factory=list)
    k_policy: KPolicy = None
    T_end: float = 1.0
    n_steps: int | None = None
    k_ref: float | None = None
    output_path: str = "study.csv"
    snapshot: bool = False

    def validate(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}; available: {', '.join(COMMANDS)}")
        if self.case_id not in CASE_IDS:
            raise ConfigError(f"unknown case_id {self.case_id!r}; available: {', '.join(CASE_IDS)}")
        if self.p not in (0, 1):
            raise ConfigError(f"p must be 0 or 1, got {self.p}")
        if not self.levels:
            raise ConfigError("levels must be a nonempty list of mesh subdivisions")
        if any(int(n) != n or n < 1 for n in self.levels):
            raise ConfigError("levels must be positive integers")
        if list(self.levels) != sorted(set(self.levels)):
            raise ConfigError("levels must be strictly increasing")
        if self.command == "converge-time" and self.k_policy.kind != "list":
            raise ConfigError("converge-time requires a fixed mesh and k_policy 'list:...'")
        if self.command != "converge-time" and self.k_policy.kind == "list":
            raise ConfigError(f"k_policy 'list' is only valid for converge-time, not {self.command}")


def load_config(path: str, overrides=(), command: str | None = None) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as handle:
            data = json.load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object with flat keys")

    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        try:
            data[key] = json.loads(raw)
        except json.JSONDecodeError:
            data[key] = raw

    if command is not None:
        data["command"] = command
    known = {"command", "case_id", "p", "levels", "k_policy", "T_end", "n_steps",
             "k_ref", "output_path", "snapshot"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    if "command" not in data or "case_id" not in data:
        raise ConfigError("config requires at least 'command' and 'case_id'")
    if "k_policy" not in data:
        raise ConfigError("config requires 'k_policy'")

    cfg = RunConfig(
        command=str(data["command"]),
        case_id=str(data["case_id"]),
        p=int(data.get("p", 0)),
        levels=[int(n) for n in data.get("levels", [])],
        k_policy=KPolicy.parse(data["k_policy"]),
        T_end=float(data.get("T_end", 1.0)),
        n_steps=int(data["n_steps"]) if data.get("n_steps") is not None else None,
        k_ref=float(data["k_ref"]) if data.get("k_ref") is not None else None,
        output_path=str(data.get("output_path", "study.csv")),
        snapshot=bool(data.get("snapshot", False)),
    )
    cfg.validate()
    return cfg


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.16g}"
    return str(value)


def write_csv(path: str, reports) -> None:
    lines = [",".join(ErrorReport.FIELDS)]
    lines += [",".join(_fmt(v) for v in report.row()) for report in reports]
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("\n".join(lines) + "\n")


def print_table(reports) -> None:
    print(f"{'level':>5} {'h_max':>12} {'k':>12} {'err_L2':>13} {'err_H1':>13} "
          f"{'err_trace':>13} {'eoc_L2':>7} {'eoc_H1':>7} {'eoc_tr':>7}")
    for r in reports:
        rate = lambda v: f"{v:7.2f}" if v is not None else "      -"
        print(f"{r.level:>5} {r.h_max:>12.5e} {r.k:>12.5e} {r.err_L2:>13.6e} "
              f"{r.err_H1_semi:>13.6e} {r.err_trace_dual:>13.6e} "
              f"{rate(r.eoc_L2)} {rate(r.eoc_H1)} {rate(r.eoc_trace)}")


def _attach_rates(reports, steps) -> None:
    l2 = eoc([r.err_L2 for r in reports], steps)
    h1 = eoc([r.err_H1_semi for r in reports], steps)
    tr = eoc([r.err_trace_dual for r in reports], steps)
    for i, report in enumerate(reports[1:]):
        report.eoc_L2, report.eoc_H1, report.eoc_trace = l2[i], h1[i], tr[i]


def write_vtk(path: str, mesh, dofmap, field_coeffs) -> None:
    """Legacy ASCII VTK unstructured grid with vertex data 'u'."""
    values = np.zeros(mesh.n_vertices)
    mask = dofmap.vertex_field_dof >= 0
    values[mask] = np.asarray(field_coeffs)[dofmap.vertex_field_dof[mask]]
    lines = ["# vtk DataFile Version 2.0", "dpgmarch field snapshot", "ASCII",
             "DATASET UNSTRUCTURED_GRID", f"POINTS {mesh.n_vertices} double"]
    lines += [f"{x:.16g} {y:.16g} 0" for x, y in mesh.vertices]
    lines.append(f"CELLS {mesh.n_elements} {4 * mesh.n_elements}")
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.elements]
    lines.append(f"CELL_TYPES {mesh.n_elements}")
    lines += ["5"] * mesh.n_elements
    lines += [f"POINT_DATA {mesh.n_vertices}", "SCALARS u double 1", "LOOKUP_TABLE default"]
    lines += [f"{v:.16g}" for v in values]
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("\n".join(lines) + "\n")


def _level_timestep(cfg: RunConfig, h_max: float):
    k = cfg.k_policy.k_for(h_max)
    if k <= 0.0:
        raise ConfigError(f"k_policy produced nonpositive time step {k}")
    T_end = cfg.n_steps * k if cfg.n_steps is not None else cfg.T_end
    return k, T_end


def _march_report(cfg: RunConfig, level: int, n: int):
    mesh = build_structured_mesh(n)
    dofmap = build_dofmap(mesh, cfg.p)
    k, T_end = _level_timestep(cfg, mesh.h_max)
    case = make_case(cfg.case_id, k, T_end)
    state = march(case, mesh, dofmap)
    u_fn, grad_fn = case.spatial_u(state.time)
    exact = SpatialFields(u=u_fn, grad_u=grad_fn)
    report = ErrorReport(
        level=level, h_max=mesh.h_max, k=k, n_field=dofmap.n_field, n_trace=dofmap.n_trace,
        err_L2=field_error(mesh, dofmap, state.current.field, exact, "L2"),
        err_H1_semi=field_error(mesh, dofmap, state.current.field, exact, "H1semi"),
        err_trace_dual=trace_dual_error(mesh, dofmap, case.coeffs, state.current.trace, grad_fn),
    )
    return mesh, dofmap, state, report


def cmd_run(cfg: RunConfig) -> int:
    mesh, dofmap, state, report = _march_report(cfg, 0, cfg.levels[0])
    write_csv(cfg.output_path, [report])
    print_table([report])
    if cfg.snapshot:
        write_vtk(cfg.output_path + ".vtk", mesh, dofmap, state.current.field)
        print(f"snapshot written to {cfg.output_path}.vtk")
    return 0


def cmd_converge_space(cfg: RunConfig) -> int:
    reports = [_march_report(cfg, level, n)[3] for level, n in enumerate(cfg.levels)]
    _attach_rates(reports, [r.h_max for r in reports])
    write_csv(cfg.output_path, reports)
    print_table(reports)
    return 0


def cmd_converge_time(cfg: RunConfig) -> int:
    n = cfg.levels[0]
    mesh = build_structured_mesh(n)
    dofmap = build_dofmap(mesh, cfg.p)
    k_values = cfg.k_policy.values
    k_ref = cfg.k_ref if cfg.k_ref is not None else min(k_values) / 16.0

    ref_state = march(make_case(cfg.case_id, k_ref, cfg.T_end), mesh, dofmap)
    zero = SpatialFields(u=lambda x, y: np.zeros_like(x),
                         grad_u=lambda x, y: np.zeros((2,) + np.shape(x)))
    reports = []
    for level, k in enumerate(k_values):
        case = make_case(cfg.case_id, k, cfg.T_end)
        state = march(case, mesh, dofmap)
        dfield = state.current.field - ref_state.current.field
        dtrace = state.current.trace - ref_state.current.trace
        reports.append(ErrorReport(
            level=level, h_max=mesh.h_max, k=k, n_field=dofmap.n_field,
            n_trace=dofmap.n_trace,
            err_L2=field_error(mesh, dofmap, dfield, zero, "L2"),
            err_H1_semi=field_error(mesh, dofmap, dfield, zero, "H1semi"),
            err_trace_dual=trace_seminorm_discrete(mesh, dofmap, case.coeffs, dtrace),
        ))
    _attach_rates(reports, list(k_values))
    write_csv(cfg.output_path, reports)
    print_table(reports)
    return 0


def cmd_converge_projection(cfg: RunConfig) -> int:
    reports = []
    for level, n in enumerate(cfg.levels):
        mesh = build_structured_mesh(n)
        dofmap = build_dofmap(mesh, cfg.p)
        k, T_end = _level_timestep(cfg, mesh.h_max)
        case = make_case(cfg.case_id, k, T_end)
        u_fn, grad_fn = case.spatial_u(0.0)
        exact = SpatialFields(u=u_fn, grad_u=grad_fn)
        result = project(mesh, dofmap, case.coeffs, exact)
        reports.append(ErrorReport(
            level=level, h_max=mesh.h_max, k=k, n_field=dofmap.n_field,
            n_trace=dofmap.n_trace,
            err_L2=field_error(mesh, dofmap, result.field, exact, "L2"),
            err_H1_semi=field_error(mesh, dofmap, result.field, exact, "H1semi"),
            err_trace_dual=trace_dual_error(mesh, dofmap, case.coeffs, result.trace, grad_fn),
        ))
    _attach_rates(reports, [r.h_max for r in reports])
    write_csv(cfg.output_path, reports)
    print_table(reports)
    return 0


def cmd_heat_identity(cfg: RunConfig) -> int:
    n = cfg.levels[0]
    mesh = build_structured_mesh(n)
    dofmap = build_dofmap(mesh, cfg.p)
    k, T_end = _level_timestep(cfg, mesh.h_max)
    case = make_case(cfg.case_id, k, T_end)
    state = march(case, mesh, dofmap)
    oracle = galerkin_march(mesh, dofmap, k, T_end, case.f, case.u0, coeffs=case.coeffs)
    deviation = float(np.abs(state.current.field - oracle).max()
                      / max(np.abs(oracle).max(), 1e-300))
    verdict = "PASS" if deviation <= HEAT_IDENTITY_TOL else "FAIL"
    print(f"max relative DOF deviation: {deviation:.3e} "
          f"({verdict} vs {HEAT_IDENTITY_TOL:.0e})")
    return 0


_DISPATCH = {
    "run": cmd_run,
    "converge-space": cmd_converge_space,
    "converge-time": cmd_converge_time,
    "converge-projection": cmd_converge_projection,
    "heat-identity": cmd_heat_identity,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="dpgmarch", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="path to the JSON config file")
    try:
        args, overrides = parser.parse_known_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    bad = [item for item in overrides if "=" not in item or item.startswith("-")]
    if bad:
        print(f"configuration error: overrides must be key=value pairs, got {bad}",
              file=sys.stderr)
        return 2

    try:
        cfg = load_config(args.config, overrides, command=args.command)
    except (ConfigError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2

    try:
        return _DISPATCH[cfg.command](cfg)
    except SolverError as exc:
        print(f"solver failure [{cfg.command} / {cfg.case_id}]: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2


def cli_main() -> None:
    sys.exit(main())
