"""Command-line scenario runner.

Scenarios are TOML files::

    system = "damped_oscillator"
    t_final = 10.0
    dt = 1e-3

    [params]
    m = 1.0
    lam = 0.1
    F = { kind = "cos", amplitude = 1.0 }

    [init]
    q = [1.0]
    v = [0.0]

Subcommands: ``run``, ``validate``, ``list`` and ``batch``. Exit status is
0 on success, 2 for input errors and 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import difflib
import hashlib
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Literal, Optional

import numpy as np
import tomli
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from . import __version__
from .errors import InputError, NonconsError, NumericError

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3
OUT_ENV = "NONCONS_OUT_DIR"


# -- schema -----------------------------------------------------------------------


class InitModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    q: Optional[list[float]] = None
    v: Optional[list[float]] = None
    s: Optional[float] = None
    modes: Optional[list[tuple[int, float]]] = Field(
        default=None, description="field runs: one (mode, amplitude) standing wave per field"
    )


class OutputsModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    columns: Optional[list[str]] = None
    every: int = Field(default=1, ge=1, description="write every n-th sample")
    snapshot_every: int = Field(default=0, ge=0, description="field runs: steps between snapshot files")


class Scenario(BaseModel):
    model_config = ConfigDict(extra="forbid")

    system: str
    name: Optional[str] = None
    params: dict[str, Any] = Field(default_factory=dict)
    init: InitModel = Field(default_factory=InitModel)
    t_final: float = Field(ge=0.0)
    dt: float = Field(gt=0.0)
    integrator: Literal["rk4", "rk45"] = "rk4"
    rtol: float = Field(default=1e-9, gt=0.0)
    atol: float = Field(default=1e-12, gt=0.0)
    outputs: OutputsModel = Field(default_factory=OutputsModel)
    seed: int = 0
    mode: Optional[str] = None
    reduction_iterations: int = Field(default=1, ge=1, le=3)

    @field_validator("t_final", "dt")
    @classmethod
    def _finite(cls, v):
        if not math.isfinite(v):
            raise ValueError("must be finite")
        return v


class ScenarioError(InputError):
    """Schema or parameter problem, with a field path and optional line."""

    def __init__(self, message: str, path: str = "", line: int | None = None):
        super().__init__(message)
        self.path = path
        self.line = line

    def render(self) -> str:
        where = self.path or "scenario"
        if self.line is not None:
            where += f" (line {self.line})"
        return f"{where}: {self}"


def _find_line(text: str, path: tuple) -> int | None:
    """Best-effort line number of the last key of ``path`` in the TOML text."""
    keys = [str(p) for p in path if isinstance(p, str)]
    if not keys:
        return None
    key = keys[-1]
    section = keys[0] if len(keys) > 1 else None
    current = None
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith("[") and line.endswith("]"):
            current = line.strip("[]").strip()
            continue
        head = line.split("=", 1)[0].strip()
        if head == key and (section is None or current == section or head.startswith(section)):
            return i
        if section and head == section and key in line:
            return i
    return None


def load_scenario(path: str | Path) -> tuple[Scenario, str]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario: {exc}") from None
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ScenarioError(f"TOML syntax error: {exc}", line=getattr(exc, "lineno", None)) from None
    try:
        sc = Scenario.model_validate(data)
    except ValidationError as exc:
        err = exc.errors()[0]
        loc = tuple(err["loc"])
        raise ScenarioError(err["msg"], ".".join(str(p) for p in loc), _find_line(text, loc)) from None
    if sc.name is None:
        sc = sc.model_copy(update={"name": path.stem})
    return sc, text


# -- parameter handling -----------------------------------------------------------


def _check_kind(name: str, kind: str, value, text: str | None):
    from .systems import DRIVE_KINDS, Drive

    path = f"params.{name}"
    line = _find_line(text, ("params", name)) if text else None
    if kind in ("positive", "nonnegative", "real"):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ScenarioError(f"expected a number, got {value!r}", path, line)
        value = float(value)
        if not math.isfinite(value):
            raise ScenarioError("must be finite", path, line)
        if kind == "positive" and not value > 0.0:
            raise ScenarioError(f"must be positive, got {value!r}", path, line)
        if kind == "nonnegative" and value < 0.0:
            raise ScenarioError(f"must be nonnegative, got {value!r}", path, line)
        return value
    if kind == "drive":
        if value is None:
            return None
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return Drive("constant", float(value))
        if not isinstance(value, dict):
            raise ScenarioError("drive must be a number or a preset table", path, line)
        unknown = set(value) - {"kind", "amplitude", "frequency", "offset"}
        if unknown:
            raise ScenarioError(f"unknown drive keys {sorted(unknown)}", path, line)
        if value.get("kind", "zero") not in DRIVE_KINDS:
            raise ScenarioError(f"drive kind must be one of {list(DRIVE_KINDS)}", f"{path}.kind", line)
        return Drive(**{k: (float(v) if k != "kind" else v) for k, v in value.items()})
    if kind == "function":
        return _function_param(name, value, path, line)
    raise ScenarioError(f"unsupported parameter kind {kind!r}", path, line)


def _function_param(name, value, path, line):
    """Declarative presets for entropy-dependent maps."""
    if value is None:
        return None
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        if name == "lam_tilde" and not value > 0.0:
            raise ScenarioError("damping must be positive", path, line)
        return float(value)
    if not isinstance(value, dict):
        raise ScenarioError("expected a number or a preset table", path, line)
    if name == "lam_tilde":
        lam0 = float(value.get("lam0", 1.0))
        alpha = float(value.get("alpha", 0.0))
        if not lam0 > 0.0 or alpha < 0.0:
            raise ScenarioError("need lam0 > 0 and alpha >= 0", path, line)
        return lambda S: lam0 * (1.0 + alpha * S)
    if name == "U":
        T0 = float(value.get("T0", 1.0))
        if not T0 > 0.0:
            raise ScenarioError("temperature T0 must be positive", path, line)
        return lambda S: T0 * S
    raise ScenarioError("no presets for this parameter", path, line)


def resolve_params(sc: Scenario, text: str | None = None) -> tuple[Any, dict]:
    """Check params against the catalog schema and return (entry, kwargs)."""
    from .systems import CATALOG, get_entry

    try:
        entry = get_entry(sc.system)
    except InputError:
        near = difflib.get_close_matches(sc.system, list(CATALOG), n=3, cutoff=0.4)
        hint = f"; nearest matches: {', '.join(near)}" if near else f"; known systems: {', '.join(sorted(CATALOG))}"
        raise ScenarioError(f"unknown system {sc.system!r}{hint}", "system", _find_line(text or "", ("system",))) from None
    unknown = set(sc.params) - set(entry.params)
    if unknown:
        name = sorted(unknown)[0]
        raise ScenarioError(
            f"unknown parameter for {entry.ident}; expected one of {sorted(entry.params)}",
            f"params.{name}",
            _find_line(text or "", ("params", name)),
        )
    kwargs = {}
    for name, spec in entry.params.items():
        if name in sc.params:
            kwargs[name] = _check_kind(name, spec.kind, sc.params[name], text)
        elif spec.required:
            raise ScenarioError("missing required parameter", f"params.{name}")
    if entry.kind == "field" and "n" in kwargs:
        n = kwargs["n"]
        if int(n) != n or n < 8:
            raise ScenarioError("grid needs an integer n >= 8", "params.n")
        kwargs["n"] = int(n)
    modes = entry.extra.get("modes")
    if sc.mode is not None and (modes is None or sc.mode not in modes):
        raise ScenarioError(f"mode must be one of {list(modes or [])}", "mode")
    return entry, kwargs


# -- building and running ---------------------------------------------------------


def _build(entry, kwargs, sc: Scenario):
    """System to integrate (and the partner system for compare runs)."""
    from .mechanics import order_reduce

    built = entry.build(**kwargs)
    if entry.ident == "coupled_oscillators":
        closed, opened = built
        mode = sc.mode or "closed"
        return (opened if mode in ("open", "compare") else closed), (closed if mode == "compare" else None)
    if entry.extra.get("needs_reduction"):
        return order_reduce(built, sc.reduction_iterations), None
    return built, None


def _initial(entry, sysm, sc: Scenario):
    N = sysm.dim
    q = sc.init.q if sc.init.q is not None else list(entry.init[0][:N]) if entry.init else [0.0] * N
    v = sc.init.v if sc.init.v is not None else list(entry.init[1][:N]) if entry.init else [0.0] * N
    if len(q) != N:
        raise ScenarioError(f"expected {N} coordinates, got {len(q)}", "init.q")
    if len(v) != N:
        raise ScenarioError(f"expected {N} velocities, got {len(v)}", "init.v")
    init = [list(q), list(v)]
    if sysm.aux_dim:
        init.append([sc.init.s if sc.init.s is not None else sysm.closure.entropy0])
    return init


def _columns(sysm) -> list[str]:
    cols = ["t"] + [f"q.{i}" for i in range(sysm.dim)] + [f"v.{i}" for i in range(sysm.dim)]
    cols += [f"s.{k}" for k in range(sysm.aux_dim)]
    cols += ["E", "calE", "dcalE_dt_formula", "dcalE_dt_numeric", "residual_E"]
    for g in sysm.generators:
        if g.is_time_translation:
            continue
        cols += [f"J.{g.label}", f"calJ.{g.label}", f"dcalJ_dt_formula.{g.label}", f"dcalJ_dt_numeric.{g.label}", f"residual_J.{g.label}"]
    return cols


def _field_columns() -> list[str]:
    return ["t", "energy", "momentum"]


def _snapshot_columns(n_fields: int) -> list[str]:
    return ["x"] + [f"phi.{i}" for i in range(n_fields)] + [f"dphi_dt.{i}" for i in range(n_fields)] + ["T00", "calT00"]


def available_columns(sc: Scenario, text: str | None = None) -> list[str]:
    entry, kwargs = resolve_params(sc, text)
    if entry.kind == "field":
        return _field_columns()
    sysm, partner = _build(entry, kwargs, sc)
    cols = _columns(sysm)
    if partner is not None:
        cols += ["q_closed.0", "gap"]
    return cols


def validate_scenario(sc: Scenario, text: str | None = None) -> dict:
    """All checks a run performs before integrating; returns the normalized scenario."""
    entry, kwargs = resolve_params(sc, text)
    if entry.kind == "field":
        if sc.init.modes is not None and len(sc.init.modes) != 2:
            raise ScenarioError("need one (mode, amplitude) pair per field", "init.modes")
    else:
        sysm, _ = _build(entry, kwargs, sc)
        _initial(entry, sysm, sc)
    cols = available_columns(sc, text)
    if sc.outputs.columns:
        bad = [c for c in sc.outputs.columns if c not in cols]
        if bad:
            raise ScenarioError(f"unknown columns {bad}; available: {cols}", "outputs.columns")
    return sc.model_dump(mode="json")


def _fmt(x) -> str:
    return format(float(x), ".17g")


def _write_csv(path: Path, meta: list[str], header: list[str], rows) -> None:
    buf = io.StringIO()
    for line in meta:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    path.write_text(buf.getvalue())


def _metadata(sc: Scenario, text: str) -> list[str]:
    return [
        f"system: {sc.system}",
        f"params: {json.dumps(sc.params, sort_keys=True, default=str)}",
        f"versions: noncons {__version__}, numpy {np.__version__}",
        f"scenario_sha256: {hashlib.sha256(text.encode()).hexdigest()}",
        f"seed: {sc.seed}",
        f"created: {datetime.now(timezone.utc).isoformat(timespec='seconds')}",
    ]


def _mechanics_table(sysm, traj) -> tuple[dict[str, np.ndarray], dict]:
    from . import noether

    n = len(traj)
    cols: dict[str, np.ndarray] = {"t": traj.times}
    for i in range(sysm.dim):
        cols[f"q.{i}"] = traj.q[:, i]
    for i in range(sysm.dim):
        cols[f"v.{i}"] = traj.v[:, i]
    for k in range(sysm.aux_dim):
        cols[f"s.{k}"] = traj.aux[:, k]
    summary: dict[str, Any] = {}
    gens = [g for g in sysm.generators if not g.is_time_translation]
    if n >= 5 and traj.uniform:
        rep = noether.balance_residual(traj, sysm)
        cols.update(E=rep.E, calE=rep.calE, dcalE_dt_formula=rep.rate_formula, dcalE_dt_numeric=rep.rate_numeric, residual_E=rep.residual)
        for g in gens:
            c = rep.currents[g.label]
            cols[f"J.{g.label}"] = c.J
            cols[f"calJ.{g.label}"] = c.calJ
            cols[f"dcalJ_dt_formula.{g.label}"] = c.rate_formula
            cols[f"dcalJ_dt_numeric.{g.label}"] = c.rate_numeric
            cols[f"residual_J.{g.label}"] = c.residual
        summary = rep.summary()
    else:
        nan = np.full(n, np.nan)
        E, calE, rate = np.empty(n), np.empty(n), np.empty(n)
        Js = {g.label: (np.empty(n), np.empty(n), np.empty(n)) for g in gens}
        for i in range(n):
            st = traj.state(i)
            E[i] = noether.energy_function(sysm, st.t, st.q, st.v, st.aux)
            calE[i] = noether.total_energy(sysm, st)
            rate[i] = noether.energy_rate(sysm, st)
            for g in gens:
                J, cJ = noether.noether_current(sysm, g, st)
                Js[g.label][0][i], Js[g.label][1][i] = J, cJ
                Js[g.label][2][i] = noether.current_rate(sysm, g, st)
        cols.update(E=E, calE=calE, dcalE_dt_formula=rate, dcalE_dt_numeric=nan, residual_E=nan)
        for g in gens:
            J, cJ, r = Js[g.label]
            cols.update({f"J.{g.label}": J, f"calJ.{g.label}": cJ, f"dcalJ_dt_formula.{g.label}": r,
                         f"dcalJ_dt_numeric.{g.label}": nan, f"residual_J.{g.label}": nan})
        summary = {"energy": {"max_residual": None, "rms_residual": None}, "note": "fewer than 5 uniform samples"}
    return cols, summary


def _run_mechanics(sc, text, entry, kwargs, out_dir: Path) -> dict:
    from . import noether
    from .mechanics import integrate

    sysm, partner = _build(entry, kwargs, sc)
    init = _initial(entry, sysm, sc)
    traj = integrate(sysm, init, (0.0, sc.t_final), sc.dt, method=sc.integrator, rtol=sc.rtol, atol=sc.atol)
    cols, summary = _mechanics_table(sysm, traj)
    report: dict[str, Any] = {
        "system": sc.system,
        "name": sc.name,
        "samples": len(traj),
        "noether": summary,
        "final_state": {
            "t": float(traj.times[-1]),
            "q": traj.q[-1].tolist(),
            "v": traj.v[-1].tolist(),
            **({"s": traj.aux[-1].tolist()} if traj.aux is not None else {}),
        },
    }
    if sysm.closure is not None and len(traj) >= 5 and traj.uniform:
        drift = noether.closure_drift(traj, sysm)
        S = traj.aux[:, 0]
        report["closure"] = {
            "max_drift": float(np.max(np.abs(drift))),
            "entropy_nondecreasing": bool(np.all(np.diff(S) >= 0.0)),
        }
    if partner is not None:
        q0c = init[0] + [kwargs.get("Q0", 0.0)]
        v0c = init[1] + [kwargs.get("V0", 0.0)]
        closed = integrate(partner, [q0c, v0c], (0.0, sc.t_final), sc.dt, method=sc.integrator)
        cols["q_closed.0"] = closed.q[:, 0]
        cols["gap"] = np.abs(closed.q[:, 0] - traj.q[:, 0])
        report["max_open_closed_gap"] = float(np.max(cols["gap"]))
    names = sc.outputs.columns or list(cols)
    rows = np.column_stack([cols[c] for c in names])[:: sc.outputs.every]
    _write_csv(out_dir / f"{sc.name}.csv", _metadata(sc, text), names, rows)
    return report


def _run_field(sc, text, entry, kwargs, out_dir: Path) -> dict:
    from . import fields

    fs = entry.build(**kwargs)
    grid = fs.grid
    modes = sc.init.modes or [(1, 0.1), (1, 0.0)]
    if len(modes) != fs.n_fields:
        raise ScenarioError("need one (mode, amplitude) pair per field", "init.modes")
    phi = np.array([grid.standing_mode(int(m), float(a)) for m, a in modes])
    state0 = fields.FieldState(0.0, phi, np.zeros_like(phi), grid)
    every = sc.outputs.snapshot_every or 0
    series = fields.evolve_field(fs, state0, (0.0, sc.t_final), sc.dt, save_every=1)
    energy = np.array([fields.field_energy(fs, series.state(i)) for i in range(len(series))])
    momentum = np.array([fields.field_momentum(fs, series.state(i)) for i in range(len(series))])
    cols = {"t": series.times, "energy": energy, "momentum": momentum}
    names = sc.outputs.columns or list(cols)
    rows = np.column_stack([cols[c] for c in names])[:: sc.outputs.every]
    meta = _metadata(sc, text)
    _write_csv(out_dir / f"{sc.name}.csv", meta, names, rows)
    snaps = [0] + (list(range(every, len(series), every)) if every else []) + [len(series) - 1]
    for k in sorted(set(snaps)):
        st = series.state(k)
        stress = fields.stress_tensor(fs, st)
        data = [grid.x, *st.phi, *st.dphi_dt, stress.T00, stress.calT00]
        _write_csv(out_dir / f"{sc.name}.snap{k:06d}.csv", meta + [f"t: {_fmt(st.t)}"],
                   _snapshot_columns(fs.n_fields), np.column_stack(data))
    return {
        "system": sc.system,
        "name": sc.name,
        "samples": len(series),
        "energy": {"initial": float(energy[0]), "max_drift": float(np.max(np.abs(energy - energy[0])))},
        "momentum": {"max_drift": float(np.max(np.abs(momentum - momentum[0])))},
        "final_state": {"t": float(series.times[-1])},
    }


def run_scenario(path: str | Path, out_dir: str | Path | None = None) -> tuple[int, dict]:
    """Run one scenario file; returns (exit status, report)."""
    out = Path(out_dir or os.environ.get(OUT_ENV) or ".")
    try:
        sc, text = load_scenario(path)
        validate_scenario(sc, text)
        entry, kwargs = resolve_params(sc, text)
        out.mkdir(parents=True, exist_ok=True)
        if entry.kind == "field":
            report = _run_field(sc, text, entry, kwargs, out)
        else:
            report = _run_mechanics(sc, text, entry, kwargs, out)
    except ScenarioError as exc:
        return EXIT_INPUT, {"error": exc.render(), "path": exc.path, "line": exc.line}
    except InputError as exc:
        return EXIT_INPUT, {"error": str(exc), "path": getattr(exc, "field", None) and f"params.{exc.field}"}
    except NumericError as exc:
        report = {"error": f"{type(exc).__name__}: {exc}", "state": _jsonable(getattr(exc, "state", {}))}
        name = Path(path).stem
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{name}.error.json").write_text(json.dumps(report, indent=2, sort_keys=True))
        return EXIT_NUMERIC, report
    (out / f"{sc.name}.report.json").write_text(json.dumps(_jsonable(report), indent=2, sort_keys=True))
    return EXIT_OK, report


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        return float(x) if math.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


# -- command line -----------------------------------------------------------------


def _cmd_run(args) -> int:
    status, report = run_scenario(args.file, args.out)
    if status:
        print(report.get("error"), file=sys.stderr)
        if status == EXIT_NUMERIC and report.get("state"):
            print(json.dumps(report["state"], indent=2, sort_keys=True), file=sys.stderr)
    else:
        print(json.dumps(report, indent=2, sort_keys=True))
    return status


def _cmd_validate(args) -> int:
    try:
        sc, text = load_scenario(args.file)
        normalized = validate_scenario(sc, text)
    except ScenarioError as exc:
        print(exc.render(), file=sys.stderr)
        return EXIT_INPUT
    except InputError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_INPUT
    print(json.dumps(normalized, indent=2, sort_keys=True))
    return EXIT_OK


def systems_table() -> list[dict]:
    from .systems import list_systems

    return [
        {"id": e.ident, "kind": e.kind, "tags": list(e.tags), "summary": e.summary, "params": e.schema()}
        for e in list_systems()
    ]


def _cmd_list(args) -> int:
    table = systems_table()
    if args.json:
        print(json.dumps(table, indent=2, default=str))
        return EXIT_OK
    for row in table:
        params = ", ".join(f"{k}:{v['kind']}" for k, v in row["params"].items())
        print(f"{row['id']:<24} [{'; '.join(row['tags'])}]")
        print(f"{'':<24} {row['summary']}")
        print(f"{'':<24} params: {params}")
    return EXIT_OK


def _batch_one(path: str, out_root: str) -> tuple[str, int]:
    stem = Path(path).stem
    status, _ = run_scenario(path, Path(out_root) / stem)
    return stem, status


def _cmd_batch(args) -> int:
    files = sorted(str(p) for p in Path(args.dir).glob("*.toml"))
    if not files:
        print(f"no scenario files in {args.dir}", file=sys.stderr)
        return EXIT_INPUT
    out_root = args.out or os.environ.get(OUT_ENV) or "."
    with ProcessPoolExecutor(max_workers=args.jobs) as pool:
        results = list(pool.map(_batch_one, files, [out_root] * len(files)))
    worst = EXIT_OK
    for stem, status in results:
        print(f"{stem}: exit {status}")
        worst = max(worst, status)
    return worst


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="noncons", description="Run nonconservative-mechanics scenarios.")
    parser.add_argument("--version", action="version", version=f"noncons {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="integrate a scenario and write CSV plus report")
    p.add_argument("file")
    p.add_argument("--out", default=None, help=f"output directory (default ${OUT_ENV} or .)")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("validate", help="check a scenario without running it")
    p.add_argument("file")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("list", help="show registered systems")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_list)

    p = sub.add_parser("batch", help="run every *.toml in a directory")
    p.add_argument("dir")
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_batch)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NonconsError as exc:  # pragma: no cover - last-resort mapping
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC if isinstance(exc, NumericError) else EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
