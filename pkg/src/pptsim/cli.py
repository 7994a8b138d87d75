"""Batch front end: single bounds, sweeps, exports.

Each grid point becomes one run record; records serialize to CSV (stable
column schema ``kind,params...,value,status,gap,iters,seconds``) and to
JSON alongside the library version. Plots are rendered from the records,
never by re-solving. Points are dispatched to a small worker pool sized
by the ``PPTSIM_WORKERS`` environment variable; results always come back
in grid order. A point whose solve fails is recorded with an error
status and the sweep continues.
"""

from __future__ import annotations

import concurrent.futures
import csv
import io
import json
import os
import re
import time
from pathlib import Path

import click
import numpy as np

from . import __version__
from .bounds import (
    cpptp_general,
    e2pe_general,
    e2pe_qec_reduced,
    e2pe_superchannel_general,
    e2pe_teleport_reduced,
    build_cpptp_general,
    build_qec_general,
    build_qec_reduced,
    build_teleport_general,
    build_teleport_reduced,
)
from .external import solve_external_sparse
from .plotting import render_sweep
from .qobjects import ChoiChannel, DensityState, choi_from_kraus, identity_channel
from .resources import SweepSpec, build_instance, sweep_points
from .sdpmodel import compile_problem, embed_real, export_sdpa, sdpa_objective_value
from .solver import solve

# Above this extension side the dense compile is not worth waiting for;
# generals go through the sparse assembly and the first-order backend.
_DIRECT_SIDE_LIMIT = 100

_PARAM_COLUMNS = {
    "mixed-state": ("p", "d", "seed"),
    "tmsv": ("lam", "d"),
    "amp-damp": ("gamma10", "gamma21", "gamma20", "d"),
}

_SWEEP_AXIS = {"mixed-state": "p", "tmsv": "lam", "amp-damp": "gamma10"}


def _parse_range(text: str, what: str) -> tuple[float, ...]:
    """``start:stop:count`` with inclusive endpoints, or a single value."""
    parts = text.split(":")
    try:
        if len(parts) == 1:
            return (float(parts[0]),)
        if len(parts) == 3:
            start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
            if count < 0:
                raise ValueError
            return tuple(float(x) for x in np.linspace(start, stop, count))
    except ValueError:
        pass
    raise click.BadParameter(f"expected a value or start:stop:count, got {text!r}", param_hint=what)


def _parse_gamma(text: str) -> tuple[tuple[float, ...], ...]:
    parts = text.split(",")
    if len(parts) != 3:
        raise click.BadParameter(
            f"expected gamma10,gamma21,gamma20 (each a value or range), got {text!r}",
            param_hint="--gamma",
        )
    return tuple(_parse_range(p, "--gamma") for p in parts)


def _spec_points(spec: SweepSpec) -> list[dict[str, float]]:
    pts = sweep_points(spec)
    if not pts:
        raise click.ClickException("no instances")
    return pts


# ---------------------------------------------------------------------------
# per-point solves (module level so a process pool can pickle tasks)


def _general_record(prob, eps: float) -> dict:
    side = max(v.side for v in prob.variables.values())
    if side <= _DIRECT_SIDE_LIMIT:
        res = solve(prob)
        if res.status != "optimal":
            raise RuntimeError(f"solver status {res.status!r}")
        return {"value": res.value, "status": res.status, "gap": res.gap, "iters": res.iters}
    ext = solve_external_sparse(prob, backend="scs", eps=eps)
    if not ext.status.startswith("solved"):
        raise RuntimeError(f"scs status {ext.status!r}")
    return {
        "value": ext.value,
        "status": f"scs:{ext.status}",
        "gap": ext.gap,
        "iters": ext.iters,
    }


def _solve_point(task: dict) -> dict:
    spec = SweepSpec(task["sweep"], task["grid"], task["d"], task.get("seed"))
    instance = build_instance(spec, task["point"])
    d = task["d"]
    kind = task["kind"]
    t0 = time.perf_counter()
    try:
        if spec.kind == "amp-damp":
            resource = choi_from_kraus(instance, (3,), (3,))
            if kind == "2pe-reduced":
                r = e2pe_qec_reduced(resource, d)
                stats = {"value": r.value, "status": r.solver.status, "gap": r.solver.gap, "iters": r.solver.iters}
            else:
                stats = _general_record(build_qec_general(identity_channel(d), resource), task["eps"])
        else:
            if kind == "2pe-reduced":
                r = e2pe_teleport_reduced(instance, d)
                stats = {"value": r.value, "status": r.solver.status, "gap": r.solver.gap, "iters": r.solver.iters}
            elif kind == "cpptp":
                r = cpptp_general(identity_channel(d), instance)
                stats = {"value": r.value, "status": r.solver.status, "gap": r.solver.gap, "iters": r.solver.iters}
            else:
                stats = _general_record(build_teleport_general(identity_channel(d), instance), task["eps"])
    except Exception as exc:  # recorded, never fatal mid-sweep
        stats = {"value": None, "status": f"error: {type(exc).__name__}: {exc}"[:160], "gap": None, "iters": None}
    seconds = time.perf_counter() - t0
    params = dict(task["point"])
    params["d"] = d
    if spec.kind == "mixed-state":
        params["seed"] = 0 if task.get("seed") is None else task["seed"]
    return {
        "kind": kind,
        "sweep": spec.kind,
        "params": params,
        "value": stats["value"],
        "status": stats["status"],
        "gap": stats["gap"],
        "iters": stats["iters"],
        "seconds": seconds,
    }


def _dispatch(tasks: list[dict]) -> list[dict]:
    workers = int(os.environ.get("PPTSIM_WORKERS", "1"))
    if workers <= 1 or len(tasks) <= 1:
        return [_solve_point(t) for t in tasks]
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_solve_point, tasks))


# ---------------------------------------------------------------------------
# record serialization


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _records_csv(records: list[dict]) -> str:
    cols = _PARAM_COLUMNS[records[0]["sweep"]]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["kind", *cols, "value", "status", "gap", "iters", "seconds"])
    for r in records:
        w.writerow(
            [r["kind"], *(_cell(r["params"][c]) for c in cols),
             _cell(r["value"]), r["status"], _cell(r["gap"]), _cell(r["iters"]), _cell(r["seconds"])]
        )
    return buf.getvalue()


def _records_json(records: list[dict]) -> str:
    doc = {
        "library_version": __version__,
        "records": [
            {
                "kind": r["kind"],
                "sweep": r["sweep"],
                "params": r["params"],
                "value": r["value"],
                "status": r["status"],
                "gap": r["gap"],
                "iters": r["iters"],
                "seconds": r["seconds"],
            }
            for r in records
        ],
    }
    return json.dumps(doc, indent=2) + "\n"


def _records_svg(records: list[dict], title: str) -> str:
    axis = _SWEEP_AXIS[records[0]["sweep"]]
    series: dict[str, list[tuple[float, float]]] = {}
    for r in records:
        if r["value"] is None:
            continue  # failed points stay out of the plot
        series.setdefault(r["kind"], []).append((r["params"][axis], r["value"]))
    return render_sweep(series, x_label=axis, y_label="simulation error", title=title)


def _emit(records, csv_path, json_path, svg_path, title):
    text = _records_csv(records)
    click.echo(text, nl=False)
    if csv_path:
        Path(csv_path).write_text(text)
    if json_path:
        Path(json_path).write_text(_records_json(records))
    if svg_path:
        Path(svg_path).write_text(_records_svg(records, title))


# ---------------------------------------------------------------------------
# commands


@click.group()
@click.version_option(version=__version__)
def main() -> None:
    """SDP lower bounds on teleportation and error-correction simulation."""


@main.command()
@click.option("--state", type=click.Choice(["mixed", "tmsv"]), required=True,
              help="resource family: isotropic-like mixture or truncated TMSV")
@click.option("--p", "p_spec", default=None, help="mixing weight, value or start:stop:count")
@click.option("--lambda", "lam_spec", default=None, help="squeezing parameter, value or range")
@click.option("--d", default=2, show_default=True, help="target dimension")
@click.option("--seed", default=0, show_default=True, help="Ginibre seed for the mixture sigmas")
@click.option("--method", type=click.Choice(["2pe-reduced", "2pe-general", "cpptp"]),
              default="2pe-reduced", show_default=True)
@click.option("--compare", is_flag=True, help="run 2pe-reduced and cpptp per point")
@click.option("--eps", default=1e-6, show_default=True,
              help="accuracy target for large general instances")
@click.option("--csv", "csv_path", type=click.Path(), default=None)
@click.option("--json", "json_path", type=click.Path(), default=None)
@click.option("--svg", "svg_path", type=click.Path(), default=None)
def teleport(state, p_spec, lam_spec, d, seed, method, compare, eps, csv_path, json_path, svg_path):
    """Teleportation simulation error over a resource-state grid."""
    if state == "mixed":
        if p_spec is None:
            raise click.UsageError("--state mixed needs --p")
        grid = {"p": _parse_range(p_spec, "--p")}
        spec = SweepSpec("mixed-state", grid, d, seed) if grid["p"] else None
        sweep, seed_arg = "mixed-state", seed
    else:
        if lam_spec is None:
            raise click.UsageError("--state tmsv needs --lambda")
        grid = {"lam": _parse_range(lam_spec, "--lambda")}
        spec = SweepSpec("tmsv", grid, d) if grid["lam"] else None
        sweep, seed_arg = "tmsv", None
    if spec is None:
        raise click.ClickException("no instances")
    points = _spec_points(spec)
    methods = ["2pe-reduced", "cpptp"] if compare else [method]
    tasks = [
        {"kind": m, "sweep": sweep, "grid": grid, "point": pt, "d": d, "seed": seed_arg, "eps": eps}
        for pt in points
        for m in methods
    ]
    _emit(_dispatch(tasks), csv_path, json_path, svg_path, f"teleportation, {state} resource")


@main.command()
@click.option("--gamma", "gamma_spec", required=True,
              help="gamma10,gamma21,gamma20; the components accept ranges")
@click.option("--d", default=3, show_default=True, help="target dimension")
@click.option("--method", type=click.Choice(["reduced", "general", "2pe-reduced", "2pe-general"]),
              default="reduced", show_default=True)
@click.option("--eps", default=1e-6, show_default=True,
              help="accuracy target for large general instances")
@click.option("--csv", "csv_path", type=click.Path(), default=None)
@click.option("--json", "json_path", type=click.Path(), default=None)
@click.option("--svg", "svg_path", type=click.Path(), default=None)
def qec(gamma_spec, d, method, eps, csv_path, json_path, svg_path):
    """Error-correction simulation error over an amplitude-damping grid."""
    g10, g21, g20 = _parse_gamma(gamma_spec)
    if not (g10 and g21 and g20):
        raise click.ClickException("no instances")
    grid = {"gamma10": g10, "gamma21": g21, "gamma20": g20}
    spec = SweepSpec("amp-damp", grid, d)
    points = _spec_points(spec)
    kind = "2pe-" + method if method in ("reduced", "general") else method
    tasks = [
        {"kind": kind, "sweep": "amp-damp", "grid": grid, "point": pt, "d": d, "eps": eps}
        for pt in points
    ]
    _emit(_dispatch(tasks), csv_path, json_path, svg_path, "error correction, amp-damp resource")


def _export_problem(kind, sweep, point, d, seed):
    spec = SweepSpec(sweep, {k: (v,) for k, v in point.items()}, d, seed)
    instance = build_instance(spec, point)
    if sweep == "amp-damp":
        resource = choi_from_kraus(instance, (3,), (3,))
        if kind == "2pe-reduced":
            return build_qec_reduced(resource, d)
        return build_qec_general(identity_channel(d), resource)
    if kind == "2pe-reduced":
        return build_teleport_reduced(instance, d)
    if kind == "cpptp":
        return build_cpptp_general(identity_channel(d), instance)
    return build_teleport_general(identity_channel(d), instance)


def _read_external_objective(path: str) -> float:
    text = Path(path).read_text()
    m = re.search(r"objValPrimal\s*[=:]\s*([-+0-9.eEdD]+)", text)
    if m:
        return float(m.group(1).replace("d", "e").replace("D", "e"))
    for token in text.split():
        try:
            return float(token)
        except ValueError:
            continue
    raise click.ClickException(f"no objective value found in {path}")


@main.command()
@click.option("--kind", type=click.Choice(["teleport", "qec"]), default="teleport", show_default=True)
@click.option("--state", type=click.Choice(["mixed", "tmsv"]), default="mixed", show_default=True)
@click.option("--p", "p_spec", default=None)
@click.option("--lambda", "lam_spec", default=None)
@click.option("--gamma", "gamma_spec", default=None)
@click.option("--d", default=2, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--method", type=click.Choice(["2pe-reduced", "2pe-general", "cpptp"]),
              default="2pe-reduced", show_default=True)
@click.option("--out", "out_path", type=click.Path(), required=True, help="SDPA .dat-s destination")
@click.option("--solve-external", "result_path", type=click.Path(exists=True), default=None,
              help="file holding an external solver's primal objective; reported next to the internal value")
def export(kind, state, p_spec, lam_spec, gamma_spec, d, seed, method, out_path, result_path):
    """Write one instance in SDPA sparse format."""
    if kind == "qec":
        if gamma_spec is None:
            raise click.UsageError("--kind qec needs --gamma")
        g10, g21, g20 = _parse_gamma(gamma_spec)
        pts = [{"gamma10": a, "gamma21": b, "gamma20": c} for a in g10 for b in g21 for c in g20]
        sweep, seed_arg = "amp-damp", None
    elif state == "mixed":
        if p_spec is None:
            raise click.UsageError("--state mixed needs --p")
        pts = [{"p": v} for v in _parse_range(p_spec, "--p")]
        sweep, seed_arg = "mixed-state", seed
    else:
        if lam_spec is None:
            raise click.UsageError("--state tmsv needs --lambda")
        pts = [{"lam": v} for v in _parse_range(lam_spec, "--lambda")]
        sweep, seed_arg = "tmsv", None
    if not pts:
        raise click.ClickException("no instances")
    if len(pts) > 1:
        raise click.ClickException(f"export needs a single instance, got {len(pts)}")
    prob = _export_problem(method, sweep, pts[0], d, seed_arg)
    if max(v.side for v in prob.variables.values()) > _DIRECT_SIDE_LIMIT:
        raise click.ClickException("instance too large to export through the dense compiler")
    c = compile_problem(prob)
    if not c.is_real:
        c = embed_real(c)
    export_sdpa(c, out_path)
    click.echo(f"wrote {out_path}: {c.m} parameters, {len(c.blocks)} blocks, {c.n_eq} equality rows")
    if result_path:
        res = solve(prob)
        external = sdpa_objective_value(c, _read_external_objective(result_path))
        click.echo(f"internal value  {res.value!r}")
        click.echo(f"external value  {external!r}")
        click.echo(f"difference      {abs(res.value - external):.3e}")


if __name__ == "__main__":
    main()
