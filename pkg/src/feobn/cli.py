"""Command-line front door: validate, learn, solve, report, sample.

Exit codes: 0 success, 2 input error, 3 infeasible constraints, 4 internal
error. Diagnostics go to stderr as ``error: <code>: <message>`` lines; data
artifacts go to files (or stdout where documented) so output stays pipeable.
"""

from __future__ import annotations

import json
import sys

import click

from . import fixtures as fixture_mod
from .errors import FeobnError, InfeasibleConstraints
from .inference import feo_deviation, feo_table
from .learning import DiscretizationPolicy, discretize, fit_parameters, ingest_csv
from .network import RoleAssignment, assign_roles, build_network, validate
from .sampler import SampleRequest, export_csv, sample
from .solver import (
    add_feasibility_constraints,
    apply_solution,
    build_feo_system,
    enumerate_free_parameters,
    solve as solve_system,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INFEASIBLE = 3
EXIT_INTERNAL = 4


def _fail(code: int, err: Exception) -> None:
    kind = getattr(err, "code", "internal")
    click.echo(f"error: {kind}: {err}", err=True)
    sys.exit(code)


def _guarded(fn):
    """Anything a command did not handle itself is an internal error (exit 4)."""
    import functools

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (SystemExit, click.exceptions.Exit, click.Abort):
            raise
        except Exception as err:  # noqa: BLE001 - the CLI boundary
            _fail(EXIT_INTERNAL, err)
    return wrapper


def _load_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _load_scenario(network_path, roles_path):
    network = build_network(_load_json(network_path))
    roles_doc = _load_json(roles_path)
    roles = RoleAssignment.from_document(roles_doc)
    free = fixture_mod.free_entries_from_document(network, roles_doc)
    return assign_roles(network, roles, free)


@click.group()
def main():
    """Fair-opportunity editing for discrete Bayesian networks."""


@main.command("validate")
@click.argument("network_path", type=click.Path(exists=True))
@click.argument("roles_path", type=click.Path(exists=True), required=False)
@click.option("--json", "as_json", is_flag=True, help="machine-readable report")
@_guarded
def cmd_validate(network_path, roles_path, as_json):
    """Check a network document (and optionally a roles document) for validity."""
    try:
        doc = _load_json(network_path)
        findings = validate(doc)
        if findings:
            if as_json:
                click.echo(json.dumps({"valid": False, "findings": [
                    {"code": f.code, "where": f.where, "detail": f.detail} for f in findings]}))
            else:
                for f in findings:
                    click.echo(f"error: {f.code}: {f.where}: {f.detail}", err=True)
            sys.exit(EXIT_INPUT)
        network = build_network(doc)
        if roles_path:
            roles_doc = _load_json(roles_path)
            roles = RoleAssignment.from_document(roles_doc)
            free = fixture_mod.free_entries_from_document(network, roles_doc)
            assign_roles(network, roles, free)
        click.echo(json.dumps({"valid": True}) if as_json else "ok")
    except FeobnError as err:
        _fail(EXIT_INPUT, err)
    except (OSError, json.JSONDecodeError, KeyError) as err:
        _fail(EXIT_INPUT, err)


@main.command("learn")
@click.argument("csv_path", type=click.Path(exists=True))
@click.option("--schema", "schema_path", required=True, type=click.Path(exists=True))
@click.option("--structure", "structure_path", required=True, type=click.Path(exists=True))
@click.option("--smoothing", default=0.0, show_default=True,
              help="pseudocount added to every CPT cell")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--json", "as_json", is_flag=True)
@_guarded
def cmd_learn(csv_path, schema_path, structure_path, smoothing, out_path, as_json):
    """Fit CPTs by maximum likelihood and write a network document."""
    try:
        schema = _load_json(schema_path)
        data = ingest_csv(csv_path, schema)
        policy = DiscretizationPolicy.from_document(schema.get("discretize", {}))
        data = discretize(data, policy)
        report: dict = {}
        network = fit_parameters(_load_json(structure_path), data, smoothing, report)
        with open(out_path, "w", encoding="utf-8") as fh:
            json.dump(network.to_document(), fh, indent=2)
            fh.write("\n")
        summary = {
            "rows_used": len(data),
            "rows_dropped": data.provenance.get("rows_dropped_missing", 0),
            "transforms": data.provenance.get("transforms", []),
            "uniform_filled_rows": report.get("uniform_filled_rows", []),
            "out": out_path,
        }
        if as_json:
            click.echo(json.dumps(summary))
        else:
            click.echo(f"fitted {len(network.variables)} CPTs from {len(data)} rows -> {out_path}")
            for t in summary["transforms"]:
                click.echo(f"  {t}")
            for row in summary["uniform_filled_rows"]:
                click.echo(f"  warning: unseen parent assignment {row} got the uniform vector", err=True)
    except FeobnError as err:
        _fail(EXIT_INPUT, err)
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as err:
        _fail(EXIT_INPUT, err)


@main.command("solve")
@click.argument("network_path", type=click.Path(exists=True))
@click.argument("roles_path", type=click.Path(exists=True))
@click.option("--constraints", "constraints_path", type=click.Path(exists=True))
@click.option("--mode", type=click.Choice(["auto", "exact", "closest"]), default="auto",
              show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path(),
              help="corrected network document")
@click.option("--solution", "solution_path", type=click.Path(),
              help="solution report JSON (default: <out>.solution.json)")
@click.option("--json", "as_json", is_flag=True)
@_guarded
def cmd_solve(network_path, roles_path, constraints_path, mode, out_path, solution_path, as_json):
    """Build the fairness system, solve it, and write the corrected network."""
    try:
        scenario = _load_scenario(network_path, roles_path)
        index = enumerate_free_parameters(scenario)
        system = build_feo_system(scenario, index)
        if constraints_path:
            system = add_feasibility_constraints(system, _load_json(constraints_path))
        pre = feo_deviation(scenario)
        solution = solve_system(system, mode)
        if solution is None:
            click.echo("error: infeasible-constraints: no exact solution exists", err=True)
            sys.exit(EXIT_INFEASIBLE)
        corrected = apply_solution(scenario, solution, index)
        post = feo_deviation(assign_roles(corrected, scenario.roles))
        with open(out_path, "w", encoding="utf-8") as fh:
            json.dump(corrected.to_document(), fh, indent=2)
            fh.write("\n")
        sol_path = solution_path or out_path + ".solution.json"
        report = solution.report(system)
        report["deviation"] = {"pre": pre, "post": post}
        with open(sol_path, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2)
            fh.write("\n")
        if as_json:
            click.echo(json.dumps({"status": solution.status, "pre_deviation": pre,
                                   "post_deviation": post, "out": out_path,
                                   "solution": sol_path}))
        else:
            click.echo(f"status: {solution.status}")
            click.echo(f"deviation: {pre:.6g} -> {post:.6g}")
            click.echo(f"wrote {out_path} and {sol_path}")
    except InfeasibleConstraints as err:
        click.echo(f"error: {err.code}: {err}", err=True)
        for c in err.conflicts:
            click.echo(f"  conflict: {c}", err=True)
        sys.exit(EXIT_INFEASIBLE)
    except FeobnError as err:
        _fail(EXIT_INPUT, err)
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as err:
        _fail(EXIT_INPUT, err)


@main.command("report")
@click.argument("pre_network", type=click.Path(exists=True))
@click.argument("roles_path", type=click.Path(exists=True))
@click.option("--post", "post_network", type=click.Path(exists=True),
              help="corrected network document; omit to report pre only")
@click.option("--out-dir", default=".", show_default=True, type=click.Path())
@click.option("--json", "as_json", is_flag=True)
@_guarded
def cmd_report(pre_network, roles_path, post_network, out_dir, as_json):
    """Emit pre.csv / post.csv opportunity tables plus a deviation summary."""
    import os

    try:
        scenario = _load_scenario(pre_network, roles_path)
        pre_table = feo_table(scenario)
        pre_dev = feo_deviation(scenario, pre_table)
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "pre.csv"), "w", encoding="utf-8") as fh:
            fh.write(pre_table.to_csv())
        summary = {"pre_deviation": pre_dev}
        if post_network:
            post_scenario = _load_scenario(post_network, roles_path)
            post_table = feo_table(post_scenario)
            summary["post_deviation"] = feo_deviation(post_scenario, post_table)
            with open(os.path.join(out_dir, "post.csv"), "w", encoding="utf-8") as fh:
                fh.write(post_table.to_csv())
        with open(os.path.join(out_dir, "deviation.json"), "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2)
            fh.write("\n")
        click.echo(json.dumps(summary) if as_json
                   else f"wrote tables to {out_dir} (pre deviation {pre_dev:.6g})")
    except FeobnError as err:
        _fail(EXIT_INPUT, err)
    except (OSError, json.JSONDecodeError, KeyError) as err:
        _fail(EXIT_INPUT, err)


@main.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True, envvar="FEOBN_HOST")
@click.option("--port", default=8080, show_default=True, type=int, envvar="FEOBN_PORT")
@click.option("--capacity", default=64, show_default=True, type=int,
              envvar="FEOBN_SESSION_CAPACITY",
              help="session store capacity (LRU eviction beyond this)")
@click.option("--solve-timeout", default=30.0, show_default=True, type=float,
              envvar="FEOBN_SOLVE_TIMEOUT")
@_guarded
def cmd_serve(host, port, capacity, solve_timeout):
    """Run the what-if HTTP service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(capacity, solve_timeout), host=host, port=port)


@main.command("sample")
@click.argument("network_path", type=click.Path(exists=True))
@click.option("--count", required=True, type=int)
@click.option("--seed", required=True, type=int)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--json", "as_json", is_flag=True)
@_guarded
def cmd_sample(network_path, count, seed, out_path, as_json):
    """Draw records by seeded ancestral sampling; writes CSV plus manifest."""
    try:
        if count < 1:
            raise ValueError("count must be >= 1")
        network = build_network(_load_json(network_path))
        data = sample(network, SampleRequest(count=count, seed=seed))
        export_csv(data, out_path)
        if as_json:
            click.echo(json.dumps({"rows": count, "out": out_path,
                                   "manifest": out_path + ".manifest.json"}))
        else:
            click.echo(f"wrote {count} rows to {out_path}")
    except FeobnError as err:
        _fail(EXIT_INPUT, err)
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as err:
        _fail(EXIT_INPUT, err)


if __name__ == "__main__":
    main()
