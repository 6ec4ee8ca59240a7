"""Command-line interface: a thin client of the service.

By default commands call the FastAPI app in-process; pass --server to target a
running instance instead.  Exit codes: 0 pass, 1 check failure, 2 Zeno
suspected, 3 unsupported scope, 4 input error.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .service.app import FIXTURE_NAMES, create_app, load_fixture

EXIT_CHECK_FAIL = 1
EXIT_ZENO = 2
EXIT_UNSUPPORTED = 3
EXIT_INPUT = 4

_ERROR_EXIT_CODES = {
    "ZenoSuspectedError": EXIT_ZENO,
    "UnsupportedIsotropyError": EXIT_UNSUPPORTED,
    "ValidationError": EXIT_INPUT,
    "SpecParseError": EXIT_INPUT,
    "ExprSyntaxError": EXIT_INPUT,
    "UnknownNameError": EXIT_INPUT,
    "DimensionMismatchError": EXIT_INPUT,
    "RequestValidationError": EXIT_INPUT,
}


def _client(server: str | None):
    if server:
        import httpx

        return httpx.Client(base_url=server, timeout=600.0)
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        from fastapi.testclient import TestClient

    return TestClient(create_app())


def _load_spec_arg(spec_arg: str) -> dict:
    if spec_arg in FIXTURE_NAMES:
        return load_fixture(spec_arg)
    path = Path(spec_arg)
    if not path.exists():
        click.echo(f"error: spec {spec_arg!r} is neither a file nor a bundled fixture "
                   f"({', '.join(FIXTURE_NAMES)})", err=True)
        sys.exit(EXIT_INPUT)
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        click.echo(f"error: {path}: invalid JSON at line {exc.lineno}, column {exc.colno}: "
                   f"{exc.msg}", err=True)
        sys.exit(EXIT_INPUT)


def _post(client, endpoint: str, payload: dict) -> dict:
    resp = client.post(endpoint, json=payload)
    try:
        body = resp.json()
    except ValueError:
        click.echo(f"error: malformed response from {endpoint}: {resp.text[:200]}", err=True)
        sys.exit(EXIT_INPUT)
    if resp.status_code >= 400:
        if "error" in body:
            etype = body["error"].get("type", "")
            click.echo(f"error [{etype}]: {body['error'].get('message', '')}", err=True)
            sys.exit(_ERROR_EXIT_CODES.get(etype, EXIT_CHECK_FAIL))
        click.echo(f"error: {endpoint} returned {resp.status_code}: {body}", err=True)
        sys.exit(EXIT_INPUT)
    return body


def _floats(text: str | None):
    if text is None:
        return None
    try:
        return [float(v) for v in text.split(",") if v.strip() != ""]
    except ValueError:
        click.echo(f"error: expected comma-separated floats, got {text!r}", err=True)
        sys.exit(EXIT_INPUT)


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def _write_csv(path: Path, table: dict):
    with path.open("w") as fh:
        fh.write(",".join(table["columns"]) + "\n")
        for row in table["rows"]:
            cells = []
            for name, v in zip(table["columns"], row):
                cells.append(str(int(v)) if name == "segment_index" else _fmt(v))
            fh.write(",".join(cells) + "\n")


def _emit_json(data: dict, out: Path | None, filename: str):
    text = json.dumps(data, indent=2)
    click.echo(text)
    if out is not None:
        (out / filename).write_text(text + "\n")


_spec_opt = click.option("--spec", "spec_arg", required=True,
                         help="Path to a spec JSON file, or a bundled fixture name "
                              f"({', '.join(FIXTURE_NAMES)}).")
_server_opt = click.option("--server", default=None,
                           help="Base URL of a running service; default runs in-process.")
_out_opt = click.option("--out", type=click.Path(file_okay=False, path_type=Path),
                        default=Path("."), help="Output directory for CSV/report files.")
_seed_opt = click.option("--seed", type=int, default=None, help="Sampling seed override.")


@click.group()
def main():
    """Hybrid Hamiltonian systems: simulate, verify symmetries, reduce, compare."""


@main.command()
@_spec_opt
@_server_opt
@_out_opt
@click.option("--x0", default=None, help="Initial state, comma-separated (q1..qn,p1..pn).")
@click.option("--T", "T", type=float, default=None, help="Final time.")
@click.option("--h", type=float, default=None, help="Integration step.")
@click.option("--method", type=click.Choice(["leapfrog", "rk4"]), default=None)
def simulate(spec_arg, server, out, x0, T, h, method):
    """Run the hybrid system and write the trajectory CSV."""
    payload = {"spec": _load_spec_arg(spec_arg), "x0": _floats(x0), "T": T, "h": h,
               "method": method}
    body = _post(_client(server), "/simulate", payload)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "trajectory.csv", body["trajectory"])
    summary = {k: body[k] for k in ("status", "message", "method", "n_segments")}
    summary["n_impacts"] = len(body["impacts"])
    summary["trajectory_csv"] = str(out / "trajectory.csv")
    click.echo(json.dumps(summary, indent=2))
    if body["status"] == "zeno":
        sys.exit(EXIT_ZENO)


@main.command()
@_spec_opt
@_server_opt
@_seed_opt
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), default=None,
              help="Also write the report JSON into this directory.")
def verify(spec_arg, server, seed, out):
    """Run all symmetry/momentum-map checks and print the report."""
    body = _post(_client(server), "/verify", {"spec": _load_spec_arg(spec_arg), "seed": seed})
    report = body["report"]
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    _emit_json(report, out, "verify_report.json")
    if not report["overall_pass"]:
        sys.exit(EXIT_CHECK_FAIL)


@main.command()
@_spec_opt
@_server_opt
@_seed_opt
@click.option("--mu", required=True, help="Momentum level, comma-separated.")
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), default=None,
              help="Also write the summary JSON into this directory.")
def reduce(spec_arg, server, seed, mu, out):
    """Build and print the reduced system at one momentum level."""
    payload = {"spec": _load_spec_arg(spec_arg), "mu": _floats(mu), "seed": seed}
    body = _post(_client(server), "/reduce", payload)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    _emit_json(body["summary"], out, "reduced_system.json")


@main.command()
@_spec_opt
@_server_opt
@_out_opt
@_seed_opt
@click.option("--x0", default=None, help="Initial state, comma-separated.")
@click.option("--T", "T", type=float, default=None, help="Final time.")
@click.option("--h", type=float, default=None, help="Integration step.")
@click.option("--tol-state", type=float, default=None, help="Sup-state tolerance.")
@click.option("--tol-time", type=float, default=None, help="Impact-time tolerance.")
def compare(spec_arg, server, out, seed, x0, T, h, tol_state, tol_time):
    """Certify that the projected full flow matches the reduced flow."""
    payload = {"spec": _load_spec_arg(spec_arg), "x0": _floats(x0), "T": T, "h": h,
               "seed": seed, "tol_state": tol_state, "tol_time": tol_time}
    body = _post(_client(server), "/compare", payload)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "full_projected.csv", body["full_projected"])
    _write_csv(out / "reduced.csv", body["reduced"])
    report = dict(body["report"])
    report["mu0"] = body["mu0"]
    report["chart_sequence"] = body["chart_sequence"]
    _emit_json(report, out, "compare_report.json")
    if not report["pass"]:
        sys.exit(EXIT_CHECK_FAIL)


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8000)
def serve(host, port):
    """Run the service with uvicorn."""
    import uvicorn

    uvicorn.run(create_app(), host=host, port=port)


@main.command()
@click.argument("name", type=click.Choice(list(FIXTURE_NAMES)))
def fixture(name):
    """Print a bundled fixture spec (redirect to a file to edit it)."""
    click.echo(json.dumps(load_fixture(name), indent=2))


if __name__ == "__main__":
    main()
