"""Command-line front end and the file schemas shared with the plotting tools.

Subcommands
-----------
generate      draw signals and write a tidy ``signal-trace`` CSV
replica       Monte Carlo fixed point for one (rho, r); writes a JSON record
baseline      memoryless-signal critical rate for one rho; writes JSON
experiment    row-deletion reconstruction trials; writes a trials CSV
extrapolate   group a trials CSV by n, fit alpha_c(n) vs 1/n; writes JSON
solve         one constrained reconstruction from matrix/rhs CSVs
sweep         replica solves over a grid in rho or r; writes a tidy CSV

File formats (the contract consumed by the plotting component)
---------------------------------------------------------------
JSON records are objects with ``schema_version`` (currently 1), ``command``,
the payload fields listed per subcommand below, and a trailing ``timestamp``
field.  The timestamp is the only field allowed to differ between reruns with
identical flags; everything else is byte-stable.  Floats rely on Python's
shortest round-trip repr, so every value reloads exactly.

Tidy CSVs carry one header row and ``%.17g`` floats:

=============  ====================================
kind           columns
=============  ====================================
signal-trace   series,index,value
alpha-vs-rho   series,rho,alpha_c,stderr
alpha-vs-r     series,r,alpha_c,stderr
alpha-vs-invN  series,inv_n,alpha_c,stderr
=============  ====================================

The trials CSV has columns ``n,seed,pc,status`` where ``seed`` is the trial
index t (the full stream key is ``(--seed, n, t)``), ``pc`` is the critical
row count (empty when aborted) and ``status`` is ``ok`` or ``aborted``.

Matrix and vector CSVs (``solve`` inputs and output) are headerless
comma-separated numeric grids, one matrix row or vector entry per line.
A single signal can also be saved as a one-column CSV with header ``x``
(``generate --signal-out``).

An empty result set still produces the header row, never an empty file.
``--threads`` caps worker counts and can also be set through the
``SARCS_THREADS`` environment variable; an explicit flag wins.
"""

from __future__ import annotations

import csv
import datetime
import json
from concurrent.futures import ThreadPoolExecutor
from functools import wraps

import click
import numpy as np

from .exceptions import (ConditioningError, ExperimentError, ParameterError,
                         SchemaError, ShapeError, SolverFailure, TrialAborted)
from .experiment import extrapolate as fit_levels
from .experiment import level_from_pcs, run_trial
from .recon import SolverSettings, solve_measurements
from .replica import (ReplicaConfig, baseline_alpha_c, solve_alpha_c,
                      stability_report)
from .sar import SarParams, generate_signal

SCHEMA_VERSION = 1

PLOT_SCHEMAS = {
    "signal-trace": ("series", "index", "value"),
    "alpha-vs-rho": ("series", "rho", "alpha_c", "stderr"),
    "alpha-vs-r": ("series", "r", "alpha_c", "stderr"),
    "alpha-vs-invN": ("series", "inv_n", "alpha_c", "stderr"),
}

TRIALS_COLUMNS = ("n", "seed", "pc", "status")

_MODULE_ERRORS = (ParameterError, ShapeError, SchemaError, ConditioningError,
                  ExperimentError, SolverFailure, TrialAborted)


def _fmt(v) -> str:
    return f"{float(v):.17g}"


def _timestamp() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat(
        timespec="seconds")


# ---------------------------------------------------------------------------
# writers and the matching readers (round-trip contract)

def emit_plot_data(results, kind: str, stream) -> None:
    """Write a tidy CSV of the given kind to a text stream.

    ``results`` is an iterable of mappings whose keys must equal the schema
    columns for ``kind`` exactly; anything else raises SchemaError.  An empty
    iterable yields a header-only CSV.
    """
    if kind not in PLOT_SCHEMAS:
        raise SchemaError(f"unknown plot kind {kind!r}; expected one of "
                          f"{sorted(PLOT_SCHEMAS)}")
    columns = PLOT_SCHEMAS[kind]
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(columns)
    for row in results:
        if set(row) != set(columns):
            raise SchemaError(
                f"row keys {sorted(row)} do not match {kind!r} columns "
                f"{list(columns)}")
        out = []
        for col in columns:
            if col == "series":
                out.append(str(row[col]))
            elif col == "index":
                out.append(str(int(row[col])))
            else:
                try:
                    out.append(_fmt(row[col]))
                except (TypeError, ValueError) as exc:
                    raise SchemaError(
                        f"column {col!r} must be numeric, got "
                        f"{row[col]!r}") from exc
        writer.writerow(out)


def write_plot_csv(path: str, results, kind: str) -> None:
    with open(path, "w", newline="") as fh:
        emit_plot_data(results, kind, fh)


def read_plot_csv(path: str):
    """Load a tidy CSV, inferring its kind from the header.

    Returns (kind, rows) with numeric columns converted back to int/float.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = tuple(next(reader))
        except StopIteration:
            raise SchemaError(f"{path}: empty file, expected a header row")
        for kind, columns in PLOT_SCHEMAS.items():
            if header == columns:
                break
        else:
            raise SchemaError(f"{path}: header {list(header)} matches no "
                              "known plot kind")
        rows = []
        for raw in reader:
            if len(raw) != len(columns):
                raise SchemaError(f"{path}: row {raw!r} has {len(raw)} "
                                  f"fields, expected {len(columns)}")
            row = {}
            for col, cell in zip(columns, raw):
                if col == "series":
                    row[col] = cell
                elif col == "index":
                    row[col] = int(cell)
                else:
                    row[col] = float(cell)
            rows.append(row)
    return kind, rows


def write_record(path: str, command: str, payload: dict) -> None:
    record = {"schema_version": SCHEMA_VERSION, "command": command}
    record.update(payload)
    record["timestamp"] = _timestamp()
    with open(path, "w") as fh:
        json.dump(record, fh, indent=2, allow_nan=False)
        fh.write("\n")


def read_record(path: str, expect_command: str | None = None) -> dict:
    with open(path) as fh:
        record = json.load(fh)
    if not isinstance(record, dict):
        raise SchemaError(f"{path}: expected a JSON object")
    if record.get("schema_version") != SCHEMA_VERSION:
        raise SchemaError(
            f"{path}: schema_version {record.get('schema_version')!r} "
            f"unsupported, expected {SCHEMA_VERSION}")
    if expect_command is not None and record.get("command") != expect_command:
        raise SchemaError(f"{path}: command {record.get('command')!r}, "
                          f"expected {expect_command!r}")
    return record


def write_trials_csv(path: str, rows) -> None:
    """rows: iterable of (n, seed_index, pc or None, status)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRIALS_COLUMNS)
        for n, seed, pc, status in rows:
            writer.writerow([int(n), int(seed),
                             "" if pc is None else int(pc), status])


def read_trials_csv(path: str):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = tuple(next(reader))
        except StopIteration:
            raise SchemaError(f"{path}: empty file, expected a header row")
        if header != TRIALS_COLUMNS:
            raise SchemaError(f"{path}: header {list(header)}, expected "
                              f"{list(TRIALS_COLUMNS)}")
        rows = []
        for raw in reader:
            if len(raw) != 4:
                raise SchemaError(f"{path}: malformed row {raw!r}")
            n, seed, pc, status = raw
            if status not in ("ok", "aborted"):
                raise SchemaError(f"{path}: unknown status {status!r}")
            if (pc == "") != (status == "aborted"):
                raise SchemaError(f"{path}: pc/status mismatch in {raw!r}")
            rows.append((int(n), int(seed),
                         None if pc == "" else int(pc), status))
    return rows


def read_matrix_csv(path: str) -> np.ndarray:
    try:
        return np.loadtxt(path, delimiter=",", ndmin=2, dtype=np.float64)
    except ValueError as exc:
        raise SchemaError(f"{path}: not a numeric CSV grid: {exc}") from exc


def read_vector_csv(path: str) -> np.ndarray:
    return read_matrix_csv(path).reshape(-1)


def write_vector_csv(path: str, x) -> None:
    with open(path, "w", newline="") as fh:
        for v in np.asarray(x, dtype=np.float64).reshape(-1):
            fh.write(_fmt(v) + "\n")


def write_signal_csv(path: str, values) -> None:
    """Single-column signal CSV with header ``x``."""
    with open(path, "w", newline="") as fh:
        fh.write("x\n")
        for v in np.asarray(values, dtype=np.float64).reshape(-1):
            fh.write(_fmt(v) + "\n")


def read_signal_csv(path: str) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["x"]:
            raise SchemaError(f"{path}: expected single column header 'x', "
                              f"got {header}")
        values = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 1:
                raise SchemaError(f"{path}:{lineno}: expected one cell, "
                                  f"got {len(row)}")
            try:
                values.append(float(row[0]))
            except ValueError as exc:
                raise SchemaError(f"{path}:{lineno}: {exc}") from None
    return np.array(values, dtype=np.float64)


# ---------------------------------------------------------------------------
# dispatch

def _forward_errors(f):
    """Module exceptions become clean nonzero exits instead of tracebacks."""

    @wraps(f)
    def wrapper(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except _MODULE_ERRORS as exc:
            raise click.ClickException(str(exc)) from exc

    return wrapper


_THREADS = click.option(
    "--threads", type=int, default=1, envvar="SARCS_THREADS",
    show_envvar=True, show_default=True, help="Worker thread cap.")


@click.group()
def main():
    """Critical compression rate tools for pausing-autoregressive signals."""


@main.command()
@click.option("--case", "cases", multiple=True, required=True,
              metavar="RHO,R", help="One series per flag, e.g. --case 0.5,0")
@click.option("--n", type=int, required=True, help="Signal length.")
@click.option("--seed", type=int, required=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.option("--signal-out", type=click.Path(dir_okay=False), default=None,
              help="Also write the signal as a single-column CSV "
                   "(header x); needs exactly one --case.")
@_forward_errors
def generate(cases, n, seed, out, signal_out):
    """Draw one signal per case and write a signal-trace CSV."""
    if signal_out is not None and len(cases) != 1:
        raise click.UsageError("--signal-out needs exactly one --case, "
                               f"got {len(cases)}")
    parsed = []
    for text in cases:
        parts = text.split(",")
        if len(parts) != 2:
            raise click.UsageError(
                f"--case expects RHO,R, got {text!r}")
        try:
            parsed.append(SarParams(rho=float(parts[0]), r=float(parts[1])))
        except ValueError:
            raise click.UsageError(f"--case expects numbers, got {text!r}")
    rows = []
    for k, params in enumerate(parsed):
        x = generate_signal(params, n, (seed, k))
        label = f"rho={params.rho:g} r={params.r:g}"
        rows.extend({"series": label, "index": i, "value": x[i]}
                    for i in range(n))
        if signal_out is not None:
            write_signal_csv(signal_out, x)
    write_plot_csv(out, rows, "signal-trace")


@main.command()
@click.option("--rho", type=float, required=True)
@click.option("--r", "r_coef", type=float, required=True)
@click.option("--n", type=int, default=2000, show_default=True)
@click.option("--samples", type=int, default=1000, show_default=True)
@click.option("--seed", type=int, required=True)
@click.option("--damping", type=float, default=0.5, show_default=True)
@click.option("--tol", type=float, default=1e-4, show_default=True)
@click.option("--max-iter", type=int, default=500, show_default=True)
@click.option("--avg-window", type=int, default=20, show_default=True)
@click.option("--stability/--no-stability", default=True, show_default=True,
              help="Append the block-count stability metric.")
@_THREADS
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@_forward_errors
def replica(rho, r_coef, n, samples, seed, damping, tol, max_iter, avg_window,
            stability, threads, out):
    """Monte Carlo fixed point for one parameter pair; writes JSON."""
    params = SarParams(rho=rho, r=r_coef)
    config = ReplicaConfig(n=n, samples=samples, damping=damping, tol=tol,
                           max_iter=max_iter, seed=seed,
                           avg_window=avg_window, threads=threads)
    fp = solve_alpha_c(params, config)
    res = fp.residuals()
    payload = {
        "params": {"rho": rho, "r": r_coef},
        "config": {"n": n, "samples": samples, "damping": damping,
                   "tol": tol, "max_iter": max_iter, "seed": seed,
                   "avg_window": avg_window, "threads": threads},
        "alpha_c": fp.alpha,
        "alpha_stderr": fp.alpha_stderr,
        "chi_hat": fp.chi_hat,
        "chi_hat_stderr": fp.chi_hat_stderr,
        "at_metric": None,
        "iterations": fp.iterations,
        "converged": fp.converged,
        "residuals": [res[0], res[1]],
    }
    if stability:
        rep = stability_report(params, fp, config)
        payload["at_metric"] = rep.metric
        payload["stability"] = {"metric": rep.metric, "stderr": rep.stderr,
                                "samples": rep.samples}
    else:
        payload["stability"] = None
    write_record(out, "replica", payload)
    click.echo(f"alpha_c = {fp.alpha:.6f} +- {fp.alpha_stderr:.6f} "
               f"(converged={fp.converged})")


@main.command()
@click.option("--rho", type=float, required=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@_forward_errors
def baseline(rho, out):
    """Closed-form critical rate for memoryless signals; writes JSON."""
    alpha = baseline_alpha_c(rho)
    write_record(out, "baseline", {"rho": rho, "alpha_c": alpha})
    click.echo(f"alpha_c = {alpha:.6f}")


@main.command()
@click.option("--rho", type=float, required=True)
@click.option("--r", "r_coef", type=float, required=True)
@click.option("--n", "sizes", type=int, multiple=True, required=True,
              help="Signal size; repeat for several sizes.")
@click.option("--trials", type=int, default=200, show_default=True)
@click.option("--seed", type=int, required=True)
@click.option("--order", type=click.Choice(["last", "random"]),
              default="last", show_default=True)
@click.option("--opt-tol", type=float, default=1e-8, show_default=True)
@click.option("--feas-tol", type=float, default=1e-9, show_default=True)
@click.option("--solver-max-iter", type=int, default=200_000,
              show_default=True)
@_THREADS
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@_forward_errors
def experiment(rho, r_coef, sizes, trials, seed, order, opt_tol, feas_tol,
               solver_max_iter, threads, out):
    """Row-deletion reconstruction trials; writes a trials CSV.

    Trial t at size n uses the stream key (seed, n, t), so rows are
    independent across sizes and reproducible individually.
    """
    if trials < 2:
        raise click.UsageError("--trials must be >= 2")
    params = SarParams(rho=rho, r=r_coef)
    settings = SolverSettings(opt_tol=opt_tol, feas_tol=feas_tol,
                              max_iter=solver_max_iter)
    jobs = [(n, t) for n in sizes for t in range(trials)]
    results: list = [None] * len(jobs)

    def one(idx: int):
        n, t = jobs[idx]
        try:
            rec = run_trial(n, params, settings, seed=(seed, n, t),
                            order=order)
            results[idx] = (n, t, rec.pc, "ok")
        except TrialAborted:
            results[idx] = (n, t, None, "aborted")

    if threads == 1:
        for idx in range(len(jobs)):
            one(idx)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(one, range(len(jobs))))
    write_trials_csv(out, results)
    aborted = sum(1 for row in results if row[3] == "aborted")
    click.echo(f"{len(jobs)} trials written ({aborted} aborted)")


def _parse_reference(text: str) -> tuple[str, float]:
    label, sep, value = text.rpartition("=")
    if not sep or not label:
        raise click.UsageError(
            f"--reference expects LABEL=VALUE, got {text!r}")
    try:
        return label, float(value)
    except ValueError:
        raise click.UsageError(
            f"--reference value must be numeric, got {text!r}")


@main.command()
@click.option("--in", "in_path", type=click.Path(exists=True, dir_okay=False),
              required=True, help="Trials CSV from the experiment command.")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.option("--plot-out", type=click.Path(dir_okay=False), default=None,
              help="Optional alpha-vs-invN CSV for the plotting tools.")
@click.option("--series-label", default="experiment", show_default=True,
              help="Series name used for the data points in --plot-out.")
@click.option("--reference", "references", multiple=True, metavar="LABEL=VAL",
              help="Horizontal reference value embedded in the outputs.")
@_forward_errors
def extrapolate(in_path, out, plot_out, series_label, references):
    """Fit the per-size estimates against 1/n and report the intercept."""
    refs = dict(_parse_reference(t) for t in references)
    rows = read_trials_csv(in_path)
    by_n: dict[int, list] = {}
    aborts: dict[int, int] = {}
    for n, _seed, pc, status in rows:
        if status == "ok":
            by_n.setdefault(n, []).append(pc)
        else:
            aborts[n] = aborts.get(n, 0) + 1
            by_n.setdefault(n, [])
    levels = [level_from_pcs(n, pcs, aborted=aborts.get(n, 0))
              for n, pcs in sorted(by_n.items())]
    fit = fit_levels(levels)
    payload = {
        "points": [{"n": lv.n, "alpha_c_n": lv.alpha_c_n,
                    "stderr": lv.stderr, "trials": lv.trials,
                    "aborted": lv.aborted} for lv in levels],
        "coefficients": list(fit.coefficients),
        "alpha_c_inf": fit.alpha_c_inf,
        "stderr_a0": fit.stderr_a0,
        "references": refs,
    }
    write_record(out, "extrapolate", payload)
    if plot_out is not None:
        plot_rows = [{"series": series_label, "inv_n": 1.0 / lv.n,
                      "alpha_c": lv.alpha_c_n, "stderr": lv.stderr}
                     for lv in levels]
        plot_rows.extend({"series": label, "inv_n": 0.0, "alpha_c": value,
                          "stderr": 0.0} for label, value in refs.items())
        write_plot_csv(plot_out, plot_rows, "alpha-vs-invN")
    click.echo(f"alpha_c(inf) = {fit.alpha_c_inf:.6f} "
               f"+- {fit.stderr_a0:.6f}")


@main.command()
@click.option("--matrix", type=click.Path(exists=True, dir_okay=False),
              required=True, help="Headerless CSV, one matrix row per line.")
@click.option("--rhs", type=click.Path(exists=True, dir_okay=False),
              required=True, help="Headerless CSV, one entry per line.")
@click.option("--opt-tol", type=float, default=1e-8, show_default=True)
@click.option("--feas-tol", type=float, default=1e-9, show_default=True)
@click.option("--max-iter", type=int, default=200_000, show_default=True)
@click.option("--penalize-first/--no-penalize-first", default=False,
              show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@_forward_errors
def solve(matrix, rhs, opt_tol, feas_tol, max_iter, penalize_first, out):
    """Minimize summed absolute differences subject to the measurements."""
    f = read_matrix_csv(matrix)
    y = read_vector_csv(rhs)
    settings = SolverSettings(opt_tol=opt_tol, feas_tol=feas_tol,
                              max_iter=max_iter,
                              penalize_first=penalize_first)
    result = solve_measurements(f, y, settings)
    write_vector_csv(out, result.x_star)
    click.echo(f"objective = {result.objective:.12g} "
               f"(iterations={result.certificate.iterations})")


@main.command()
@click.option("--vary", type=click.Choice(["rho", "r"]), required=True)
@click.option("--values", required=True, metavar="V1,V2,...",
              help="Grid values for the varied parameter.")
@click.option("--rho", type=float, default=None,
              help="Fixed rho (required with --vary r).")
@click.option("--r", "r_coef", type=float, default=None,
              help="Fixed r (required with --vary rho).")
@click.option("--n", type=int, default=2000, show_default=True)
@click.option("--samples", type=int, default=1000, show_default=True)
@click.option("--seed", type=int, required=True)
@click.option("--max-iter", type=int, default=500, show_default=True)
@click.option("--include-baseline/--no-include-baseline", default=False,
              show_default=True,
              help="Add the memoryless closed-form series (--vary rho only).")
@_THREADS
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@_forward_errors
def sweep(vary, values, rho, r_coef, n, samples, seed, max_iter,
          include_baseline, threads, out):
    """Replica critical rate over a parameter grid; writes a tidy CSV."""
    try:
        grid = [float(v) for v in values.split(",") if v.strip() != ""]
    except ValueError:
        raise click.UsageError(f"--values expects numbers, got {values!r}")
    if not grid:
        raise click.UsageError("--values is empty")
    if vary == "rho":
        if r_coef is None:
            raise click.UsageError("--r is required with --vary rho")
        if rho is not None:
            raise click.UsageError("--rho conflicts with --vary rho")
    else:
        if rho is None:
            raise click.UsageError("--rho is required with --vary r")
        if r_coef is not None:
            raise click.UsageError("--r conflicts with --vary r")
        if include_baseline:
            raise click.UsageError(
                "--include-baseline only applies with --vary rho")
    config = ReplicaConfig(n=n, samples=samples, max_iter=max_iter, seed=seed,
                           threads=threads)
    rows = []
    if vary == "rho":
        label = f"replica r={r_coef:g}"
        for v in grid:
            fp = solve_alpha_c(SarParams(rho=v, r=r_coef), config)
            rows.append({"series": label, "rho": v, "alpha_c": fp.alpha,
                         "stderr": fp.alpha_stderr})
        if include_baseline:
            rows.extend({"series": "baseline", "rho": v,
                         "alpha_c": baseline_alpha_c(v), "stderr": 0.0}
                        for v in grid)
        write_plot_csv(out, rows, "alpha-vs-rho")
    else:
        label = f"replica rho={rho:g}"
        for v in grid:
            fp = solve_alpha_c(SarParams(rho=rho, r=v), config)
            rows.append({"series": label, "r": v, "alpha_c": fp.alpha,
                         "stderr": fp.alpha_stderr})
        write_plot_csv(out, rows, "alpha-vs-r")
    click.echo(f"{len(rows)} rows written")


if __name__ == "__main__":
    main()
