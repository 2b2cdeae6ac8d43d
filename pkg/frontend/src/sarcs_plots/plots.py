"""Figure regeneration from sarcs result files.

This package talks to the solver package only through its documented file
formats. Tidy CSVs have one header row:

=============  ====================================
kind           columns
=============  ====================================
signal-trace   series,index,value
alpha-vs-rho   series,rho,alpha_c,stderr
alpha-vs-r     series,r,alpha_c,stderr
alpha-vs-invN  series,inv_n,alpha_c,stderr
=============  ====================================

and extrapolation records are JSON objects carrying ``schema_version`` 1,
``command`` "extrapolate", quadratic ``coefficients`` (a0, a1, a2) in
1/n, and a ``references`` map of horizontal guide values. Nothing is
recomputed here; the figures show the files as they are.

Figure kinds: "1" draws signal traces, "2a" and "2b" draw threshold
sweeps against rho and r, "3" draws finite-size points against 1/n with
reference lines from the CSV and fitted curves from the JSON records.
"""

import csv
import json
import pathlib
import warnings
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

SCHEMAS = {
    "signal-trace": ("series", "index", "value"),
    "alpha-vs-rho": ("series", "rho", "alpha_c", "stderr"),
    "alpha-vs-r": ("series", "r", "alpha_c", "stderr"),
    "alpha-vs-invN": ("series", "inv_n", "alpha_c", "stderr"),
}

KIND_SCHEMA = {
    "1": "signal-trace",
    "2a": "alpha-vs-rho",
    "2b": "alpha-vs-r",
    "3": "alpha-vs-invN",
}

AXIS_LABELS = {
    "1": ("i", "x_i"),
    "2a": (r"$\rho$", r"$\alpha_c$"),
    "2b": ("r", r"$\alpha_c$"),
    "3": ("1/n", r"$\alpha_c$"),
}


class SchemaMismatch(ValueError):
    """A file does not match the documented schema; names the columns."""


@dataclass(frozen=True)
class PlotSpec:
    """One figure: an input CSV, a figure kind, and an output image path.

    ``fits`` lists extrapolation JSON records whose fitted curves are
    overlaid on kind "3"; the other kinds take no fits.
    """

    csv: str
    kind: str
    out: str
    fits: tuple = field(default=())

    def __post_init__(self):
        if self.kind not in KIND_SCHEMA:
            raise SchemaMismatch(
                f"kind must be one of {sorted(KIND_SCHEMA)}, got {self.kind!r}")
        object.__setattr__(self, "fits", tuple(self.fits))
        if self.fits and self.kind != "3":
            raise SchemaMismatch(
                f"fit records only apply to kind 3, got kind {self.kind}")


def read_table(path, kind: str) -> dict:
    """Load a tidy CSV into columns, enforcing the schema for ``kind``."""
    expected = SCHEMAS[KIND_SCHEMA[kind]]
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise SchemaMismatch(
                f"{path}: no header row, expected columns "
                f"{','.join(expected)}")
        if tuple(header) != expected:
            missing = [c for c in expected if c not in header]
            extra = [c for c in header if c not in expected]
            raise SchemaMismatch(
                f"{path}: expected columns {','.join(expected)}, got "
                f"{','.join(header)} (missing: {missing or 'none'}, "
                f"unexpected: {extra or 'none'})")
        raw = list(reader)
    cols: dict = {name: [] for name in expected}
    for lineno, row in enumerate(raw, start=2):
        if len(row) != len(expected):
            raise SchemaMismatch(
                f"{path}:{lineno}: expected {len(expected)} cells, "
                f"got {len(row)}")
        for name, cell in zip(expected, row):
            cols[name].append(cell)
    for name in expected[1:]:
        try:
            cast = int if name == "index" else float
            cols[name] = np.array([cast(c) for c in cols[name]])
        except ValueError as exc:
            raise SchemaMismatch(
                f"{path}: column {name} is not numeric: {exc}") from None
    return cols


def read_fit_record(path) -> dict:
    """Load an extrapolation JSON record, checking the declared fields."""
    with open(path) as fh:
        record = json.load(fh)
    for key in ("schema_version", "command", "coefficients"):
        if key not in record:
            raise SchemaMismatch(f"{path}: fit record missing field {key!r}")
    if record["schema_version"] != 1:
        raise SchemaMismatch(
            f"{path}: schema_version must be 1, got "
            f"{record['schema_version']!r}")
    if record["command"] != "extrapolate":
        raise SchemaMismatch(
            f"{path}: command must be 'extrapolate', got "
            f"{record['command']!r}")
    coeffs = record["coefficients"]
    if len(coeffs) != 3:
        raise SchemaMismatch(
            f"{path}: coefficients must have 3 entries, got {len(coeffs)}")
    return record


def _series_order(names) -> list:
    return list(dict.fromkeys(names))


def _draw_traces(ax, cols):
    series = np.array(cols["series"])
    for name in _series_order(cols["series"]):
        pick = series == name
        ax.plot(cols["index"][pick], cols["value"][pick], lw=1.0, label=name)


def _draw_sweep(ax, cols, x_col):
    series = np.array(cols["series"])
    for name in _series_order(cols["series"]):
        pick = series == name
        ax.errorbar(cols[x_col][pick], cols["alpha_c"][pick],
                    yerr=cols["stderr"][pick], fmt="o-", ms=4, capsize=3,
                    label=name)


def _draw_extrapolation(ax, cols, fits):
    series = np.array(cols["series"])
    x_max = 0.0
    for name in _series_order(cols["series"]):
        pick = series == name
        x = cols["inv_n"][pick]
        if x.size == 1 and x[0] == 0.0:
            # a single entry pinned at 1/n = 0 is a horizontal reference
            ax.axhline(cols["alpha_c"][pick][0], ls="--", lw=1.0,
                       label=name)
            continue
        x_max = max(x_max, float(np.max(x)))
        ax.errorbar(x, cols["alpha_c"][pick], yerr=cols["stderr"][pick],
                    fmt="o", ms=5, capsize=3, label=name)
    grid = np.linspace(0.0, x_max * 1.05 if x_max else 0.05, 200)
    for path in fits:
        record = read_fit_record(path)
        a0, a1, a2 = record["coefficients"]
        ax.plot(grid, a0 + a1 * grid + a2 * grid ** 2, lw=1.2,
                label=f"fit {pathlib.Path(path).stem}")


def render(spec: PlotSpec):
    """Draw the figure described by ``spec``, save it, return the Figure."""
    cols = read_table(spec.csv, spec.kind)
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    if not cols["series"]:
        warnings.warn(f"{spec.csv} has no data rows; writing blank axes",
                      stacklevel=2)
    elif spec.kind == "1":
        _draw_traces(ax, cols)
    elif spec.kind in ("2a", "2b"):
        _draw_sweep(ax, cols, "rho" if spec.kind == "2a" else "r")
    else:
        _draw_extrapolation(ax, cols, spec.fits)
    x_label, y_label = AXIS_LABELS[spec.kind]
    ax.set_xlabel(x_label)
    ax.set_ylabel(y_label)
    if ax.get_legend_handles_labels()[1]:
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(spec.out, dpi=150)
    return fig
