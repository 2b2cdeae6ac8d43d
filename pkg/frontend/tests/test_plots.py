"""Render every figure kind from the committed golden files."""

import json
import pathlib

import pytest
from click.testing import CliRunner

from sarcs_plots import PlotSpec, SchemaMismatch, read_fit_record, render
from sarcs_plots.cli import main

GOLDEN = pathlib.Path(__file__).parent / "golden"


def labels_of(fig):
    return fig.axes[0].get_legend_handles_labels()[1]


def test_traces_golden(tmp_path):
    out = tmp_path / "fig1.png"
    fig = render(PlotSpec(csv=str(GOLDEN / "traces.csv"), kind="1",
                          out=str(out)))
    assert out.stat().st_size > 0
    assert labels_of(fig) == ["rho=0.5 r=0", "rho=0.5 r=0.5", "rho=1 r=0"]
    lines = fig.axes[0].get_lines()
    assert len(lines) == 3
    assert all(len(ln.get_xdata()) == 300 for ln in lines)


def test_sweep_rho_golden(tmp_path):
    out = tmp_path / "fig2a.png"
    fig = render(PlotSpec(csv=str(GOLDEN / "alpha_vs_rho.csv"), kind="2a",
                          out=str(out)))
    assert out.stat().st_size > 0
    assert labels_of(fig) == ["replica r=0", "baseline"]


def test_sweep_r_golden(tmp_path):
    out = tmp_path / "fig2b.png"
    fig = render(PlotSpec(csv=str(GOLDEN / "alpha_vs_r.csv"), kind="2b",
                          out=str(out)))
    assert out.stat().st_size > 0
    assert labels_of(fig) == ["replica rho=0.5"]


def test_extrapolation_golden_has_fits_and_references(tmp_path):
    out = tmp_path / "fig3.png"
    fig = render(PlotSpec(
        csv=str(GOLDEN / "alpha_vs_invn.csv"), kind="3", out=str(out),
        fits=(str(GOLDEN / "fit_r0.json"), str(GOLDEN / "fit_r05.json"))))
    assert out.stat().st_size > 0
    labels = labels_of(fig)
    assert set(labels) == {"experiment r=0", "experiment r=0.5",
                           "replica r=0", "replica r=0.5",
                           "fit fit_r0", "fit fit_r05"}
    ax = fig.axes[0]
    refs = {ln.get_label(): ln for ln in ax.get_lines()
            if ln.get_label().startswith("replica")}
    assert set(refs) == {"replica r=0", "replica r=0.5"}
    assert refs["replica r=0"].get_ydata()[0] == pytest.approx(0.8491)
    assert refs["replica r=0.5"].get_ydata()[0] == pytest.approx(0.8412)
    curves = [ln for ln in ax.get_lines()
              if ln.get_label().startswith("fit ")]
    assert len(curves) == 2
    for curve, path in zip(sorted(curves, key=lambda ln: ln.get_label()),
                           ("fit_r0.json", "fit_r05.json")):
        a0 = read_fit_record(GOLDEN / path)["coefficients"][0]
        assert curve.get_ydata()[0] == pytest.approx(a0)


def test_schema_mismatch_names_columns(tmp_path):
    with pytest.raises(SchemaMismatch) as err:
        render(PlotSpec(csv=str(GOLDEN / "traces.csv"), kind="3",
                        out=str(tmp_path / "x.png")))
    msg = str(err.value)
    assert "inv_n" in msg and "index" in msg


def test_non_numeric_cell_names_column(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("series,rho,alpha_c,stderr\na,0.5,oops,0.1\n")
    with pytest.raises(SchemaMismatch, match="column alpha_c"):
        render(PlotSpec(csv=str(bad), kind="2a", out=str(tmp_path / "x.png")))


def test_short_row_reports_line(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("series,rho,alpha_c,stderr\na,0.5,0.8\n")
    with pytest.raises(SchemaMismatch, match="bad.csv:2"):
        render(PlotSpec(csv=str(bad), kind="2a", out=str(tmp_path / "x.png")))


def test_empty_csv_blank_axes_with_warning(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("series,inv_n,alpha_c,stderr\n")
    out = tmp_path / "blank.png"
    with pytest.warns(UserWarning, match="no data rows"):
        fig = render(PlotSpec(csv=str(empty), kind="3", out=str(out)))
    assert out.stat().st_size > 0
    assert fig.axes[0].get_lines() == []


def test_spec_validation():
    with pytest.raises(SchemaMismatch, match="kind"):
        PlotSpec(csv="x.csv", kind="4", out="x.png")
    with pytest.raises(SchemaMismatch, match="kind 1"):
        PlotSpec(csv="x.csv", kind="1", out="x.png", fits=("f.json",))


def test_fit_record_validation(tmp_path):
    good = json.loads((GOLDEN / "fit_r0.json").read_text())

    def write(mutate):
        record = dict(good)
        mutate(record)
        path = tmp_path / "fit.json"
        path.write_text(json.dumps(record))
        return path

    with pytest.raises(SchemaMismatch, match="coefficients"):
        read_fit_record(write(lambda r: r.pop("coefficients")))
    with pytest.raises(SchemaMismatch, match="schema_version"):
        read_fit_record(write(lambda r: r.update(schema_version=2)))
    with pytest.raises(SchemaMismatch, match="command"):
        read_fit_record(write(lambda r: r.update(command="solve")))
    with pytest.raises(SchemaMismatch, match="3 entries"):
        read_fit_record(write(lambda r: r.update(coefficients=[1.0, 2.0])))


def test_cli_round_trip(tmp_path):
    runner = CliRunner()
    out = tmp_path / "fig3.png"
    res = runner.invoke(main, [
        "--kind", "3", "--in", str(GOLDEN / "alpha_vs_invn.csv"),
        "--out", str(out), "--fit", str(GOLDEN / "fit_r0.json"),
        "--fit", str(GOLDEN / "fit_r05.json")])
    assert res.exit_code == 0, res.output
    assert f"wrote {out}" in res.output
    assert out.stat().st_size > 0


def test_cli_schema_error_is_usage_failure(tmp_path):
    runner = CliRunner()
    res = runner.invoke(main, ["--kind", "2a", "--in",
                               str(GOLDEN / "traces.csv"), "--out",
                               str(tmp_path / "x.png")])
    assert res.exit_code != 0
    assert "rho" in res.output


def test_cli_empty_csv_exits_zero(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("series,index,value\n")
    out = tmp_path / "blank.png"
    runner = CliRunner()
    with pytest.warns(UserWarning):
        res = runner.invoke(main, ["--kind", "1", "--in", str(empty),
                                   "--out", str(out)])
    assert res.exit_code == 0, res.output
    assert out.stat().st_size > 0
