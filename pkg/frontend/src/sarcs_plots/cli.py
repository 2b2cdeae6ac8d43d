"""Command-line figure rendering."""

import click
import matplotlib.pyplot as plt

from .plots import KIND_SCHEMA, PlotSpec, SchemaMismatch, render


@click.command()
@click.option("--kind", type=click.Choice(sorted(KIND_SCHEMA)),
              required=True, help="Figure kind.")
@click.option("--in", "in_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Input CSV in the schema matching --kind.")
@click.option("--out", required=True, type=click.Path(dir_okay=False),
              help="Output image path (any matplotlib-supported format).")
@click.option("--fit", "fits", multiple=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Extrapolation JSON record(s) overlaid on kind 3.")
def main(kind, in_path, out, fits):
    """Render one figure from a sarcs result file."""
    try:
        fig = render(PlotSpec(csv=in_path, kind=kind, out=out,
                              fits=tuple(fits)))
    except SchemaMismatch as exc:
        raise click.ClickException(str(exc))
    plt.close(fig)
    click.echo(f"wrote {out}")


if __name__ == "__main__":
    main()
