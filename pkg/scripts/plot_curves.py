"""Plot trajectories exported with `dkt export-curves`.

    python scripts/plot_curves.py curves.csv curves.png

One panel per disease and layer: dysfunction trajectories of the units on top,
biomarker trajectories below, both against disease stage in years.
"""

import argparse

import colorcet as cc
import matplotlib
import pandas as pd
import seaborn as sns

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def plot_curves(curves: pd.DataFrame, units: list[str]) -> sns.FacetGrid:
    curves = curves.assign(layer=["dysfunction" if c in units else "biomarker" for c in curves["curve"]])
    palette = sns.color_palette(cc.glasbey_category10, n_colors=curves["curve"].nunique())
    grid = sns.relplot(
        data=curves,
        x="stage",
        y="value",
        hue="curve",
        row="layer",
        col="disease",
        kind="line",
        palette=palette,
        height=3.5,
        aspect=1.3,
        facet_kws={"sharey": False},
    )
    grid.set_axis_labels("disease stage (years)", "value")
    grid.set_titles("{col_name}: {row_name}")
    return grid


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("curves", help="CSV written by dkt export-curves.")
    parser.add_argument("out", help="Image file to write.")
    parser.add_argument(
        "--units",
        nargs="+",
        help="Curve names that are units; names starting with 'l' by default.",
    )
    args = parser.parse_args()

    curves = pd.read_csv(args.curves)
    units = args.units or sorted({c for c in curves["curve"] if c.startswith("l")})
    grid = plot_curves(curves, units)
    grid.savefig(args.out, dpi=150)
    plt.close(grid.figure)
    print(f"Wrote {args.out}")


if __name__ == "__main__":
    main()
