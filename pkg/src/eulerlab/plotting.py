"""SVG views of experiment CSV outputs.

Every function here renders files the experiment pipelines already wrote;
plots read CSVs only, so re-rendering can never change a result.  The
experiment kind is dispatched from the directory's manifest.
"""

import csv
import json
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


def _read_columns(path):
    """CSV as {header: list}, numeric columns converted to float."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        cols = {name: [] for name in header}
        for row in reader:
            for name, cell in zip(header, row):
                try:
                    cols[name].append(float(cell))
                except ValueError:
                    cols[name].append(cell)
    return cols


def plot_entropy_curves(curve_specs, out_svg, title):
    """Overlay of entropy-curve CSVs: ln packing against ln(1/eps), fitted
    points marked.  curve_specs is a list of (csv_path, label)."""
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    for path, label in curve_specs:
        cols = _read_columns(path)
        x = cols["ln_inv_eps"]
        y = cols["ln_packing"]
        fit = [bool(int(m)) for m in cols["in_fit"]]
        line, = ax.plot(x, y, marker="o", markersize=3, linewidth=1.0,
                        label=label)
        xf = [v for v, m in zip(x, fit) if m]
        yf = [v for v, m in zip(y, fit) if m]
        ax.plot(xf, yf, marker="o", markersize=6, linestyle="none",
                markerfacecolor="none", color=line.get_color())
    ax.set_xlabel("ln(1/eps)")
    ax.set_ylabel("ln packing count")
    ax.set_title(title)
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_svg)
    plt.close(fig)
    return out_svg


def plot_stability(pairs_csv, scales_csv, out_svg):
    """Perturbation-ratio scatter over scale with the per-scale maximum."""
    pairs = _read_columns(pairs_csv)
    scales = _read_columns(scales_csv)
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    ax.scatter(pairs["scale"], pairs["ratio"], s=8, alpha=0.35,
               label="pair ratio")
    ax.plot(scales["scale"], scales["max_ratio"], marker="s", color="C3",
            label="max per scale")
    ax.set_xscale("log")
    ax.set_xlabel("perturbation scale")
    ax.set_ylabel("endpoint drift / perturbation size")
    ax.set_title("stability scan")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_svg)
    plt.close(fig)
    return out_svg


def plot_cardinality(card_csv, out_svg):
    """Net cardinality ratio against eps."""
    cols = _read_columns(card_csv)
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    ax.plot(cols["eps"], cols["ratio"], marker="o", markersize=4)
    ax.set_xscale("log")
    ax.set_xlabel("eps")
    ax.set_ylabel("ln(net size) / ((1/eps) ln(1/eps))")
    ax.set_title("quantizer net growth")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_svg)
    plt.close(fig)
    return out_svg


def plot_experiment(out_dir):
    """Render the standard SVGs for one experiment directory; returns the
    list of files written.  Dispatches on manifest.json."""
    with open(os.path.join(out_dir, "manifest.json")) as fh:
        manifest = json.load(fh)
    kind = manifest["experiment"]
    written = []
    if kind == "stability":
        written.append(plot_stability(
            os.path.join(out_dir, "stability_pairs.csv"),
            os.path.join(out_dir, "stability_scales.csv"),
            os.path.join(out_dir, "stability.svg"),
        ))
    elif kind == "entropy-gap":
        written.append(plot_entropy_curves(
            [
                (os.path.join(out_dir, "curve_attainable.csv"), "attainable cloud"),
                (os.path.join(out_dir, "curve_holder.csv"), "Holder-ball cloud"),
            ],
            os.path.join(out_dir, "entropy_gap.svg"),
            "entropy gap at matched scales",
        ))
    elif kind == "quantizer":
        written.append(plot_cardinality(
            os.path.join(out_dir, "cardinality.csv"),
            os.path.join(out_dir, "cardinality.svg"),
        ))
    elif kind == "validation":
        written.append(plot_entropy_curves(
            [
                (os.path.join(out_dir, "grid1d.csv"), "1-d grid"),
                (os.path.join(out_dir, "grid2d.csv"), "2-d grid"),
                (os.path.join(out_dir, "cloud.csv"), "Holder-ball cloud"),
            ],
            os.path.join(out_dir, "slopes.svg"),
            "slope recovery",
        ))
    else:
        raise ValueError(f"unknown experiment kind: {kind}")
    return written
