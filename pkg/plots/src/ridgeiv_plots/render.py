"""Render the five figure families from ridgeiv summary CSVs.

Input is the CSV schema written by ``ridgeiv simulate``; nothing is
recomputed here beyond arithmetic on columns. Styles are fixed (Monte
Carlo series solid with markers, limit curves dashed, reference levels in
solid grey, 150 dpi PNG, pinned metadata) so re-rendering the same inputs
is byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)

__all__ = ["FigureSpec", "SchemaError", "build_spec", "render", "main", "entry_point"]

SUMMARY_COLUMNS = (
    "figure_tag", "gamma", "sigma_kind", "F", "method", "lambda",
    "mc_mean", "mc_bias", "mc_sd", "mc_se", "mean_var_hat",
    "theory_value", "n_flagged",
)
DENSITY_COLUMNS = ("method", "beta", "density")

FAMILIES = {
    "fig1": "bias", "fig2": "bias",
    "fig3": "signal", "fig3_ar1": "signal",
    "fig4": "variance", "fig4_ar1": "variance",
    "fig5": "density",
}

DPI = 150
PNG_METADATA = {"Software": "ridgeiv-plots"}

METHOD_LABELS = {
    "tsls_ridge": "2SLS-Ridge",
    "ba_tsls_ridge": "adjusted 2SLS-Ridge",
    "ba_tsls_ridge_cv": "adjusted (cv)",
    "ridgeless_tsls": "ridgeless 2SLS",
    "nagar": "adjusted ridgeless",
    "liml": "liml",
    "ols": "ols",
}


class SchemaError(ValueError):
    """Input CSV does not carry the expected columns or rows."""


@dataclass(frozen=True)
class FigureSpec:
    figure_tag: str
    inputs: tuple[Path, ...]
    output: Path
    layout: tuple[int, int]

    def __post_init__(self) -> None:
        missing = [str(p) for p in self.inputs if not p.is_file()]
        if missing:
            raise SchemaError(f"missing input CSVs: {missing}")


def _read_rows(path: Path, columns: tuple[str, ...]) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for column in columns:
            if column not in header:
                raise SchemaError(f"{path.name}: missing column {column!r}")
        rows = list(reader)
    if not rows:
        raise SchemaError(f"{path.name}: no data rows")
    return rows


def _num(value: str) -> float:
    return float(value) if value not in ("", None) else math.nan


def build_spec(figure_tag: str, in_dir: Path, out_dir: Path) -> FigureSpec:
    """Locate the per-gamma inputs of one figure family."""
    in_dir = Path(in_dir)
    if figure_tag.startswith("fig5"):
        pattern = "fig5_F*_density.csv" if figure_tag == "fig5" else f"{figure_tag}_*_density.csv"
        inputs = sorted(in_dir.glob(pattern))
        f_count = len({p.name.split("_")[1] for p in inputs})
        gammas = len({p.name.rsplit("_", 2)[1] for p in inputs})
        layout = (max(f_count, 1), max(gammas, 1))
    else:
        inputs = sorted(
            p for p in in_dir.glob(f"{figure_tag}_*.csv")
            if not p.name.endswith(("_replications.csv", "_density.csv"))
            and p.name.count("_") == figure_tag.count("_") + 1
        )
        n = len(inputs)
        layout = (1, n) if n <= 2 else (2, (n + 1) // 2)
    if not inputs:
        raise SchemaError(f"no input CSVs for {figure_tag!r} in {in_dir}")
    return FigureSpec(
        figure_tag=figure_tag,
        inputs=tuple(inputs),
        output=Path(out_dir) / f"{figure_tag}.png",
        layout=layout,
    )


def _series(rows: list[dict[str, str]], method: str):
    picked = [r for r in rows if r["method"] == method]
    picked.sort(key=lambda r: _num(r["lambda"]))
    lams = [_num(r["lambda"]) for r in picked]
    return picked, lams


def _panel_bias(ax, rows: list[dict[str, str]]) -> None:
    gamma = _num(rows[0]["gamma"])
    for method in ("tsls_ridge", "ba_tsls_ridge"):
        picked, lams = _series(rows, method)
        if not picked:
            continue
        ok = [i for i, r in enumerate(picked) if r["mc_bias"] != ""]
        ax.plot([lams[i] for i in ok], [_num(picked[i]["mc_bias"]) for i in ok],
                marker="o", ms=3.5, lw=1.2, color="#1f6fb4",
                label=METHOD_LABELS[method])
        ax.plot(lams, [_num(r["theory_value"]) for r in picked],
                ls="--", lw=1.4, color="black", label="limit")
    ols_rows = [r for r in rows if r["method"] == "ols"]
    if ols_rows:
        ax.axhline(_num(ols_rows[0]["theory_value"]), color="0.6", lw=1.4,
                   label="ols bias")
    ax.axhline(0.0, color="0.85", lw=0.7)
    ax.set_ylabel("bias")
    ax.set_title(f"gamma = {gamma:g}")


def _panel_signal(ax, rows: list[dict[str, str]]) -> None:
    gamma = _num(rows[0]["gamma"])
    alpha2 = gamma * _num(rows[0]["F"])
    picked, lams = _series(rows, "ba_tsls_ridge")
    ok = [i for i, r in enumerate(picked) if r["mc_mean"] != ""]
    ax.plot([lams[i] for i in ok], [_num(picked[i]["mc_mean"]) for i in ok],
            marker="o", ms=3.5, lw=1.2, color="#1f6fb4", label="x'Sx/n")
    th = [(l, _num(r["theory_value"])) for l, r in zip(lams, picked)
          if r["theory_value"] != ""]
    ax.plot([t[0] for t in th], [t[1] for t in th], ls="--", lw=1.4,
            color="black", label="limit signal")
    ridgeless = alpha2 * (1.0 - gamma) if gamma < 1 else 0.0
    ax.axhline(ridgeless, color="0.6", lw=1.4, label="ridgeless adjustment")
    ax.set_ylabel("signal")
    ax.set_title(f"gamma = {gamma:g}")


def _panel_variance(ax, rows: list[dict[str, str]]) -> None:
    gamma = _num(rows[0]["gamma"])
    picked, lams = _series(rows, "ba_tsls_ridge")
    mc_var = [_num(r["mc_sd"]) ** 2 for r in picked]
    ax.plot(lams, mc_var, marker="o", ms=3.5, lw=1.2, color="#1f6fb4",
            label="observed variation")
    ax.plot(lams, [_num(r["mean_var_hat"]) for r in picked], marker="s",
            ms=3.0, lw=1.0, color="#56a869", label="estimated variance")
    ax.plot(lams, [_num(r["theory_value"]) for r in picked], ls="--", lw=1.4,
            color="black", label="asymptotic")
    ax.set_ylabel("variance")
    ax.set_title(f"gamma = {gamma:g}")


_DENSITY_COLORS = {
    "ridgeless_tsls": "#b04a4a",
    "nagar": "#56a869",
    "liml": "#8a6db1",
    "ba_tsls_ridge_cv": "#1f6fb4",
}


def _panel_density(ax, rows: list[dict[str, str]], title: str) -> None:
    methods = sorted({r["method"] for r in rows})
    for method in methods:
        picked = [r for r in rows if r["method"] == method]
        ax.plot([_num(r["beta"]) for r in picked],
                [_num(r["density"]) for r in picked],
                lw=1.2, color=_DENSITY_COLORS.get(method, "0.4"),
                label=METHOD_LABELS.get(method, method))
    ax.axvline(0.0, color="0.6", lw=1.0)
    ax.set_ylabel("density")
    ax.set_title(title)


def render(spec: FigureSpec) -> Path:
    """Render one figure family to PNG; returns the written path."""
    tag = spec.figure_tag
    family = "density" if tag.startswith("fig5") else FAMILIES.get(tag)
    if family is None:
        raise SchemaError(f"unknown figure tag {tag!r}")
    rows_per_input = [
        _read_rows(p, DENSITY_COLUMNS if family == "density" else SUMMARY_COLUMNS)
        for p in spec.inputs
    ]
    nrows, ncols = spec.layout
    fig, axes = plt.subplots(
        nrows, ncols, figsize=(4.6 * ncols, 3.4 * nrows), squeeze=False
    )
    flat = [ax for row in axes for ax in row]
    for ax in flat[len(spec.inputs):]:
        ax.set_axis_off()
    for ax, path, rows in zip(flat, spec.inputs, rows_per_input):
        if family == "bias":
            _panel_bias(ax, rows)
        elif family == "signal":
            _panel_signal(ax, rows)
        elif family == "variance":
            _panel_variance(ax, rows)
        else:
            stem = path.name.replace("_density.csv", "")
            _, f_part, gamma_part = stem.split("_")
            _panel_density(ax, rows, f"F = {f_part[1:]}, gamma = {gamma_part}")
        if family != "density":
            ax.set_xlabel("lambda")
        else:
            ax.set_xlabel("estimate")
        ax.legend(fontsize=7, frameon=False)
    fig.suptitle(spec.figure_tag)
    fig.tight_layout()
    spec.output.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(spec.output, dpi=DPI, metadata=PNG_METADATA)
    plt.close(fig)
    return spec.output


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="ridgeiv-plots",
        description="Render ridgeiv experiment CSVs as PNG figures",
    )
    parser.add_argument("figure_tag", help="fig1 fig2 fig3 fig3_ar1 fig4 fig4_ar1 fig5")
    parser.add_argument("--in", dest="in_dir", required=True, help="CSV directory")
    parser.add_argument("--out", dest="out_dir", required=True, help="image directory")
    args = parser.parse_args(argv)
    try:
        spec = build_spec(args.figure_tag, Path(args.in_dir), Path(args.out_dir))
        path = render(spec)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(path)
    return 0


def entry_point() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    raise SystemExit(main())
