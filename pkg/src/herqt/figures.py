"""Figure rendering from the simulation CLI's CSV/JSON outputs.

This module never computes physics: its only data sources are the CSV
tables and JSON provenance sidecars written by the ``herqt`` command-line
tools.  Each figure id names one publication-style plot:

- ``fig2a``: phasematching map (JSI orientation angle background with the
  ``delta_k = 0`` contour) from ``phasematch-map`` output.
- ``fig2b``: joint spectral intensity heatmap from ``jsa`` output.
- ``fig3``: heralding-efficiency scan from ``herald-scan`` output.
- ``fig4a``/``fig4b``: average-fidelity heatmaps over the qubit grid from
  ``fidelity-map`` output, with a fixed contour overlay (0.9 for the
  photon-displaced variant, 0.7 for the photon-added variant) and a
  crosshair at the provenance argmax.
- ``fig5``: dual-axis fidelity/purity versus fiber length from
  ``length-sweep`` output, with optional JSI insets from extra inputs.

Output is deterministic: rendering the same inputs twice produces
byte-identical vector files.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd
import yaml
from scipy.constants import c as _SPEED_OF_LIGHT

from .errors import ConfigError, HerqtError

SCHEMA_VERSION = 1

# fixed contour levels for the fidelity maps
PD_CONTOUR_LEVEL = 0.9
PA_CONTOUR_LEVEL = 0.7

# rcParams pinned for byte-identical vector output
_BASE_RC = {
    "svg.hashsalt": "herqt-figures",
    "svg.fonttype": "path",
    "figure.dpi": 100,
    "font.family": "DejaVu Sans",
    "font.size": 9.0,
    "axes.grid": False,
}


class MissingInput(HerqtError):
    """An input file is absent, empty, or lacks the required columns."""


class SchemaMismatch(HerqtError):
    """An input's provenance schema version is unsupported."""


@dataclass(frozen=True)
class FigureRecipe:
    """One figure to render: inputs, figure id, styling, output target."""

    figure: str
    inputs: Tuple[Path, ...]
    out_path: Path
    style: Mapping[str, object] = field(default_factory=dict)
    fmt: Optional[str] = None  # inferred from out_path suffix when None


# ---------------------------------------------------------------------------
# input loading


def _load_table(path: Path, required: Sequence[str]) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise MissingInput(f"input file {path} does not exist")
    try:
        df = pd.read_csv(path, comment="#")
    except (pd.errors.EmptyDataError, pd.errors.ParserError) as exc:
        raise MissingInput(f"cannot parse {path}: {exc}") from exc
    if df.empty:
        raise MissingInput(f"{path} contains no data rows")
    missing = [col for col in required if col not in df.columns]
    if missing:
        raise MissingInput(f"{path} lacks required columns {missing}")
    return df


def _load_sidecar(csv_path: Path) -> dict:
    sidecar = Path(csv_path).with_suffix(".json")
    if not sidecar.exists():
        raise MissingInput(f"provenance sidecar {sidecar} does not exist")
    try:
        meta = json.loads(sidecar.read_text())
    except json.JSONDecodeError as exc:
        raise MissingInput(f"cannot parse {sidecar}: {exc}") from exc
    version = meta.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaMismatch(
            f"{sidecar} has schema_version {version!r}; this renderer "
            f"supports {SCHEMA_VERSION}")
    return meta


def _pivot(df: pd.DataFrame, index: str, columns: str,
           values: str) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Reshape a long-format table to (column axis, index axis, matrix)."""
    table = df.pivot_table(index=index, columns=columns, values=values,
                           dropna=False)
    return (table.columns.to_numpy(dtype=float),
            table.index.to_numpy(dtype=float),
            table.to_numpy(dtype=float))


def _omega_to_um(omega: np.ndarray) -> np.ndarray:
    return 2.0 * np.pi * _SPEED_OF_LIGHT / omega * 1e6


# ---------------------------------------------------------------------------
# renderers (each returns a finished Figure; saving happens in render())


def _render_phasematch(inputs: Sequence[Path], meta: dict) -> plt.Figure:
    df = _load_table(inputs[0], ["pump_wavelength_nm", "detuning_Trad_s",
                                 "delta_k_per_m", "theta_si_deg"])
    lam, det, theta = _pivot(df, "detuning_Trad_s", "pump_wavelength_nm",
                             "theta_si_deg")
    _, _, delta_k = _pivot(df, "detuning_Trad_s", "pump_wavelength_nm",
                           "delta_k_per_m")
    fig, ax = plt.subplots(figsize=(4.8, 3.6), layout="constrained")
    mesh = ax.pcolormesh(lam, det, theta, shading="nearest", cmap="viridis")
    fig.colorbar(mesh, ax=ax, label="JSI orientation angle (deg)")
    contour = ax.contour(lam, det, delta_k, levels=[0.0], colors="k",
                         linewidths=1.2)
    contour.set_gid("contour-phasematched")
    ax.set_xlabel("pump wavelength (nm)")
    ax.set_ylabel("detuning (Trad/s)")
    ax.set_title("phasematching map")
    return fig


def _render_jsi(inputs: Sequence[Path], meta: dict) -> plt.Figure:
    fig, ax = plt.subplots(figsize=(4.2, 3.6), layout="constrained")
    _draw_jsi_axes(ax, inputs[0], colorbar_fig=fig)
    return fig


def _draw_jsi_axes(ax, path: Path, colorbar_fig=None) -> None:
    df = _load_table(path, ["omega_retained_rad_s", "omega_herald_rad_s",
                            "jsi"])
    w_ret, w_her, jsi = _pivot(df, "omega_herald_rad_s",
                               "omega_retained_rad_s", "jsi")
    mesh = ax.pcolormesh(_omega_to_um(w_ret), _omega_to_um(w_her), jsi,
                         shading="nearest", cmap="inferno")
    if colorbar_fig is not None:
        colorbar_fig.colorbar(mesh, ax=ax, label="JSI (arb. units)")
        ax.set_xlabel("retained-arm wavelength (µm)")
        ax.set_ylabel("herald-arm wavelength (µm)")
        ax.set_title("joint spectral intensity")


def _render_herald_scan(inputs: Sequence[Path], meta: dict) -> plt.Figure:
    df = _load_table(inputs[0], ["alpha0", "p_h_over_eta"])
    fig, ax = plt.subplots(figsize=(4.8, 3.2), layout="constrained")
    ax.plot(df["alpha0"], df["p_h_over_eta"], marker="o", markersize=3,
            color="tab:blue")
    ax.set_xlabel(r"seed amplitude $\alpha_0$")
    ax.set_ylabel(r"$P_H/\eta$")
    ax.set_ylim(0.0, 1.05)
    ax.set_title("heralding efficiency")
    return fig


def _render_fidelity_map(inputs: Sequence[Path], meta: dict,
                         level: float) -> plt.Figure:
    df = _load_table(inputs[0], ["lambda_beta_m", "sigma_beta_rad_s",
                                 "avg_fidelity"])
    lam, sig, fid = _pivot(df, "sigma_beta_rad_s", "lambda_beta_m",
                           "avg_fidelity")
    if not np.any(np.isfinite(fid)):
        raise MissingInput(f"{inputs[0]} carries no finite fidelity values")
    fig, ax = plt.subplots(figsize=(4.8, 3.6), layout="constrained")
    mesh = ax.pcolormesh(lam * 1e9, sig / 1e12, fid, shading="nearest",
                         cmap="viridis", vmin=0.0, vmax=1.0)
    fig.colorbar(mesh, ax=ax, label="average fidelity")
    contour = ax.contour(lam * 1e9, sig / 1e12, fid, levels=[level],
                         colors="yellow", linestyles="dotted",
                         linewidths=1.6)
    contour.set_gid(f"contour-{level:.2f}")
    argmax = meta.get("argmax")
    if argmax:
        vline = ax.axvline(argmax["lambda_beta"] * 1e9, color="w",
                           linestyle=":", linewidth=0.9)
        hline = ax.axhline(argmax["sigma_beta"] / 1e12, color="w",
                           linestyle=":", linewidth=0.9)
        vline.set_gid("argmax-crosshair-v")
        hline.set_gid("argmax-crosshair-h")
    variant = meta.get("variant", "")
    ax.set_xlabel(r"qubit center wavelength $\lambda_\beta$ (nm)")
    ax.set_ylabel(r"qubit bandwidth $\sigma_\beta$ (Trad/s)")
    title = "average teleportation fidelity"
    if variant:
        title += f" ({variant})"
    ax.set_title(title)
    return fig


def _render_length_sweep(inputs: Sequence[Path], meta: dict) -> plt.Figure:
    df = _load_table(inputs[0], ["length_m", "avg_fidelity", "purity"])
    fig, ax_f = plt.subplots(figsize=(5.4, 3.8), layout="constrained")
    ax_p = ax_f.twinx()
    ax_f.plot(df["length_m"] * 1e2, df["avg_fidelity"], color="tab:blue",
              label="average fidelity")
    ax_p.plot(df["length_m"] * 1e2, df["purity"], color="tab:red",
              linestyle="--", label="heralded purity")
    ax_f.set_xscale("log")
    ax_f.set_xlabel("fiber length (cm)")
    ax_f.set_ylabel("average fidelity", color="tab:blue")
    ax_p.set_ylabel(r"heralded purity $K^{-1}$", color="tab:red")
    ax_f.set_ylim(0.0, 1.05)
    ax_p.set_ylim(0.0, 1.05)
    for i, inset_path in enumerate(inputs[1:]):
        inset_meta = _load_sidecar(inset_path)
        ax_in = fig.add_axes([0.18 + 0.24 * i, 0.2, 0.16, 0.24])
        _draw_jsi_axes(ax_in, inset_path)
        ax_in.set_xticks([])
        ax_in.set_yticks([])
        ax_in.set_gid(f"jsi-inset-{i}")
        length = inset_meta.get("length_m")
        if length is not None:
            ax_in.set_title(f"L = {length * 1e2:.3g} cm", fontsize=7)
    return fig


_RENDERERS: Dict[str, Callable[[Sequence[Path], dict], plt.Figure]] = {
    "fig2a": _render_phasematch,
    "fig2b": _render_jsi,
    "fig3": _render_herald_scan,
    "fig4a": lambda inputs, meta: _render_fidelity_map(
        inputs, meta, PD_CONTOUR_LEVEL),
    "fig4b": lambda inputs, meta: _render_fidelity_map(
        inputs, meta, PA_CONTOUR_LEVEL),
    "fig5": _render_length_sweep,
}

FIGURE_IDS = tuple(sorted(_RENDERERS))


def render(recipe: FigureRecipe) -> Path:
    """Render one figure; returns the output path.

    No output file is written when validation or rendering fails.
    """
    if recipe.figure not in _RENDERERS:
        raise ConfigError(f"unknown figure id {recipe.figure!r}; "
                          f"expected one of {', '.join(FIGURE_IDS)}")
    if not recipe.inputs:
        raise MissingInput("the recipe names no input files")
    out_path = Path(recipe.out_path)
    fmt = recipe.fmt or out_path.suffix.lstrip(".").lower() or "svg"
    rc = dict(_BASE_RC)
    for key, value in recipe.style.items():
        if key not in plt.rcParams:
            raise ConfigError(f"unknown style parameter {key!r}")
        rc[key] = value
    with plt.rc_context(rc):
        meta = _load_sidecar(recipe.inputs[0])
        fig = _RENDERERS[recipe.figure](recipe.inputs, meta)
        try:
            out_path.parent.mkdir(parents=True, exist_ok=True)
            metadata = {"Date": None} if fmt == "svg" else None
            fig.savefig(out_path, format=fmt, metadata=metadata)
        finally:
            plt.close(fig)
    return out_path


# ---------------------------------------------------------------------------
# command-line entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="herqt-render",
        description="Render figures from herqt CSV/JSON outputs.")
    parser.add_argument("--figure", required=True, choices=FIGURE_IDS,
                        help="figure id to render")
    parser.add_argument("--input", action="append", required=True,
                        metavar="CSV",
                        help="input CSV (repeat for figures with insets); "
                             "the JSON provenance sidecar must sit next to "
                             "each input")
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--format", dest="fmt",
                        help="output format (default: from --out suffix)")
    parser.add_argument("--style", action="append", metavar="KEY=VALUE",
                        help="matplotlib rcParams override")
    return parser


def _parse_style(items: Optional[List[str]]) -> Dict[str, object]:
    style: Dict[str, object] = {}
    for item in items or []:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"--style expects key=value, got {item!r}")
        try:
            style[key] = yaml.safe_load(raw)
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse style value {raw!r}: "
                              f"{exc}") from exc
    return style


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        recipe = FigureRecipe(figure=args.figure,
                              inputs=tuple(Path(p) for p in args.input),
                              out_path=Path(args.out),
                              style=_parse_style(args.style),
                              fmt=args.fmt)
        out = render(recipe)
    except (ConfigError, MissingInput, SchemaMismatch) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    except HerqtError as exc:
        print(f"rendering failure: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return 3
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
