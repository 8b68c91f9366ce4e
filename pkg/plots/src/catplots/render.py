"""Deterministic figure rendering from catsim CSV artifacts.

Rendering is read-only over the inputs; byte-identical CSVs produce
pixel-identical PNGs at a fixed matplotlib version (Agg backend, fixed
geometry, no timestamps embedded).
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .recipes import WIGNER_PEAK, recipe

DPI = 110


def _grid_from_rows(table):
    x = np.unique(table["beta_re"]) if "beta_re" in table else np.unique(table["x"])
    key_x = "beta_re" if "beta_re" in table else "x"
    key_y = "beta_im" if "beta_im" in table else "p"
    y = np.unique(table[key_y])
    shape = (len(x), len(y))
    return x, y, shape


def _panel_heatmap(ax, table, value_key, title, vmin, vmax, cmap):
    x, y, shape = _grid_from_rows(table)
    values = table[value_key].reshape(shape)
    im = ax.imshow(
        values.T, origin="lower", extent=(x[0], x[-1], y[0], y[-1]),
        vmin=vmin, vmax=vmax, cmap=cmap, aspect="equal",
    )
    ax.set_title(title, fontsize=9)
    return im


def _render_fig2(tables, rec):
    fig, axes = plt.subplots(2, 4, figsize=(13, 6.2), dpi=DPI)
    for col, key in enumerate(("nbar2", "nbar4", "nbar9", "nbar25")):
        t = tables[key]
        imx = _panel_heatmap(axes[0, col], t, "x_coord",
                             f"X, n = {key[4:]}", -1.0, 1.0, "RdBu_r")
        imp = _panel_heatmap(axes[1, col], t, "purity",
                             f"purity, n = {key[4:]}", 0.5, 1.0, "viridis")
        for row in (0, 1):
            axes[row, col].set_xlabel("Re b")
            axes[row, col].set_ylabel("Im b")
    fig.colorbar(imx, ax=axes[0, :].tolist(), shrink=0.85)
    fig.colorbar(imp, ax=axes[1, :].tolist(), shrink=0.85)
    return fig


def _render_rabi(tables, rec):
    t = tables["rabi"]
    fig, axes = plt.subplots(1, 2, figsize=(10, 3.6), dpi=DPI)
    axes[0].plot(t["t"], t["pop_zero"], label="pop |0_L>")
    axes[0].plot(t["t"], t["pop_one"], label="pop |1_L>")
    axes[0].set_xlabel("t (1/kappa)")
    axes[0].set_ylabel("population")
    axes[0].set_ylim(-0.02, 1.02)
    axes[0].legend(loc="center right", fontsize=8)
    axes[1].plot(t["t"], t["bloch_y"], label="Y")
    axes[1].plot(t["t"], t["bloch_z"], label="Z")
    axes[1].set_xlabel("t (1/kappa)")
    axes[1].set_ylabel("Bloch component")
    axes[1].legend(loc="center right", fontsize=8)
    fig.suptitle(rec.title, fontsize=10)
    return fig


def _render_fig5(tables, rec):
    t = tables["bell"]
    fig, ax = plt.subplots(figsize=(6, 3.6), dpi=DPI)
    ax.plot(t["t"], t["fid_bell_minus"], label="|B->")
    ax.plot(t["t"], t["fid_bell_plus"], label="|B+>")
    ax.set_xlabel("t (1/kappa)")
    ax.set_ylabel("Bell-state fidelity")
    ax.set_ylim(-0.02, 1.02)
    ax.legend(fontsize=8)
    ax.set_title(rec.title, fontsize=10)
    return fig


def _render_fig6(tables, rec):
    fig, axes = plt.subplots(1, 2, figsize=(10, 3.6), dpi=DPI, sharey=True)
    for ax, key, label in ((axes[0], "idle", "no drive"),
                           (axes[1], "driven", "X-rotation drive on")):
        t = tables[key]
        stack = [t[f"pop_sector_{k}"] for k in range(4)]
        ax.stackplot(t["t"], *stack,
                     labels=[f"a^{k} sector" for k in range(4)])
        ax.set_xlabel("t (1/kappa_4ph)")
        ax.set_title(label, fontsize=9)
    axes[0].set_ylabel("population")
    axes[0].legend(fontsize=7, loc="lower left")
    fig.suptitle(rec.title, fontsize=10)
    return fig


def _render_fig7(tables, rec):
    t = tables["compare"]
    fig, ax = plt.subplots(figsize=(6, 3.6), dpi=DPI)
    ax.plot(t["t"], t["fid_full"], label="full two-mode model")
    ax.plot(t["t"], t["fid_reduced"], "--", label="reduced model")
    ax.set_xlabel("t (1/kappa_b)")
    ax.set_ylabel("fidelity to target cat")
    ax.set_ylim(-0.02, 1.02)
    ax.legend(fontsize=8, loc="lower right")
    ax.set_title(rec.title, fontsize=10)
    return fig


def _render_fig8(tables, rec):
    key = "two_cat" if "two_cat" in tables else "four_cat"
    t = tables[key]
    fig, ax = plt.subplots(figsize=(6, 3.6), dpi=DPI)
    if key == "two_cat":
        ax.semilogy(t["alpha"], t["rate_fitted"], "o-", label="fitted")
        ax.semilogy(t["alpha"], t["rate_analytic"], "s--", label="analytic")
        ax.set_ylabel("phase-flip rate (kappa_2ph units)")
    else:
        ax.semilogy(t["alpha"], t["rate_scaled"], "o-", label="fitted / 2 kappa_phi")
        ax.set_ylabel("scaled coherence-decay rate")
    ax.set_xlabel("alpha")
    ax.legend(fontsize=8)
    ax.set_title(rec.title, fontsize=10)
    return fig


def _render_wigner(tables, rec):
    t = tables["grid"]
    x, y, shape = _grid_from_rows(t)
    values = t["w"].reshape(shape)
    fig, ax = plt.subplots(figsize=(5.4, 4.6), dpi=DPI)
    im = ax.imshow(
        values.T, origin="lower", extent=(x[0], x[-1], y[0], y[-1]),
        vmin=-WIGNER_PEAK, vmax=WIGNER_PEAK, cmap=rec.wigner_colormap,
        aspect="equal",
    )
    ax.set_xlabel("x")
    ax.set_ylabel("p")
    ax.set_title(rec.title, fontsize=10)
    fig.colorbar(im, ax=ax, label="W(x, p)")
    return fig


_DRAWERS = {
    "fig2": _render_fig2,
    "fig3": _render_rabi,
    "fig4": _render_rabi,
    "fig5": _render_fig5,
    "fig6": _render_fig6,
    "fig7": _render_fig7,
    "fig8": _render_fig8,
    "fig8b": _render_fig8,
    "wigner": _render_wigner,
}


def render(figure_id: str, in_dir, out_path) -> Path:
    """Render one figure from the CSVs under in_dir; returns the output path."""
    rec = recipe(figure_id)
    tables = rec.load(Path(in_dir))
    fig = _DRAWERS[figure_id](tables, rec)
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, format="png", metadata={"Software": "catsim-plots"})
    plt.close(fig)
    return out
