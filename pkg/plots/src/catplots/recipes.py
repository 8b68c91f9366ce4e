"""Figure recipes: which CSVs each figure consumes and how panels are laid out.

A recipe names its inputs by glob pattern relative to the input directory and
pins the exact CSV header it expects; mismatching headers are refused so a
stale or foreign file cannot be rendered silently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import MissingInput, SchemaMismatch

WIGNER_PEAK = 2.0 / math.pi


@dataclass(frozen=True)
class CsvSpec:
    key: str
    pattern: str
    header: tuple[str, ...]


@dataclass(frozen=True)
class FigureRecipe:
    figure_id: str
    inputs: tuple[CsvSpec, ...]
    title: str
    # wigner panels use a diverging map, symmetric about zero
    wigner_colormap: str = "RdBu_r"

    def resolve(self, in_dir: Path) -> dict[str, Path]:
        found = {}
        for spec in self.inputs:
            matches = sorted(in_dir.glob(spec.pattern))
            if not matches:
                raise MissingInput(
                    f"{self.figure_id}: no file matching {spec.pattern!r} in {in_dir}"
                )
            found[spec.key] = matches[-1]  # latest run wins
        return found

    def load(self, in_dir: Path) -> dict[str, dict[str, np.ndarray]]:
        tables = {}
        by_key = {s.key: s for s in self.inputs}
        for key, path in self.resolve(Path(in_dir)).items():
            tables[key] = _read_checked(path, by_key[key].header, self.figure_id)
        return tables


def _read_checked(path: Path, header: tuple[str, ...], figure_id: str):
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().strip()
        rows = [line.strip().split(",") for line in fh if line.strip()]
    names = tuple(first.split(","))
    if names != header:
        raise SchemaMismatch(
            f"{figure_id}: {path.name} has header {names}, recipe expects {header}"
        )
    if not rows:
        raise MissingInput(f"{figure_id}: {path.name} contains no data rows")
    cols = np.array(rows, dtype=float).T
    return {name: cols[i] for i, name in enumerate(names)}


_SWEEP = ("beta_re", "beta_im", "x_coord", "purity")
_RABI = ("t", "pop_zero", "pop_one", "coh_re", "coh_im", "bloch_x", "bloch_y",
         "bloch_z", "parity", "manifold_weight")
_BELL = ("t", "fid_bell_plus", "fid_bell_minus")
_LOSS = ("t", "pop_sector_0", "pop_sector_1", "pop_sector_2", "pop_sector_3")
_COMPARE = ("t", "fid_full", "fid_reduced", "n_buffer")
_RATE_A = ("alpha", "rate_fitted", "rate_analytic", "fit_residual")
_RATE_B = ("alpha", "rate_fitted", "rate_scaled", "fit_residual")
_WIGNER = ("x", "p", "w")

RECIPES: dict[str, FigureRecipe] = {
    "fig2": FigureRecipe(
        "fig2",
        tuple(CsvSpec(f"nbar{n}", f"sweep-nbar{n}-*.csv", _SWEEP) for n in (2, 4, 9, 25)),
        "Asymptotic X-coordinate and purity over initial coherent states",
    ),
    "fig3": FigureRecipe(
        "fig3", (CsvSpec("rabi", "rabi-*.csv", _RABI),),
        "Zeno X-rotations, two-component cat qubit",
    ),
    "fig4": FigureRecipe(
        "fig4", (CsvSpec("rabi", "rabi-*.csv", _RABI),),
        "Zeno X-rotations, four-component cat qubit",
    ),
    "fig5": FigureRecipe(
        "fig5", (CsvSpec("bell", "entangle-*.csv", _BELL),),
        "Entangling gate: Bell-state fidelities",
    ),
    "fig6": FigureRecipe(
        "fig6",
        (CsvSpec("idle", "loss-idle-*.csv", _LOSS),
         CsvSpec("driven", "loss-driven-*.csv", _LOSS)),
        "Photon-jump sector populations under single-photon loss",
    ),
    "fig7": FigureRecipe(
        "fig7", (CsvSpec("compare", "adiabatic-compare-*.csv", _COMPARE),),
        "Full circuit model vs adiabatic elimination",
    ),
    "fig8": FigureRecipe(
        "fig8",
        (CsvSpec("two_cat", "phase-flip-rate-2cat-*.csv", _RATE_A),),
        "Dephasing-induced phase-flip rate vs cat size",
    ),
    "fig8b": FigureRecipe(
        "fig8b",
        (CsvSpec("four_cat", "phase-flip-rate-4cat-*.csv", _RATE_B),),
        "Four-photon coherence decay vs cat size",
    ),
    "wigner": FigureRecipe(
        "wigner", (CsvSpec("grid", "wigner-*.csv", _WIGNER),),
        "Wigner distribution",
    ),
}


def recipe(figure_id: str) -> FigureRecipe:
    if figure_id not in RECIPES:
        raise MissingInput(
            f"unknown figure {figure_id!r}; available: {sorted(RECIPES)}"
        )
    return RECIPES[figure_id]
