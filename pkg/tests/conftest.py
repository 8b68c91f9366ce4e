"""Shared fixtures: independent oracles and session-scoped heavy runs."""

import math
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from catsim.hilbert import CatSpec, FockDim, cat, coherent, fock
from catsim.lindblad import DensityMatrix, Propagator, steady_state, two_photon_model

PRESET_DIR = Path(__file__).resolve().parent.parent / "presets"

ALL_PRESETS = sorted(p.stem for p in PRESET_DIR.glob("*.toml"))


def coherent_overlap(b, g):
    """<b|g> from the closed form, independent of any matrix code."""
    return np.exp(-abs(b) ** 2 / 2 - abs(g) ** 2 / 2 + np.conj(b) * g)


def cat_norm2(alpha, sign):
    """Squared normalization of |alpha> + sign |-alpha>."""
    return 2.0 * (1.0 + sign * np.real(coherent_overlap(alpha, -alpha)))


@pytest.fixture(scope="session")
def dim40():
    return FockDim(40)


@pytest.fixture(scope="session")
def two_photon_nbar4(dim40):
    """Eq.-(1)-style model at kappa = 1, n_bar = 4 (alpha = 2)."""
    return two_photon_model(2.0, 1.0, dim40)


@pytest.fixture(scope="session")
def steady_grid(two_photon_nbar4, dim40):
    """Numerical steady states over the 3x4 coherent grid, via one shared
    propagator; used by the asymptotics comparisons and the acceptance suite."""
    prop = Propagator(two_photon_nbar4, 2.0)
    betas = [bx + 1j * by for bx in (-2.0, -2.0 / 3.0, 2.0 / 3.0, 2.0)
             for by in (-1.5, 0.0, 1.5)]
    out = {}
    for b in betas:
        rho0 = DensityMatrix.from_ket(coherent(b, dim40))
        rho, elapsed = steady_state(two_photon_nbar4, rho0, tol=1e-8,
                                    propagator=prop, max_time=500.0)
        out[b] = (rho, elapsed)
    return out


@pytest.fixture(scope="session")
def fig7_comparisons():
    """Full-vs-reduced comparison at the worked parameter set plus the two
    Kerr-free variants used for the gap-shrink check."""
    from catsim import reduction as rd

    paper = rd.compare_full_vs_reduced(rd.paper_circuit_params(), t_final=600.0,
                                       n_out=120)
    zero = rd.compare_full_vs_reduced(
        rd.scaled_down_variant(rd.paper_circuit_params(), factor=1.0, zero_kerr=True),
        t_final=600.0, n_out=60,
    )
    scaled = rd.compare_full_vs_reduced(
        rd.scaled_down_variant(rd.paper_circuit_params(), factor=3.0, zero_kerr=True),
        t_final=5400.0, n_out=60, dims=(FockDim(32), FockDim(8)),
    )
    return {"paper": paper, "zero_kerr": zero, "scaled": scaled}


@pytest.fixture(scope="session")
def preset_runs(tmp_path_factory):
    """Run every shipped preset once through the CLI; returns per-preset
    output directory and wall time.  Doubles as the corpus for the
    determinism re-runs and figure-rendering tests."""
    root = tmp_path_factory.mktemp("preset-runs")
    results = {}
    for name in ALL_PRESETS:
        out = root / name
        out.mkdir()
        t0 = time.perf_counter()
        proc = subprocess.run(
            [sys.executable, "-m", "catsim.cli", _preset_command(name),
             "--preset", name, "--out", str(out), "--jobs", "2"],
            capture_output=True, text=True, timeout=1800,
        )
        wall = time.perf_counter() - t0
        assert proc.returncode == 0, f"preset {name} failed:\n{proc.stderr}"
        results[name] = {"dir": out, "wall": wall}
    return results


def _preset_command(name: str) -> str:
    from catsim.config import load_config, preset_path

    return load_config(preset_path(name)).experiment


def read_csv_columns(path) -> dict:
    """Small CSV reader for test assertions (header -> float arrays)."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    cols = np.array(rows, dtype=float).T
    return {name: cols[i] for i, name in enumerate(header)}


def single_csv(run_dir: Path, contains: str = "") -> Path:
    paths = sorted(p for p in run_dir.glob("*.csv") if contains in p.name)
    assert paths, f"no CSV matching {contains!r} in {run_dir}"
    return paths[0]
