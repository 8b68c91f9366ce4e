"""Rendering tests: each recipe renders from CLI-produced CSVs, refuses bad
inputs, and produces pixel-identical output on re-render."""

import subprocess
import sys
from pathlib import Path

import pytest

from catplots import MissingInput, RECIPES, SchemaMismatch, recipe, render
from catplots.cli import main as cli_main


def run_catsim(*args, timeout=600):
    proc = subprocess.run(
        [sys.executable, "-m", "catsim.cli", *args],
        capture_output=True, text=True, timeout=timeout,
    )
    assert proc.returncode == 0, proc.stderr
    return proc


PRESET_RUNS = (
    ("sweep", "fig2"),
    ("rabi", "fig3"),
    ("entangle", "fig5a"),
    ("loss", "fig6a"),
    ("loss", "fig6b"),
    ("adiabatic-compare", "fig7"),
    ("phase-flip-rate", "fig8a"),
    ("phase-flip-rate", "fig8b"),
    ("wigner", "wigner-cat"),
)


@pytest.fixture(scope="session")
def corpus(tmp_path_factory):
    """CSV corpus from the shipped presets, produced through the catsim CLI
    (the only interface this package consumes)."""
    root = tmp_path_factory.mktemp("csv-corpus")
    for command, preset in PRESET_RUNS:
        run_catsim(command, "--preset", preset, "--out", str(root), "--jobs", "2")
    return root


FIGURES = sorted(RECIPES)


@pytest.mark.parametrize("figure_id", FIGURES)
def test_every_recipe_renders(figure_id, corpus, tmp_path):
    out = render(figure_id, corpus, tmp_path / f"{figure_id}.png")
    data = out.read_bytes()
    assert data[:8] == b"\x89PNG\r\n\x1a\n"
    assert len(data) > 5000


@pytest.mark.parametrize("figure_id", ["fig3", "fig2", "wigner"])
def test_render_is_pixel_deterministic(figure_id, corpus, tmp_path):
    a = render(figure_id, corpus, tmp_path / "a.png").read_bytes()
    b = render(figure_id, corpus, tmp_path / "b.png").read_bytes()
    assert a == b


def test_missing_input_raises(tmp_path):
    with pytest.raises(MissingInput):
        render("fig3", tmp_path, tmp_path / "x.png")


def test_empty_csv_raises(tmp_path):
    (tmp_path / "rabi-20260101T000000Z.csv").write_text(
        "t,pop_zero,pop_one,coh_re,coh_im,bloch_x,bloch_y,bloch_z,parity,"
        "manifold_weight\n"
    )
    with pytest.raises(MissingInput):
        render("fig3", tmp_path, tmp_path / "x.png")


def test_header_mismatch_raises(tmp_path):
    (tmp_path / "rabi-20260101T000000Z.csv").write_text("t,wrong\n0,1\n")
    with pytest.raises(SchemaMismatch):
        render("fig3", tmp_path, tmp_path / "x.png")


def test_unknown_figure_rejected(tmp_path):
    with pytest.raises(MissingInput):
        recipe("fig99")


def test_cli_render_and_exit_codes(corpus, tmp_path):
    rc = cli_main(["render", "--figure", "fig5", "--in", str(corpus),
                   "--out", str(tmp_path / "f5.png")])
    assert rc == 0
    assert (tmp_path / "f5.png").exists()
    rc = cli_main(["render", "--figure", "fig5", "--in", str(tmp_path),
                   "--out", str(tmp_path / "none.png")])
    assert rc == 1
