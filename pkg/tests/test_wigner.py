"""Wigner distributions: exact values, normalization, symmetry, CSV format."""

import math

import numpy as np
import pytest

from catsim import wigner as wg
from catsim.errors import TruncationTooSmall
from catsim.hilbert import CatSpec, FockDim, cat, coherent, fock, parity
from catsim.lindblad import DensityMatrix, expect
from conftest import coherent_overlap

D40 = FockDim(40)


def cat_wigner_oracle(beta, alpha=2.0, sign=+1):
    """Closed-form Wigner of N(|alpha> + sign|-alpha>) from coherent
    cross-terms: Tr[D Pi D^+ |g><d|] = e^{2i Im(b* g)} <d|2b - g>."""
    norm2 = 2.0 * (1.0 + sign * np.real(coherent_overlap(alpha, -alpha)))
    total = 0.0
    for g, sg in ((alpha, 1.0), (-alpha, sign)):
        for d, sd in ((alpha, 1.0), (-alpha, sign)):
            total += sg * np.conj(sd) * np.exp(2j * np.imag(np.conj(beta) * g)) \
                * coherent_overlap(d, 2 * beta - g)
    return (2.0 / math.pi) * float(np.real(total)) / norm2


def test_vacuum_peak():
    grid = wg.wigner(DensityMatrix.from_ket(fock(0, D40)), (-3, 3), (-3, 3), 61)
    assert abs(grid.values[30, 30] - 2.0 / math.pi) < 1e-6
    assert abs(grid.integral() - 1.0) < 1e-3


def test_odd_cat_negative_at_origin():
    rho = DensityMatrix.from_ket(cat(CatSpec(2.0, 2, -1), D40))
    w0 = wg.wigner_at(rho, np.array([0.0 + 0.0j]))[0]
    assert abs(w0 + 2.0 / math.pi) < 1e-6


def test_origin_value_equals_parity_expectation():
    for ket in (coherent(1.1 - 0.4j, D40), cat(CatSpec(1.5, 4, 0), FockDim(36))):
        rho = DensityMatrix.from_ket(ket)
        w0 = wg.wigner_at(rho, np.array([0.0 + 0.0j]))[0]
        pi_val = expect(rho, parity(FockDim(ket.total_dim))).real
        assert abs(w0 - (2.0 / math.pi) * pi_val) < 1e-8


def test_even_cat_structure_against_oracle():
    rho = DensityMatrix.from_ket(cat(CatSpec(2.0, 2, +1), D40))
    pts = np.array([2.0 + 0.0j, -2.0 + 0.0j, 0.0 + 0.5j, 1.0 + 0.3j, 0.0j])
    vals = wg.wigner_at(rho, pts)
    for v, p in zip(vals, pts):
        assert abs(v - cat_wigner_oracle(p)) < 1e-5
    # two positive lobes and interference fringes along the imaginary axis
    assert vals[0] > 0.25 and vals[1] > 0.25
    fringe = wg.wigner_at(rho, np.array([1j * math.pi / 8]))[0]
    assert fringe < -0.1


def test_grid_normalization_and_shape():
    rho = DensityMatrix.from_ket(cat(CatSpec(2.0, 2, +1), D40))
    grid = wg.wigner(rho, (-4, 4), (-4, 4), 81)
    assert grid.values.shape == (81, 81)
    assert abs(grid.integral() - 1.0) < 1e-3


def test_rotation_symmetry():
    # state rotated by pi/2 (alpha -> i alpha) shows the rotated distribution
    rho_a = DensityMatrix.from_ket(cat(CatSpec(2.0, 2, +1), D40))
    rho_ia = DensityMatrix.from_ket(cat(CatSpec(2.0j, 2, +1), D40))
    pts = np.array([1.0 + 0.5j, 2.0j, 0.3 - 0.7j, 1.7 + 0.0j])
    w_rotated = wg.wigner_at(rho_ia, pts)
    w_reference = wg.wigner_at(rho_a, pts * np.exp(-1j * math.pi / 2))
    assert np.max(np.abs(w_rotated - w_reference)) < 1e-10


def test_truncation_guard():
    # a state clipped at its own truncation cannot give trusted values
    d = FockDim(12)
    amps = np.zeros(12, dtype=complex)
    amps[10] = 1.0
    rho = np.outer(amps, amps)
    with pytest.raises(TruncationTooSmall):
        wg.wigner(rho, (-3, 3), (-3, 3), 21)


def test_grid_requires_uniform_spacing():
    with pytest.raises(ValueError):
        wg.PhaseSpaceGrid(x=np.array([0.0, 1.0, 3.0]), p=np.array([0.0, 1.0, 2.0]),
                          values=np.zeros((3, 3)))


def test_csv_output(tmp_path):
    rho = DensityMatrix.from_ket(fock(0, FockDim(12)))
    grid = wg.wigner(rho, (-1, 1), (-1, 1), 5)
    path = tmp_path / "w.csv"
    wg.write_csv(grid, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "x,p,w"
    assert len(lines) == 26
    x, p, w = lines[1].split(",")
    assert float(x) == -1.0 and float(p) == -1.0
