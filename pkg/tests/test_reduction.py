"""Circuit-QED two-mode model, parameter map, and reduced-model comparison."""

import math

import numpy as np
import pytest

from catsim import reduction as rd
from catsim.errors import TruncationTooSmall
from catsim.hilbert import FockDim, Operator, annihilation, fock, identity, parity, tensor
from catsim.lindblad import DensityMatrix, integrate, partial_trace, steady_state


@pytest.fixture()
def paper_run(fig7_comparisons):
    return fig7_comparisons["paper"]


def test_adiabatic_parameter_map():
    red = rd.adiabatic_params(rd.CircuitParams(g_2ph=0.05, eps_b=0.2, kappa_b=1.0))
    assert abs(red.eps_2ph - 0.02) < 1e-15
    assert abs(red.kappa_2ph - 0.01) < 1e-15
    assert abs(red.alpha - 2.0) < 1e-14


def test_adiabatic_regime_flag():
    assert rd.CircuitParams(g_2ph=0.05, eps_b=0.08, kappa_b=1.0).adiabatic_regime
    assert not rd.CircuitParams(g_2ph=0.2, eps_b=0.08, kappa_b=1.0).adiabatic_regime


def test_map_scaling_in_g():
    base = rd.adiabatic_params(rd.CircuitParams(g_2ph=0.03, eps_b=0.2))
    doubled = rd.adiabatic_params(rd.CircuitParams(g_2ph=0.06, eps_b=0.2))
    assert abs(doubled.kappa_2ph / base.kappa_2ph - 4.0) < 1e-12


def test_alpha_consistency_identity():
    for g, eb in ((0.05, 0.2), (0.02, 0.5), (0.11, 0.13)):
        red = rd.adiabatic_params(rd.CircuitParams(g_2ph=g, eps_b=eb))
        assert abs(red.alpha - math.sqrt(2 * red.eps_2ph / red.kappa_2ph)) < 1e-12
        assert abs(red.alpha - math.sqrt(eb / g)) < 1e-12


def test_reduced_params_invariant():
    with pytest.raises(ValueError):
        rd.ReducedParams(eps_2ph=0.02, kappa_2ph=0.01, alpha=1.5)


def test_pump_ratio_g_consistency():
    p = rd.paper_circuit_params()
    assert abs(p.g_from_pump() - 0.0495) < 1e-12
    assert abs(p.g_from_pump() - p.g_2ph) < 0.01 * p.g_2ph * 2  # ~1% rounding in g


def test_full_model_hermitian_and_builds_at_paper_dims():
    model = rd.build_full_model(rd.paper_circuit_params(), (FockDim(40), FockDim(12)))
    h = model.hamiltonian.matrix
    assert np.max(np.abs(h - h.conj().T)) < 1e-12
    assert model.dim == 480


def test_full_model_rejects_inadequate_storage_dim():
    with pytest.raises(TruncationTooSmall):
        rd.build_full_model(rd.paper_circuit_params(), (FockDim(12), FockDim(12)))


def test_limit_reduces_to_driven_damped_buffer():
    p = rd.CircuitParams(g_2ph=0.0, eps_b=0.3, kappa_b=1.0)
    dims = (FockDim(2), FockDim(12))
    model = rd.build_full_model(p, dims)
    # steady state of a resonantly driven damped mode: coherent, n = (2 eps/kappa)^2;
    # the rhs floor set by the buffer truncation is ~7e-8 at 12 levels
    rho, _ = steady_state(model, DensityMatrix.from_ket(
        tensor(fock(0, dims[0]), fock(0, dims[1]))), tol=2e-7, max_time=100.0)
    rho_b = partial_trace(rho.matrix, dims, keep=1)
    nb = float(np.real(np.trace(np.diag(np.arange(12)) @ rho_b)))
    assert abs(nb - (2 * 0.3) ** 2) < 1e-6


def test_mode_a_parity_conserved_without_drive():
    p = rd.CircuitParams(g_2ph=0.05, eps_b=0.0, kappa_b=1.0, chi_ab=0.033)
    dims = (FockDim(20), FockDim(8))
    model = rd.build_full_model(p, dims)
    from catsim.hilbert import coherent

    psi_a = coherent(1.2, dims[0])
    rho0 = tensor(psi_a, fock(0, dims[1]))
    pi_a = tensor(parity(dims[0]), identity(dims[1]))
    traj = integrate(model, DensityMatrix.from_ket(rho0), 5.0, {"pi_a": pi_a},
                     n_out=60, method="rk45")
    series = traj.observables["pi_a"].real
    assert np.max(np.abs(series - series[0])) < 1e-6


def test_paper_comparison_converges(paper_run):
    res = paper_run
    assert res.fidelity_full[-1] > 0.95
    assert res.fidelity_reduced[-1] > 0.99
    assert res.terminal_gap < 0.05


def test_buffer_occupation_stays_low(paper_run):
    assert float(paper_run.buffer_occupation.max()) < 0.5


def test_steady_cat_amplitude_matches_map(paper_run):
    """alpha' extracted from <a^2> of the full model's terminal mode-a state
    stays within 5% of sqrt(eps_b / g)."""
    p = rd.paper_circuit_params()
    rho_a = paper_run.final_mode_a
    n_a = rho_a.shape[0]
    a2 = np.linalg.matrix_power(annihilation(FockDim(n_a)).matrix, 2)
    alpha_sq = np.einsum("ij,ji->", a2, rho_a)
    alpha_fit = math.sqrt(abs(alpha_sq))
    assert abs(alpha_fit - math.sqrt(p.eps_b / p.g_2ph)) < 0.05 * math.sqrt(p.eps_b / p.g_2ph)


def test_gap_shrinks_without_kerr_and_with_scaling(fig7_comparisons):
    gap_paper = fig7_comparisons["paper"].terminal_gap
    assert gap_paper > fig7_comparisons["zero_kerr"].terminal_gap
    assert fig7_comparisons["zero_kerr"].terminal_gap >= fig7_comparisons["scaled"].terminal_gap