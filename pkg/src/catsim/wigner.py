"""Wigner quasi-probability distributions via the displaced-parity trace.

W(beta) = (2/pi) Tr[D(beta) Pi D(beta)^+ rho] with beta = x + i p, so that
the distribution integrates to one over the (x, p) plane.  Displacements are
evaluated exactly at the truncation level; D(x + ip) factorizes as
e^{i x p} D(x) D(ip), so one expm per grid row/column suffices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import TruncationTooSmall
from .hilbert import FockDim, displacement
from .lindblad import _as_matrix

PEAK = 2.0 / math.pi  # |W| bound; the vacuum value at the origin


@dataclass(frozen=True)
class PhaseSpaceGrid:
    """Uniform rectangular grid of Wigner values, values[i, j] = W(x_i + i p_j)."""

    x: np.ndarray
    p: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, float)
        p = np.asarray(self.p, float)
        v = np.asarray(self.values, float)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "values", v)
        for axis in (x, p):
            if len(axis) > 1:
                steps = np.diff(axis)
                if np.max(np.abs(steps - steps[0])) > 1e-9 * abs(steps[0]):
                    raise ValueError("grid spacing must be uniform")
        if v.shape != (len(x), len(p)):
            raise ValueError("values shape must be (len(x), len(p))")

    def integral(self) -> float:
        dx = self.x[1] - self.x[0]
        dp = self.p[1] - self.p[0]
        return float(np.sum(self.values) * dx * dp)


PAD_CAP = 400


def _padded_state(rho_m: np.ndarray, extent: float) -> np.ndarray:
    """Zero-pad the state so displacements to the grid edge stay exact.

    The state must be faithfully represented at its own truncation (weight in
    the top tenth of its levels below 1e-6); the displaced-parity evaluation
    then extends the space to hold the state shifted by the grid reach.
    """
    n = rho_m.shape[0]
    probs = np.real(np.diag(rho_m))
    top = max(2, n // 10)
    if float(np.sum(probs[n - top:])) > 1e-6:
        raise TruncationTooSmall(
            "state carries visible weight at its own truncation edge; "
            "Wigner values would reflect the clipped state"
        )
    occupancy = float(np.sum(probs * np.arange(n)))
    reach = math.sqrt(max(occupancy, 0.0)) + extent
    n_wig = max(n, math.ceil(reach**2 + 4.0 * reach + 10.0))
    if n_wig > PAD_CAP:
        raise TruncationTooSmall(
            f"grid reach {reach:.1f} would need {n_wig} Fock levels (cap {PAD_CAP})"
        )
    if n_wig == n:
        return rho_m
    out = np.zeros((n_wig, n_wig), dtype=complex)
    out[:n, :n] = rho_m
    return out


def wigner_at(rho, betas: np.ndarray) -> np.ndarray:
    """W at arbitrary phase-space points (exact displaced-parity values)."""
    betas = np.asarray(betas, complex)
    rho_m = _as_matrix(rho)
    extent = float(np.max(np.abs(betas))) if len(betas) else 0.0
    rho_p = _padded_state(rho_m, extent)
    dim = FockDim(rho_p.shape[0])
    signs = (-1.0) ** np.arange(dim.n_max)
    out = np.empty(len(betas), dtype=float)
    for i, b in enumerate(betas):
        d = displacement(b, dim).matrix
        transformed = d.conj().T @ rho_p @ d
        out[i] = PEAK * float(np.real(np.sum(signs * np.diag(transformed))))
    return out


def wigner(
    rho,
    x_range: tuple[float, float] = (-4.0, 4.0),
    p_range: tuple[float, float] = (-4.0, 4.0),
    resolution: int = 121,
) -> PhaseSpaceGrid:
    """Wigner grid of a state, row-major over (x, p).

    One displacement exponential per row and per column; each grid point then
    costs a single matrix trace against a cached displaced-parity kernel.
    """
    rho_m = _as_matrix(rho)
    xs = np.linspace(*x_range, resolution)
    ps = np.linspace(*p_range, resolution)
    corner = math.hypot(float(np.max(np.abs(xs))), float(np.max(np.abs(ps))))
    rho_p = _padded_state(rho_m, corner)
    dim = FockDim(rho_p.shape[0])
    signs = (-1.0) ** np.arange(dim.n_max)

    # B_j = D(ip_j) Pi D(ip_j)^+; W = (2/pi) Tr[B_j D(x_i)^+ rho D(x_i)].
    # Collinear displacements compose without extra phases, so each axis
    # needs one exponential and a chain of products.
    n = dim.n_max
    step_p = displacement(1j * (ps[1] - ps[0]), dim).matrix if resolution > 1 else None
    dpm = displacement(1j * ps[0], dim).matrix
    kernels = np.empty((resolution, n * n), dtype=complex)
    for j in range(resolution):
        if j > 0:
            dpm = step_p @ dpm
        kernels[j] = (dpm @ (signs[:, None] * dpm.conj().T)).reshape(-1)

    step_x = displacement(xs[1] - xs[0], dim).matrix if resolution > 1 else None
    dxm = displacement(xs[0], dim).matrix
    values = np.empty((resolution, resolution), dtype=float)
    for i in range(resolution):
        if i > 0:
            dxm = step_x @ dxm
        rho_x = dxm.conj().T @ rho_p @ dxm
        values[i, :] = PEAK * np.real(kernels @ rho_x.T.reshape(-1))
    return PhaseSpaceGrid(x=xs, p=ps, values=values)


def write_csv(grid: PhaseSpaceGrid, path) -> None:
    """CSV with header x,p,w; row-major; 9 significant digits."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("x,p,w\n")
        for i, x in enumerate(grid.x):
            for j, p in enumerate(grid.p):
                fh.write(f"{x:.9g},{p:.9g},{grid.values[i, j]:.9g}\n")
