"""Lindblad master-equation integration, steady states, and state metrics.

The generator acts on the vectorized density matrix (row-major) through a
cached sparse superoperator.  Two propagation paths are available:

* ``rk45`` -- adaptive embedded Dormand-Prince 4/5 stepping, the uniform
  method that works at any dimension;
* ``expm`` -- a dense matrix exponential of the superoperator over one output
  interval, applied repeatedly.  Exact to machine precision and far cheaper
  than explicit stepping for strongly separated rate scales (multi-photon
  dissipators), but only available while the superoperator fits in memory.

``method="auto"`` picks between them from the estimated explicit step count.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import expm

from .errors import DimensionMismatch, NoConvergence, StiffnessFailure
from .hilbert import FockDim, Ket, Operator, annihilation, number

EXPM_SIDE_CAP = 2100          # largest superoperator side for the dense expm path
AUTO_STEP_THRESHOLD = 20000   # predicted rk45 step count above which expm is preferred


# ---------------------------------------------------------------------------
# state containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, PSD, unit-trace matrix on a truncated Fock space."""

    dims: tuple[FockDim, ...]
    matrix: np.ndarray
    validate: bool = True

    def __post_init__(self):
        dims = (self.dims,) if isinstance(self.dims, FockDim) else tuple(self.dims)
        object.__setattr__(self, "dims", dims)
        m = np.ascontiguousarray(self.matrix, dtype=complex)
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)
        side = self.total_dim
        if m.shape != (side, side):
            raise DimensionMismatch(
                f"matrix shape {m.shape} does not match mode dims "
                f"{tuple(d.n_max for d in dims)}"
            )
        if self.validate:
            herm = np.max(np.abs(m - m.conj().T))
            if herm > 1e-10:
                raise ValueError(f"density matrix hermiticity defect {herm:.2e} > 1e-10")
            tr = np.trace(m)
            if abs(tr - 1.0) > 1e-8:
                raise ValueError(f"density matrix trace {tr!r} deviates from 1 by > 1e-8")
            lo = float(np.linalg.eigvalsh(m)[0])
            if lo < -1e-8:
                raise ValueError(f"density matrix minimum eigenvalue {lo:.2e} < -1e-8")

    @property
    def total_dim(self) -> int:
        return int(np.prod([d.n_max for d in self.dims]))

    @classmethod
    def from_ket(cls, ket: Ket) -> "DensityMatrix":
        return cls(ket.dims, ket.projector(), validate=False)


@dataclass(frozen=True)
class Trajectory:
    """Time grid with named observable series and optional snapshots."""

    times: np.ndarray
    observables: dict[str, np.ndarray]
    snapshots: list[tuple[float, DensityMatrix]] = field(default_factory=list)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        object.__setattr__(self, "times", t)
        if t.ndim != 1 or len(t) < 2:
            raise ValueError("trajectory needs a 1-d time grid with >= 2 points")
        if np.any(np.diff(t) <= 0):
            raise ValueError("trajectory times must be strictly increasing")
        for name, series in self.observables.items():
            if len(series) != len(t):
                raise ValueError(f"observable '{name}' length differs from time grid")


# ---------------------------------------------------------------------------
# model
# ---------------------------------------------------------------------------

class LindbladModel:
    """One Hamiltonian plus a list of (rate, collapse operator) pairs.

    Units are angular frequency with hbar = 1.  The Hamiltonian must be
    Hermitian to 1e-12 (relative) and all rates nonnegative.
    """

    def __init__(self, hamiltonian: Operator, collapses: list[tuple[float, Operator]]):
        if not hamiltonian.is_hermitian(1e-12):
            raise ValueError("Hamiltonian is not Hermitian within 1e-12")
        for rate, op in collapses:
            if rate < 0:
                raise ValueError(f"collapse rate {rate} is negative")
            if op.total_dim != hamiltonian.total_dim:
                raise DimensionMismatch("collapse operator dimension differs from Hamiltonian")
        self.hamiltonian = hamiltonian
        self.collapses = [(float(r), op) for r, op in collapses]
        self.dims = hamiltonian.dims
        self.dim = hamiltonian.total_dim
        self._super = None
        self._onenorm = None

    # -- cached internals ---------------------------------------------------

    def _sparse_parts(self):
        """(M, [(rate, L_sparse), ...]) with M = -iH - sum(rate/2 L^+L)."""
        H = sp.csr_matrix(self.hamiltonian.matrix)
        M = (-1j) * H
        Ls = []
        for rate, op in self.collapses:
            L = sp.csr_matrix(op.matrix)
            Ls.append((rate, L))
            M = M - (0.5 * rate) * (L.conj().T @ L)
        return M.tocsr(), Ls

    @property
    def superoperator(self) -> sp.csr_matrix:
        """Sparse generator acting on the row-major vectorized density matrix."""
        if self._super is None:
            M, Ls = self._sparse_parts()
            eye = sp.identity(self.dim, format="csr", dtype=complex)
            G = sp.kron(M, eye, format="csr") + sp.kron(eye, M.conj(), format="csr")
            for rate, L in Ls:
                G = G + rate * sp.kron(L, L.conj(), format="csr")
            self._super = G.tocsr()
        return self._super

    @property
    def onenorm(self) -> float:
        """1-norm of the generator; sets the explicit stability scale."""
        if self._onenorm is None:
            G = self.superoperator
            self._onenorm = float(np.max(np.abs(G).sum(axis=0)))
        return self._onenorm

    @property
    def max_rate(self) -> float:
        return max((r for r, _ in self.collapses), default=0.0)

    def stiffness_floor(self) -> float:
        """Minimum step before the integrator declares stiffness failure."""
        kappa = self.max_rate
        if kappa == 0.0:
            return 1e-12
        return 1e-6 / (kappa * self.dim**2)


# ---------------------------------------------------------------------------
# generator applications
# ---------------------------------------------------------------------------

def _as_matrix(rho) -> np.ndarray:
    if isinstance(rho, DensityMatrix):
        return np.asarray(rho.matrix)
    if isinstance(rho, Ket):
        return rho.projector()
    return np.asarray(rho, dtype=complex)


def rhs(model: LindbladModel, rho) -> np.ndarray:
    """-i[H, rho] + sum_k rate_k D[L_k] rho, as a dense matrix."""
    m = _as_matrix(rho)
    if m.shape != (model.dim, model.dim):
        raise DimensionMismatch(f"state shape {m.shape} does not match model dim {model.dim}")
    out = model.superoperator @ m.reshape(-1)
    return out.reshape(model.dim, model.dim)


def adjoint_rhs(model: LindbladModel, op) -> np.ndarray:
    """Heisenberg-picture derivative i[H, J] + sum rate (L^+ J L - {L^+L, J}/2)."""
    J = op.matrix if isinstance(op, Operator) else np.asarray(op, dtype=complex)
    if J.shape != (model.dim, model.dim):
        raise DimensionMismatch("operator shape does not match model")
    H = model.hamiltonian.matrix
    out = 1j * (H @ J - J @ H)
    for rate, L in model.collapses:
        Lm = L.matrix
        LdL = Lm.conj().T @ Lm
        out += rate * (Lm.conj().T @ J @ Lm - 0.5 * (LdL @ J + J @ LdL))
    return out


# ---------------------------------------------------------------------------
# propagation engines
# ---------------------------------------------------------------------------

# Dormand-Prince 4(5) tableau, FSAL form
_DP_A = (
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_DP_E = np.array(
    [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
)


def _symmetrize(v: np.ndarray, d: int) -> np.ndarray:
    m = v.reshape(d, d)
    m = 0.5 * (m + m.conj().T)
    return m.reshape(-1)


class _RK45:
    """Adaptive stepper on the vectorized density matrix."""

    def __init__(self, model: LindbladModel, rtol: float, atol: float):
        self.G = model.superoperator
        self.d = model.dim
        self.rtol = rtol
        self.atol = atol
        self.h_min = model.stiffness_floor()
        self.h = min(0.5, 1.0 / max(model.onenorm, 1e-30))
        self._k1 = None

    def advance(self, v: np.ndarray, t0: float, t1: float) -> np.ndarray:
        """Integrate from t0 to t1, symmetrizing after each accepted step."""
        G, d = self.G, self.d
        t = t0
        k1 = self._k1 if self._k1 is not None else G @ v
        while t < t1 - 1e-14 * max(1.0, abs(t1)):
            h = min(self.h, t1 - t)
            if h < self.h_min:
                raise StiffnessFailure(
                    f"step {h:.3e} fell below stiffness floor {self.h_min:.3e} at t={t:.6g}"
                )
            ks = [k1]
            for row in _DP_A:
                y = v + h * sum(c * k for c, k in zip(row, ks) if c != 0.0)
                ks.append(G @ y)
            y_new = y  # the 6th stage uses the 5th-order solution weights
            err = h * sum(c * k for c, k in zip(_DP_E, ks) if c != 0.0)
            scale = self.atol + self.rtol * max(
                float(np.max(np.abs(v))), float(np.max(np.abs(y_new)))
            )
            err_norm = float(np.sqrt(np.mean((np.abs(err) / scale) ** 2)))
            if err_norm <= 1.0:
                t += h
                v = _symmetrize(y_new, d)
                k1 = G @ v  # symmetrization invalidates the FSAL stage
                grow = 0.9 * err_norm ** -0.2 if err_norm > 0 else 5.0
                self.h = h * min(5.0, max(0.2, grow))
            else:
                self.h = h * max(0.2, 0.9 * err_norm ** -0.2)
        self._k1 = k1
        return v


class Propagator:
    """Dense exp(G dt) for one output interval, reusable across runs."""

    def __init__(self, model: LindbladModel, dt: float):
        side = model.dim**2
        if side > EXPM_SIDE_CAP:
            raise MemoryError(
                f"superoperator side {side} exceeds dense-expm cap {EXPM_SIDE_CAP}"
            )
        self.model = model
        self.dt = float(dt)
        self.matrix = expm(model.superoperator.toarray() * self.dt)

    def apply(self, v: np.ndarray) -> np.ndarray:
        return _symmetrize(self.matrix @ v, self.model.dim)


def _pick_method(model: LindbladModel, span: float, method: str) -> str:
    if method != "auto":
        return method
    predicted_steps = span * model.onenorm / 3.0
    if model.dim**2 <= EXPM_SIDE_CAP and predicted_steps > AUTO_STEP_THRESHOLD:
        return "expm"
    return "rk45"


# ---------------------------------------------------------------------------
# public integration API
# ---------------------------------------------------------------------------

def _eval_observables(observables, rho_m: np.ndarray):
    out = {}
    for name, ob in (observables or {}).items():
        if isinstance(ob, Operator):
            out[name] = complex(np.einsum("ij,ji->", ob.matrix, rho_m))
        else:
            out[name] = complex(ob(rho_m))
    return out


def integrate(
    model: LindbladModel,
    rho0,
    t_final: float,
    observables=None,
    *,
    n_out: int = 400,
    rtol: float = 1e-8,
    atol: float = 1e-10,
    method: str = "auto",
    snapshot_times=(),
    propagator: Propagator | None = None,
) -> Trajectory:
    """Evolve rho0 to t_final, sampling observables on a uniform grid.

    `observables` maps names to Operators (expectation values) or callables
    acting on the dense state matrix.  Snapshot requests are rounded to the
    nearest grid time.  Raises StiffnessFailure if adaptive stepping stalls.
    """
    if t_final <= 0:
        raise ValueError("t_final must be positive")
    rho_m = _as_matrix(rho0)
    if rho_m.shape != (model.dim, model.dim):
        raise DimensionMismatch("initial state does not match model dimension")
    times = np.linspace(0.0, t_final, n_out)
    dt = times[1] - times[0]
    snap_idx = {int(round(ts / dt)) for ts in snapshot_times}

    use = _pick_method(model, t_final, method)
    if use == "expm":
        prop = propagator if propagator is not None and abs(propagator.dt - dt) < 1e-15 * dt \
            else Propagator(model, dt)
        stepper = None
    elif use == "rk45":
        prop = None
        stepper = _RK45(model, rtol, atol)
    else:
        raise ValueError(f"unknown method {use!r}")

    v = rho_m.reshape(-1).astype(complex)
    series = {name: np.empty(n_out, dtype=complex) for name in (observables or {})}
    snapshots = []

    for i, t in enumerate(times):
        if i > 0:
            v = prop.apply(v) if prop is not None else stepper.advance(v, times[i - 1], t)
        m = v.reshape(model.dim, model.dim)
        for name, val in _eval_observables(observables, m).items():
            series[name][i] = val
        if i in snap_idx:
            snapshots.append((float(t), DensityMatrix(model.dims, m.copy(), validate=False)))

    return Trajectory(times=times, observables=series, snapshots=snapshots)


def steady_state(
    model: LindbladModel,
    rho0,
    tol: float = 1e-9,
    *,
    max_time: float = 1e4,
    chunk: float | None = None,
    rtol: float = 1e-8,
    atol: float = 1e-10,
    method: str = "auto",
    propagator: Propagator | None = None,
):
    """Integrate until max|rhs(rho)| < tol; returns (rho, elapsed_model_time).

    The caller guarantees the model has an attracting steady manifold.
    Raises NoConvergence once max_time of model evolution is exhausted.
    """
    rho_m = _as_matrix(rho0)
    v = rho_m.reshape(-1).astype(complex)
    G = model.superoperator
    if chunk is None:
        rate = model.max_rate
        chunk = 2.0 / rate if rate > 0 else 1.0

    use = _pick_method(model, max_time / 10.0, method)
    if propagator is not None:
        use, prop, chunk = "expm", propagator, propagator.dt
    elif use == "expm":
        prop = Propagator(model, chunk)
    else:
        prop = None
        stepper = _RK45(model, rtol, atol)

    t = 0.0
    while t < max_time:
        if prop is not None:
            v = prop.apply(v)
        else:
            v = stepper.advance(v, t, t + chunk)
        t += chunk
        resid = float(np.max(np.abs(G @ v)))
        if resid < tol:
            m = v.reshape(model.dim, model.dim)
            m = m / np.trace(m).real
            return DensityMatrix(model.dims, m, validate=False), t
    raise NoConvergence(
        f"residual {resid:.3e} still above tol {tol:.0e} after t={t:.4g}"
    )


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

def fidelity(rho, psi: Ket) -> float:
    """<psi| rho |psi> for a pure target."""
    m = _as_matrix(rho)
    if m.shape[0] != psi.total_dim:
        raise DimensionMismatch("state and ket dimensions differ")
    val = float(np.real(np.vdot(psi.amplitudes, m @ psi.amplitudes)))
    if not -1e-8 <= val <= 1.0 + 1e-8:
        raise ValueError(f"fidelity {val} outside [0, 1] tolerance band")
    return val


def purity(rho) -> float:
    m = _as_matrix(rho)
    return float(np.real(np.einsum("ij,ji->", m, m)))


def expect(rho, op: Operator) -> complex:
    m = _as_matrix(rho)
    if m.shape[0] != op.total_dim:
        raise DimensionMismatch("state and operator dimensions differ")
    return complex(np.einsum("ij,ji->", op.matrix, m))


def trace_distance(rho, sigma) -> float:
    diff = _as_matrix(rho) - _as_matrix(sigma)
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(diff))))


def min_eigenvalue(rho) -> float:
    return float(np.linalg.eigvalsh(_as_matrix(rho))[0])


def partial_trace(rho, dims: tuple[FockDim, FockDim], keep: int) -> np.ndarray:
    """Reduced state of one mode of a two-mode density matrix."""
    m = _as_matrix(rho)
    d1, d2 = dims[0].n_max, dims[1].n_max
    m = m.reshape(d1, d2, d1, d2)
    return np.einsum("ijkj->ik", m) if keep == 0 else np.einsum("ijil->jl", m)


# ---------------------------------------------------------------------------
# invariant-sector restriction
# ---------------------------------------------------------------------------

class SectorRestriction:
    """Restriction of a model to an invariant subset of Fock indices.

    Valid only when the Hamiltonian and every collapse operator are
    block-diagonal with respect to the subset (no coupling in or out); this
    is checked explicitly.  Photon-number parity sectors of multi-photon
    models are the intended use.
    """

    def __init__(self, dims, indices):
        self.full_dims = (dims,) if isinstance(dims, FockDim) else tuple(dims)
        self.indices = np.asarray(sorted(indices), dtype=int)
        self.full_dim = int(np.prod([d.n_max for d in self.full_dims]))
        comp = np.setdiff1d(np.arange(self.full_dim), self.indices)
        self._comp = comp
        self.dim = len(self.indices)
        self._restricted_dim = (FockDim(max(self.dim, 2)),)

    def _check_block(self, mat: np.ndarray, what: str) -> None:
        scale = max(1.0, float(np.max(np.abs(mat))))
        off1 = np.max(np.abs(mat[np.ix_(self._comp, self.indices)])) if len(self._comp) else 0.0
        off2 = np.max(np.abs(mat[np.ix_(self.indices, self._comp)])) if len(self._comp) else 0.0
        if max(off1, off2) > 1e-12 * scale:
            raise ValueError(f"{what} couples across the sector boundary; restriction invalid")

    def restrict_matrix(self, mat: np.ndarray) -> np.ndarray:
        return np.ascontiguousarray(mat[np.ix_(self.indices, self.indices)])

    def restrict_model(self, model: LindbladModel) -> LindbladModel:
        self._check_block(model.hamiltonian.matrix, "Hamiltonian")
        H = Operator(self._restricted_dim, self._pad(self.restrict_matrix(model.hamiltonian.matrix)))
        cols = []
        for rate, op in model.collapses:
            self._check_block(op.matrix, "collapse operator")
            cols.append((rate, Operator(self._restricted_dim, self._pad(self.restrict_matrix(op.matrix)))))
        return LindbladModel(H, cols)

    def _pad(self, mat: np.ndarray) -> np.ndarray:
        # FockDim requires n_max >= 2; pad a 1-dim sector with a dead level.
        if mat.shape[0] >= 2:
            return mat
        out = np.zeros((2, 2), dtype=complex)
        out[: mat.shape[0], : mat.shape[1]] = mat
        return out

    def restrict_vector(self, amps: np.ndarray) -> np.ndarray:
        sub = np.asarray(amps, dtype=complex)[self.indices]
        leak = 1.0 - float(np.linalg.norm(sub)) ** 2
        if leak > 1e-10:
            raise ValueError(f"state has weight {leak:.2e} outside the sector")
        return sub / np.linalg.norm(sub)

    def restrict_state(self, rho) -> np.ndarray:
        m = _as_matrix(rho)
        sub = m[np.ix_(self.indices, self.indices)]
        if abs(np.trace(sub) - np.trace(m)) > 1e-10:
            raise ValueError("state has population outside the sector")
        return np.ascontiguousarray(sub)

    def embed_state(self, rho_sub: np.ndarray) -> np.ndarray:
        full = np.zeros((self.full_dim, self.full_dim), dtype=complex)
        full[np.ix_(self.indices, self.indices)] = rho_sub[: self.dim, : self.dim]
        return full


def parity_sector(dim: FockDim, remainder: int, modulus: int = 2) -> SectorRestriction:
    idx = [n for n in range(dim.n_max) if n % modulus == remainder]
    return SectorRestriction((dim,), idx)


def joint_parity_sector(dims: tuple[FockDim, FockDim], remainder: int) -> SectorRestriction:
    """Two-mode sector with fixed total photon-number parity."""
    d1, d2 = dims[0].n_max, dims[1].n_max
    idx = [n1 * d2 + n2 for n1 in range(d1) for n2 in range(d2) if (n1 + n2) % 2 == remainder]
    return SectorRestriction(dims, idx)


def per_mode_parity_sector(dims: tuple[FockDim, FockDim], r1: int, r2: int) -> SectorRestriction:
    d1, d2 = dims[0].n_max, dims[1].n_max
    idx = [n1 * d2 + n2 for n1 in range(d1) for n2 in range(d2)
           if n1 % 2 == r1 and n2 % 2 == r2]
    return SectorRestriction(dims, idx)


# ---------------------------------------------------------------------------
# model factories for the multi-photon processes
# ---------------------------------------------------------------------------

def _pump_hamiltonian(a: np.ndarray, eps: complex, k: int) -> np.ndarray:
    """i(eps a^+k - eps* a^k): the k-photon drive commutator as a Hamiltonian."""
    ak = np.linalg.matrix_power(a, k)
    return 1j * (eps * ak.conj().T - np.conj(eps) * ak)


def two_photon_model(
    eps_2ph: complex,
    kappa_2ph: float,
    dim: FockDim,
    *,
    eps_x: float = 0.0,
    kappa_phi: float = 0.0,
    kappa_1ph: float = 0.0,
) -> LindbladModel:
    """Two-photon driven dissipative oscillator, optionally with a resonant
    drive eps_x(a + a^+), dephasing, and single-photon loss."""
    a = annihilation(dim).matrix
    H = _pump_hamiltonian(a, eps_2ph, 2)
    if eps_x:
        H = H + eps_x * (a + a.conj().T)
    collapses = [(kappa_2ph, Operator((dim,), a @ a))]
    if kappa_phi:
        collapses.append((kappa_phi, number(dim)))
    if kappa_1ph:
        collapses.append((kappa_1ph, annihilation(dim)))
    return LindbladModel(Operator((dim,), H), collapses)


def four_photon_model(
    eps_4ph: complex,
    kappa_4ph: float,
    dim: FockDim,
    *,
    eps_x: float = 0.0,
    kappa_phi: float = 0.0,
    kappa_1ph: float = 0.0,
) -> LindbladModel:
    """Four-photon process, optionally with a squeezing drive eps_x(a^2+a^+2),
    dephasing, and single-photon loss."""
    a = annihilation(dim).matrix
    H = _pump_hamiltonian(a, eps_4ph, 4)
    if eps_x:
        a2 = a @ a
        H = H + eps_x * (a2 + a2.conj().T)
    a4 = np.linalg.matrix_power(a, 4)
    collapses = [(kappa_4ph, Operator((dim,), a4))]
    if kappa_phi:
        collapses.append((kappa_phi, number(dim)))
    if kappa_1ph:
        collapses.append((kappa_1ph, annihilation(dim)))
    return LindbladModel(Operator((dim,), H), collapses)
