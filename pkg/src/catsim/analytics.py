"""Closed-form asymptotics of the two-photon process and decay-rate fits.

Implements the conserved quantities fixing the asymptotic qubit state, the
coefficients of the steady state reached from a coherent state (series and
integral forms), the dephasing-induced phase-flip rate, and exponential-decay
fitting of simulated coherences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    NonExponentialDecay,
    QuadratureNoConvergence,
    TruncationTooSmall,
)
from .hilbert import CatSpec, FockDim, Operator, cat
from .lindblad import DensityMatrix, LindbladModel, Trajectory

Q_CAP = 200


# ---------------------------------------------------------------------------
# modified Bessel functions of the first kind, integer order
# ---------------------------------------------------------------------------

def _bessel_i_series(q: int, x: float) -> float:
    """Power series sum_m (x/2)^(2m+q) / (m! (m+q)!); all terms positive."""
    if x == 0.0:
        return 1.0 if q == 0 else 0.0
    log_half_x = math.log(x / 2.0)
    total = 0.0
    m = 0
    while True:
        log_term = (2 * m + q) * log_half_x - math.lgamma(m + 1) - math.lgamma(m + q + 1)
        term = math.exp(log_term)
        total += term
        if term < 1e-17 * total and m > q / 2:
            return total
        m += 1
        if m > 10000:  # pragma: no cover - series always terminates earlier
            return total


def bessel_i(q: int, x: float) -> float:
    """I_q(x) for integer order, relative accuracy ~1e-10; I_{-q} = I_q."""
    return bessel_i_scaled(q, x) * math.exp(x)


def bessel_i_scaled(q: int, x: float) -> float:
    """Exponentially scaled e^{-x} I_q(x); stable for large arguments."""
    q = abs(int(q))
    if q > Q_CAP:
        raise ValueError(f"order {q} beyond supported cap {Q_CAP}")
    if x < 0:
        raise ValueError("argument must be nonnegative")
    if x <= 30.0:
        return _bessel_i_series(q, x) * math.exp(-x)
    return _miller_scaled(q, x)


def _miller_scaled(q: int, x: float) -> float:
    start = q + int(math.ceil(math.sqrt(40.0 * x))) + 40
    i_next = 0.0     # I_{k+1}
    i_k = 1e-280     # I_k, arbitrary seed
    raw = {start: i_k}
    for k in range(start, 0, -1):
        i_prev = i_next + (2.0 * k / x) * i_k
        raw[k - 1] = i_prev
        i_next, i_k = i_k, i_prev
        if i_k > 1e260:
            for key in raw:
                raw[key] /= 1e260
            i_next /= 1e260
            i_k /= 1e260
    norm = raw[0] + 2.0 * sum(raw[k] for k in range(1, start + 1))
    return raw[q] / norm


# ---------------------------------------------------------------------------
# double factorials (log space)
# ---------------------------------------------------------------------------

def log_double_factorial(n: int) -> float:
    """log(n!!) with the conventions (-1)!! = 0!! = 1."""
    if n in (-1, 0):
        return 0.0
    if n < -1:
        raise ValueError("double factorial defined for n >= -1 here")
    k, log2 = divmod(n, 2)[0], math.log(2.0)
    if n % 2 == 0:  # (2k)!! = 2^k k!
        return k * log2 + math.lgamma(k + 1)
    # (2k+1)!! = (2k+1)! / (2^k k!)
    return math.lgamma(n + 1) - k * log2 - math.lgamma(k + 1)


# ---------------------------------------------------------------------------
# conserved quantities
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConservedQuantity:
    """Operator whose Heisenberg derivative vanishes under the pumped process."""

    label: str
    op: Operator
    alpha: complex
    q_order: int = 0


def build_j_plus_plus(dim: FockDim) -> ConservedQuantity:
    """Even-photon-number projector: fixes the even-cat population."""
    diag = (1.0 + (-1.0) ** np.arange(dim.n_max)) / 2.0
    return ConservedQuantity("J++", Operator((dim,), np.diag(diag)), 0.0)


def build_j00_4cat(dim: FockDim) -> ConservedQuantity:
    """Projector on photon numbers divisible by 4 (four-photon process)."""
    diag = (np.arange(dim.n_max) % 4 == 0).astype(float)
    return ConservedQuantity("J00_4cat", Operator((dim,), np.diag(diag)), 0.0)


def _j_pm_component(q: int, n_max: int) -> np.ndarray:
    """Matrix of J_{+-}^(q): elements |j><j + 2q + 1| on even rows j."""
    out = np.zeros((n_max, n_max), dtype=complex)
    for j in range(0, n_max, 2):
        m = j + 2 * q + 1
        if not 0 <= m < n_max:
            continue
        if q >= 0:
            log_val = (
                log_double_factorial(j - 1)
                - log_double_factorial(j + 2 * q)
                + 0.5 * (math.lgamma(m + 1) - math.lgamma(j + 1))
            )
        else:
            log_val = (
                log_double_factorial(m)
                - log_double_factorial(j)
                + 0.5 * (math.lgamma(j + 1) - math.lgamma(m + 1))
            )
        out[j, m] = math.exp(log_val)
    return out


def adaptive_q_range(x: float, rel_tol: float = 1e-12) -> int:
    """Largest |q| whose I_q(x) still contributes relative weight > rel_tol."""
    i0 = bessel_i_scaled(0, x)
    for q in range(1, Q_CAP + 1):
        if bessel_i_scaled(q, x) < rel_tol * i0:
            return q
    return Q_CAP


def build_j_plus_minus(alpha: complex, dim: FockDim, Q: int | None = None) -> ConservedQuantity:
    """Conserved coherence operator J_{+-} of the two-photon process.

    The q-sum runs over Bessel weights (-1)^q I_q(|alpha|^2)/(2q+1); Q is
    chosen adaptively unless given.  Normalization is fixed so that
    Tr[J_{+-}^dag |C+><C-|] = 1.
    """
    dim.check_adequate(alpha)
    x = abs(alpha) ** 2
    theta = np.angle(alpha) if alpha != 0 else 0.0
    if Q is None:
        Q = adaptive_q_range(x)
    if Q > Q_CAP:
        raise TruncationTooSmall(f"q-sum would need Q={Q} > cap {Q_CAP}")
    n_max = dim.n_max
    pref = math.sqrt(2.0 * x / math.sinh(2.0 * x))
    total = np.zeros((n_max, n_max), dtype=complex)
    for q in range(-Q, Q + 1):
        weight = ((-1.0) ** q) * bessel_i(q, x) / (2 * q + 1)
        total += weight * np.exp(-1j * theta * (2 * q + 1)) * _j_pm_component(q, n_max)
    op = Operator((dim,), pref * total)
    cq = ConservedQuantity("J+-", op, alpha, Q)
    # normalization invariant is fixed by the prefactor; verify at this truncation
    plus = cat(CatSpec(alpha, 2, +1), dim)
    minus = cat(CatSpec(alpha, 2, -1), dim)
    norm = np.vdot(minus.amplitudes, op.matrix.conj().T @ plus.amplitudes)
    if abs(norm - 1.0) > 1e-6:
        raise TruncationTooSmall(
            f"J+- normalization {norm:.8f} deviates from 1; increase n_max or Q"
        )
    return cq


def stationarity_residual(model: LindbladModel, op: Operator, margin: int = 8) -> float:
    """Max |Heisenberg derivative| of `op` away from the truncation boundary.

    Conserved-quantity matrix elements do not decay with photon number, so the
    hard Fock cutoff always corrupts the top `margin` rows and columns; the
    residual is therefore evaluated on the interior block only.
    """
    from .lindblad import adjoint_rhs

    dot = adjoint_rhs(model, op)
    keep = model.dim - margin
    if keep < 2:
        raise ValueError("margin leaves no interior block")
    return float(np.max(np.abs(dot[:keep, :keep])))


# ---------------------------------------------------------------------------
# asymptotic state from a coherent start
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AsymptoticState:
    """Steady-state coefficients in the cat basis for a coherent initial state."""

    c_pp: float
    c_mm: float
    c_pm: complex
    alpha: complex

    def __post_init__(self):
        if abs(self.c_pp + self.c_mm - 1.0) > 1e-12:
            raise ValueError("cat populations must sum to 1")
        if abs(self.c_pm) > 0.5 + 1e-8:
            raise ValueError(f"|c_pm| = {abs(self.c_pm):.6f} violates the Bloch bound 1/2")


def adaptive_simpson(f, a: float, b: float, tol: float = 1e-10, max_depth: int = 24):
    """Recursive adaptive Simpson quadrature for complex-valued integrands."""

    def simpson(fa, fm, fb, a_, b_):
        return (b_ - a_) / 6.0 * (fa + 4.0 * fm + fb)

    def recurse(a_, b_, fa, fm, fb, whole, tol_, depth):
        m = 0.5 * (a_ + b_)
        lm, rm = 0.5 * (a_ + m), 0.5 * (m + b_)
        flm, frm = f(lm), f(rm)
        left = simpson(fa, flm, fm, a_, m)
        right = simpson(fm, frm, fb, m, b_)
        if depth <= 0:
            raise QuadratureNoConvergence("adaptive Simpson exceeded maximum depth")
        if abs(left + right - whole) <= 15.0 * tol_:
            return left + right + (left + right - whole) / 15.0
        return recurse(a_, m, fa, flm, fm, left, tol_ / 2.0, depth - 1) + recurse(
            m, b_, fm, frm, fb, right, tol_ / 2.0, depth - 1
        )

    fa, fb, fm = f(a), f(b), f(0.5 * (a + b))
    whole = simpson(fa, fm, fb, a, b)
    return recurse(a, b, fa, fm, fb, whole, tol, max_depth)


def _inv_sqrt_sinh2x_scaled(x: float) -> float:
    """e^x / sqrt(sinh(2x)), computed without forming sinh for large x."""
    # sinh(2x) = e^{2x}(1 - e^{-4x})/2
    return math.sqrt(2.0) / math.sqrt(1.0 - math.exp(-4.0 * x))


def c_pm_integral(alpha: complex, beta: complex, tol: float = 1e-10) -> complex:
    """Coherence coefficient as the phase integral of I_0(|alpha^2 - beta^2 e^{2i phi}|).

    Evaluated with exponentially scaled Bessel values so arbitrary |beta| in
    the phase-space sweeps cannot overflow the quadrature.
    """
    if beta == 0:
        return 0.0
    x = abs(alpha) ** 2
    y = abs(beta) ** 2
    # pref = i alpha beta* e^{-y} / sqrt(2 sinh 2x); the e^{x} of the scaled
    # Bessel argument is folded into the integrand exponent arg - x - y.
    pref = 1j * alpha * np.conj(beta) * _inv_sqrt_sinh2x_scaled(x) / math.sqrt(2.0)

    def integrand(phi):
        arg = abs(alpha**2 - beta**2 * np.exp(2j * phi))
        return np.exp(-1j * phi + (arg - x - y)) * bessel_i_scaled(0, arg)

    return complex(pref * adaptive_simpson(integrand, 0.0, math.pi, tol))


def c_pm_series(alpha: complex, beta: complex, rel_tol: float = 1e-12) -> complex:
    """Same coefficient as the q-sum over I_q(|alpha|^2) I_q(|beta|^2)."""
    if beta == 0:
        return 0.0
    x, y = abs(alpha) ** 2, abs(beta) ** 2
    dtheta = (np.angle(alpha) if alpha != 0 else 0.0) - np.angle(beta)
    # sqrt(2) alpha beta* e^{-y} I_q(x) I_q(y) / sqrt(sinh 2x)
    #   = alpha beta* Iq_scaled(x) Iq_scaled(y) * 2 / sqrt(1 - e^{-4x})
    pref = alpha * np.conj(beta) * 2.0 / math.sqrt(1.0 - math.exp(-4.0 * x))
    Q = max(adaptive_q_range(x, rel_tol), adaptive_q_range(y, rel_tol))
    total = 0.0 + 0.0j
    for q in range(-Q, Q + 1):
        total += (
            ((-1.0) ** q / (2 * q + 1))
            * bessel_i_scaled(q, x)
            * bessel_i_scaled(q, y)
            * np.exp(1j * 2 * q * dtheta)
        )
    return complex(pref * total)


def asymptotic_from_coherent(alpha: complex, beta: complex, tol: float = 1e-10) -> AsymptoticState:
    """Asymptotic-state coefficients for rho(0) = |beta><beta| under the
    two-photon process with steady amplitude alpha."""
    b2 = abs(beta) ** 2
    c_pp = 0.5 * (1.0 + math.exp(-2.0 * b2))
    c_mm = 0.5 * (1.0 - math.exp(-2.0 * b2))
    c_pm = c_pm_integral(alpha, beta, tol)
    return AsymptoticState(c_pp=c_pp, c_mm=c_mm, c_pm=c_pm, alpha=alpha)


def reconstruct_rho_infinity(state: AsymptoticState, dim: FockDim) -> DensityMatrix:
    """rho_inf = c_pp |C+><C+| + c_mm |C-><C-| + c_pm |C+><C-| + h.c."""
    plus = cat(CatSpec(state.alpha, 2, +1), dim).amplitudes
    minus = cat(CatSpec(state.alpha, 2, -1), dim).amplitudes
    rho = (
        state.c_pp * np.outer(plus, plus.conj())
        + state.c_mm * np.outer(minus, minus.conj())
        + state.c_pm * np.outer(plus, minus.conj())
        + np.conj(state.c_pm) * np.outer(minus, plus.conj())
    )
    return DensityMatrix((dim,), rho, validate=False)


# ---------------------------------------------------------------------------
# dephasing-induced phase flips
# ---------------------------------------------------------------------------

def phase_flip_rate(alpha: complex, kappa_phi: float) -> float:
    """Magnitude of the slow decay eigenvalue of J_{+-} under dephasing:
    kappa_phi |alpha|^2 / sinh(2 |alpha|^2).  Tends to kappa_phi/2 as alpha -> 0."""
    x = abs(alpha) ** 2
    if x == 0.0:
        raise ValueError("alpha must be nonzero; the alpha->0 limit is kappa_phi/2")
    return kappa_phi * x / math.sinh(2.0 * x)


@dataclass(frozen=True)
class DecayFit:
    rate: float
    residual: float
    window: tuple[float, float]
    amplitude: float


def fit_decay_rate(
    traj: Trajectory,
    observable: str,
    window: tuple[float, float],
    residual_threshold: float = 1e-2,
) -> DecayFit:
    """Least-squares slope of log|s(t)| over the window.

    The observable must be bounded away from zero across the window (fit on
    magnitudes).  Raises NonExponentialDecay when the RMS log-residual
    exceeds the threshold.
    """
    t = traj.times
    s = np.abs(np.asarray(traj.observables[observable]))
    mask = (t >= window[0]) & (t <= window[1])
    if np.count_nonzero(mask) < 4:
        raise ValueError("window selects fewer than 4 samples")
    if np.any(s[mask] <= 0.0):
        raise NonExponentialDecay("observable vanishes inside the fit window")
    tw, logs = t[mask], np.log(s[mask])
    coeffs, *_ = np.polynomial.polynomial.polyfit(tw, logs, 1, full=True)
    intercept, slope = coeffs
    fit_resid = float(np.sqrt(np.mean((logs - (intercept + slope * tw)) ** 2)))
    if fit_resid > residual_threshold:
        raise NonExponentialDecay(
            f"log-linear fit residual {fit_resid:.3e} exceeds {residual_threshold:.0e}"
        )
    return DecayFit(rate=-float(slope), residual=fit_resid, window=window,
                    amplitude=float(math.exp(intercept)))


# ---------------------------------------------------------------------------
# invariant coherence-sector propagation (for the decay-rate figures)
# ---------------------------------------------------------------------------

def _block_check(mat: np.ndarray, idx: np.ndarray, what: str) -> None:
    comp = np.setdiff1d(np.arange(mat.shape[0]), idx)
    if len(comp) == 0:
        return
    leak = np.max(np.abs(mat[np.ix_(comp, idx)]))
    if leak > 1e-12 * max(1.0, float(np.max(np.abs(mat)))):
        raise ValueError(f"{what} leaks out of the sector; block propagation invalid")


def coherence_block_trajectory(
    model: LindbladModel,
    rho0,
    rows: np.ndarray,
    cols: np.ndarray,
    j_op: Operator,
    t_final: float,
    n_out: int = 200,
    name: str = "coherence",
) -> Trajectory:
    """Exact propagation of one off-diagonal photon-number-sector block.

    When every model term preserves the two sectors, the block rho[rows, cols]
    evolves autonomously under d/dt X = M_rr X + X M_cc^dag + sum_k rate L_rr X
    L_cc^dag; the observable Tr[J^dag rho] is sampled on a uniform grid through
    a dense exponential of the (small) block generator.
    """
    from scipy.linalg import expm as dense_expm

    rows = np.asarray(rows, dtype=int)
    cols = np.asarray(cols, dtype=int)
    M, Ls = model._sparse_parts()
    Md = M.toarray()
    _block_check(Md, rows, "effective Hamiltonian (rows sector)")
    _block_check(Md, cols, "effective Hamiltonian (cols sector)")
    G = np.kron(Md[np.ix_(rows, rows)], np.eye(len(cols))) + np.kron(
        np.eye(len(rows)), Md[np.ix_(cols, cols)].conj()
    )
    for rate, L in Ls:
        Ld = L.toarray()
        _block_check(Ld, rows, "collapse operator (rows sector)")
        _block_check(Ld, cols, "collapse operator (cols sector)")
        G = G + rate * np.kron(Ld[np.ix_(rows, rows)], Ld[np.ix_(cols, cols)].conj())

    rho_m = rho0.matrix if isinstance(rho0, DensityMatrix) else np.asarray(rho0, dtype=complex)
    if rho_m.shape != (model.dim, model.dim):
        raise DimensionMismatch("initial state does not match model dimension")
    block = rho_m[np.ix_(rows, cols)].reshape(-1)
    j_block = j_op.matrix[np.ix_(rows, cols)].reshape(-1)

    times = np.linspace(0.0, t_final, n_out)
    prop = dense_expm(G * (times[1] - times[0]))
    series = np.empty(n_out, dtype=complex)
    for i in range(n_out):
        if i > 0:
            block = prop @ block
        series[i] = np.vdot(j_block, block)
    return Trajectory(times=times, observables={name: series})


def mod_sector_indices(n_max: int, remainder: int, modulus: int) -> np.ndarray:
    return np.array([n for n in range(n_max) if n % modulus == remainder], dtype=int)
