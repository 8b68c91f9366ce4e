"""Truncated Fock-space states and operators.

Single-mode objects live on the first `n_max` Fock levels |0>..|n_max-1>;
two-mode objects are Kronecker products with mode 1 as the slow index.
All constructors are pure and the returned arrays are frozen, so values can
be shared freely across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm
from scipy.special import gammainc

from .errors import DimensionMismatch, TruncationTooSmall

TAIL_WEIGHT_LIMIT = 1e-10


def coherent_tail_weight(alpha: complex, n_max: int) -> float:
    """Probability weight of a coherent state beyond Fock level n_max-1.

    The photon-number distribution of |alpha> is Poisson with mean |alpha|^2,
    so the tail is the regularized incomplete gamma function; this form is
    stable for any amplitude.
    """
    mu = abs(alpha) ** 2
    if mu == 0.0:
        return 0.0
    return float(gammainc(n_max, mu))


def default_n_max(alpha: complex) -> int:
    """Default truncation for amplitudes up to |alpha|.

    ceil(|a|^2 + 8|a| + 12) keeps the coherent tail below 1e-10 with enough
    headroom that products like a^4 rho a^+4 stay accurate.
    """
    a = abs(alpha)
    return math.ceil(a * a + 8.0 * a + 12.0)


def check_truncation(alpha: complex, n_max: int, limit: float = TAIL_WEIGHT_LIMIT) -> None:
    tail = coherent_tail_weight(alpha, n_max)
    if tail > limit:
        raise TruncationTooSmall(
            f"coherent tail weight {tail:.3e} beyond n_max={n_max} exceeds "
            f"{limit:.0e} for |alpha|={abs(alpha):.3f}"
        )


@dataclass(frozen=True)
class FockDim:
    """Number of retained Fock levels of one oscillator mode."""

    n_max: int

    def __post_init__(self):
        if not isinstance(self.n_max, (int, np.integer)) or self.n_max < 2:
            raise ValueError(f"n_max must be an integer >= 2, got {self.n_max!r}")

    def check_adequate(self, alpha: complex, limit: float = TAIL_WEIGHT_LIMIT) -> None:
        """Raise TruncationTooSmall if |alpha> does not fit this truncation."""
        check_truncation(alpha, self.n_max, limit)


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=complex)
    arr.flags.writeable = False
    return arr


def _as_dims(dim) -> tuple[FockDim, ...]:
    if isinstance(dim, FockDim):
        return (dim,)
    return tuple(dim)


@dataclass(frozen=True)
class Operator:
    """Dense complex matrix on a truncated Fock space (or a tensor product)."""

    dims: tuple[FockDim, ...]
    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dims", _as_dims(self.dims))
        object.__setattr__(self, "matrix", _freeze(self.matrix))
        side = self.total_dim
        if self.matrix.shape != (side, side):
            raise DimensionMismatch(
                f"matrix shape {self.matrix.shape} does not match mode dims "
                f"{tuple(d.n_max for d in self.dims)}"
            )

    @property
    def total_dim(self) -> int:
        return int(np.prod([d.n_max for d in self.dims]))

    @property
    def dag(self) -> "Operator":
        return Operator(self.dims, self.matrix.conj().T)

    def __add__(self, other: "Operator") -> "Operator":
        self._check_same_space(other)
        return Operator(self.dims, self.matrix + other.matrix)

    def __sub__(self, other: "Operator") -> "Operator":
        self._check_same_space(other)
        return Operator(self.dims, self.matrix - other.matrix)

    def __mul__(self, scalar: complex) -> "Operator":
        return Operator(self.dims, self.matrix * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "Operator":
        return Operator(self.dims, -self.matrix)

    def __matmul__(self, other):
        if isinstance(other, Operator):
            self._check_same_space(other)
            return Operator(self.dims, self.matrix @ other.matrix)
        if isinstance(other, Ket):
            if self.total_dim != other.total_dim:
                raise DimensionMismatch("operator and ket dimensions differ")
            return np.asarray(self.matrix @ other.amplitudes)
        return NotImplemented

    def _check_same_space(self, other: "Operator") -> None:
        if self.total_dim != other.total_dim:
            raise DimensionMismatch(
                f"operators act on different spaces: {self.total_dim} vs {other.total_dim}"
            )

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        m = self.matrix
        return bool(np.max(np.abs(m - m.conj().T)) <= tol * max(1.0, np.max(np.abs(m))))


@dataclass(frozen=True)
class Ket:
    """Normalized pure state vector on a truncated Fock space."""

    dims: tuple[FockDim, ...]
    amplitudes: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dims", _as_dims(self.dims))
        object.__setattr__(self, "amplitudes", _freeze(self.amplitudes))
        if self.amplitudes.shape != (self.total_dim,):
            raise DimensionMismatch(
                f"amplitude vector of length {self.amplitudes.shape} does not match "
                f"mode dims {tuple(d.n_max for d in self.dims)}"
            )
        norm = np.linalg.norm(self.amplitudes)
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"ket norm {norm!r} deviates from 1 by more than 1e-12")

    @property
    def total_dim(self) -> int:
        return int(np.prod([d.n_max for d in self.dims]))

    def overlap(self, other: "Ket") -> complex:
        """<self|other>."""
        if self.total_dim != other.total_dim:
            raise DimensionMismatch("kets live on different spaces")
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def projector(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())


def normalized_ket(dims, amplitudes: np.ndarray) -> Ket:
    """Ket from an unnormalized amplitude vector."""
    amplitudes = np.asarray(amplitudes, dtype=complex)
    norm = np.linalg.norm(amplitudes)
    if norm == 0.0:
        raise ValueError("cannot normalize the zero vector")
    return Ket(dims, amplitudes / norm)


@dataclass(frozen=True)
class CatSpec:
    """Cat-state specification: amplitude, component count, parity index.

    index is +1/-1 (even/odd) for two-component cats and 0..3 (photon number
    modulo 4) for four-component cats.
    """

    alpha: complex
    components: int = 2
    index: int = 1

    def __post_init__(self):
        if self.components not in (2, 4):
            raise ValueError("components must be 2 or 4")
        if self.components == 2 and self.index not in (1, -1):
            raise ValueError("two-component cats take index +1 or -1")
        if self.components == 4 and self.index not in (0, 1, 2, 3):
            raise ValueError("four-component cats take index 0..3")
        if abs(self.alpha) == 0.0:
            raise ValueError("cat amplitude must be nonzero")


# ---------------------------------------------------------------------------
# operator constructors
# ---------------------------------------------------------------------------

def annihilation(dim: FockDim) -> Operator:
    """Ladder operator a with <n-1|a|n> = sqrt(n)."""
    n = dim.n_max
    return Operator((dim,), np.diag(np.sqrt(np.arange(1, n, dtype=float)), 1))


def creation(dim: FockDim) -> Operator:
    return annihilation(dim).dag


def number(dim: FockDim) -> Operator:
    return Operator((dim,), np.diag(np.arange(dim.n_max, dtype=float)))


def identity(dim: FockDim) -> Operator:
    return Operator((dim,), np.eye(dim.n_max))


def parity(dim: FockDim) -> Operator:
    """Photon-number parity exp(i pi a^+ a): diagonal (-1)^n."""
    return Operator((dim,), np.diag((-1.0) ** np.arange(dim.n_max)))


def displacement(beta: complex, dim: FockDim) -> Operator:
    """D(beta) = exp(beta a^+ - beta* a) by scaling-and-squaring expm."""
    a = annihilation(dim).matrix
    return Operator((dim,), expm(beta * a.conj().T - np.conj(beta) * a))


# ---------------------------------------------------------------------------
# state constructors
# ---------------------------------------------------------------------------

def fock(n: int, dim: FockDim) -> Ket:
    if not 0 <= n < dim.n_max:
        raise ValueError(f"Fock level {n} outside truncation {dim.n_max}")
    amps = np.zeros(dim.n_max, dtype=complex)
    amps[n] = 1.0
    return Ket((dim,), amps)


def coherent(alpha: complex, dim: FockDim, tail_limit: float = TAIL_WEIGHT_LIMIT) -> Ket:
    """Coherent state c_n = e^{-|a|^2/2} a^n / sqrt(n!), renormalized.

    Amplitudes are accumulated in log space so large |alpha| cannot overflow
    before the truncation check rejects it.  `tail_limit` loosens the
    adequacy gate for runs that carry an explicit truncation waiver.
    """
    dim.check_adequate(alpha, tail_limit)
    n = np.arange(dim.n_max)
    if alpha == 0:
        return fock(0, dim)
    log_mag = -abs(alpha) ** 2 / 2.0 + n * math.log(abs(alpha)) - 0.5 * np.cumsum(
        np.concatenate(([0.0], np.log(np.arange(1, dim.n_max))))
    )
    phase = np.exp(1j * n * np.angle(alpha))
    amps = np.exp(log_mag) * phase
    return normalized_ket((dim,), amps)


def cat(spec: CatSpec, dim: FockDim, tail_limit: float = TAIL_WEIGHT_LIMIT) -> Ket:
    """Two- or four-component cat state.

    Four-component cats follow the photon-number-mod-4 classification: index
    mu selects Fock support on n = mu (mod 4).
    """
    a = spec.alpha
    dim.check_adequate(a, tail_limit)
    if spec.components == 2:
        amps = coherent(a, dim, tail_limit).amplitudes \
            + spec.index * coherent(-a, dim, tail_limit).amplitudes
        return normalized_ket((dim,), amps)
    plus_a = cat(CatSpec(a, 2, +1), dim, tail_limit).amplitudes
    plus_ia = cat(CatSpec(1j * a, 2, +1), dim, tail_limit).amplitudes
    minus_a = cat(CatSpec(a, 2, -1), dim, tail_limit).amplitudes
    minus_ia = cat(CatSpec(1j * a, 2, -1), dim, tail_limit).amplitudes
    combos = {
        0: plus_a + plus_ia,
        1: minus_a - 1j * minus_ia,
        2: plus_a - plus_ia,
        3: minus_a + 1j * minus_ia,
    }
    return normalized_ket((dim,), combos[spec.index])


# ---------------------------------------------------------------------------
# composition
# ---------------------------------------------------------------------------

def tensor(a, b):
    """Kronecker product of two one-mode objects, mode 1 as the slow index."""
    if isinstance(a, Operator) and isinstance(b, Operator):
        return Operator(a.dims + b.dims, np.kron(a.matrix, b.matrix))
    if isinstance(a, Ket) and isinstance(b, Ket):
        return Ket(a.dims + b.dims, np.kron(a.amplitudes, b.amplitudes))
    raise TypeError("tensor expects two Operators or two Kets")
