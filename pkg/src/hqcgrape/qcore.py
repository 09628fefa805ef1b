"""Dense linear algebra and state primitives for small qubit registers."""

from __future__ import annotations

import numpy as np
from numpy.typing import NDArray

CMatrix = NDArray[np.complex128]

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_TOL = 1e-9

_PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def pauli(axis: str) -> CMatrix:
    """Return the 2x2 Pauli matrix for ``axis`` in {x, y, z}."""
    try:
        return _PAULI[axis].copy()
    except KeyError:
        raise ValueError(f"unknown Pauli axis {axis!r}") from None


def embed(op: CMatrix, qubit: int, n: int) -> CMatrix:
    """Place a single-qubit operator on ``qubit`` of an ``n``-qubit register.

    Qubit 0 is the leftmost (most significant) tensor factor, so
    ``embed(Z, 0, 2) == diag(1, 1, -1, -1)``.
    """
    if not 0 <= qubit < n:
        raise IndexError(f"qubit {qubit} out of range for {n} qubits")
    op = np.asarray(op, dtype=complex)
    if op.shape != (2, 2):
        raise ValueError("embed expects a 2x2 operator")
    left = np.eye(2**qubit, dtype=complex)
    right = np.eye(2 ** (n - qubit - 1), dtype=complex)
    return np.kron(np.kron(left, op), right)


def is_hermitian(a: CMatrix, tol: float = HERMITIAN_TOL) -> bool:
    return bool(np.max(np.abs(a - a.conj().T), initial=0.0) <= tol)


def expm_unitary(h: CMatrix, t: float) -> CMatrix:
    """exp(-i t H) for Hermitian H, via eigendecomposition."""
    h = np.asarray(h, dtype=complex)
    if not is_hermitian(h):
        raise ValueError("expm_unitary requires a Hermitian generator")
    h = 0.5 * (h + h.conj().T)
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * t * w)) @ v.conj().T


def dag(a: CMatrix) -> CMatrix:
    return a.conj().T


def ket(bits: str) -> NDArray[np.complex128]:
    """Computational basis ket, e.g. ``ket("01")``."""
    psi = np.zeros(2 ** len(bits), dtype=complex)
    psi[int(bits, 2)] = 1.0
    return psi


def pure_state(psi) -> CMatrix:
    psi = np.asarray(psi, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


def noon_state(phi: float = 0.0, n_qubits: int = 2) -> CMatrix:
    """(|0...0> + e^{i phi}|1...1>)/sqrt(2) as a density matrix."""
    d = 2**n_qubits
    psi = np.zeros(d, dtype=complex)
    psi[0] = 1.0
    psi[-1] = np.exp(1j * phi)
    return pure_state(psi)


def check_density_matrix(rho: CMatrix) -> None:
    """Raise ValueError if ``rho`` is not a unit-trace Hermitian PSD matrix."""
    rho = np.asarray(rho)
    d = rho.shape[0]
    if rho.shape != (d, d) or d & (d - 1):
        raise ValueError(f"density matrix must be square with power-of-two dim, got {rho.shape}")
    if abs(np.trace(rho) - 1.0) > TRACE_TOL:
        raise ValueError(f"trace {np.trace(rho).real:.3g} != 1")
    if not is_hermitian(rho):
        raise ValueError("density matrix is not Hermitian")
    if np.linalg.eigvalsh(0.5 * (rho + dag(rho)))[0] < -PSD_TOL:
        raise ValueError("density matrix has negative eigenvalues")


def n_qubits_of(a: CMatrix) -> int:
    d = a.shape[0]
    n = d.bit_length() - 1
    if 2**n != d:
        raise ValueError(f"dimension {d} is not a power of two")
    return n


def purity(rho: CMatrix) -> float:
    return float(np.real(np.trace(rho @ rho)))


def fidelity(a: CMatrix, b: CMatrix) -> float:
    """Normalized overlap Tr(ab) / sqrt(Tr(a^2) Tr(b^2)).

    This is the overlap measure used for tomography comparisons in NMR,
    not the Uhlmann fidelity. For pure states the two coincide up to the
    square root.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    pa, pb = purity(a), purity(b)
    if pa <= 0 or pb <= 0:
        raise ValueError("fidelity undefined for zero-purity input")
    return float(np.real(np.trace(a @ b)) / np.sqrt(pa * pb))


def random_pure_state(dim: int, rng: np.random.Generator) -> CMatrix:
    psi = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return pure_state(psi)


def random_density_matrix(dim: int, rng: np.random.Generator, rank: int | None = None) -> CMatrix:
    """Random mixed state from the Ginibre ensemble."""
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ dag(g)
    return rho / np.trace(rho).real


def random_hermitian(dim: int, rng: np.random.Generator, scale: float = 1.0) -> CMatrix:
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return scale * 0.5 * (a + dag(a))
