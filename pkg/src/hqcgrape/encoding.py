"""Encoding Hamiltonian, control Hamiltonians and piecewise-constant propagators.

Slice indices in this module are 1-based to match the usual GRAPE notation:
slice ``m`` covers ``((m-1) dt, m dt]`` and ``window_propagator(m1, m2)`` is the
ordered product ``E[m2] ... E[m1+1] E[m1]``. Amplitude arrays are ordinary
0-based numpy arrays of shape ``(K, M)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .qcore import CMatrix, embed, expm_unitary, is_hermitian, pauli

TWO_PI = 2.0 * np.pi
#: Default amplitude bound, rad/s (a typical NMR nutation rate).
DEFAULT_AMPLITUDE_BOUND = TWO_PI * 250.0


@dataclass(frozen=True)
class EncodingHamiltonian:
    """Drift Hamiltonian H0(omega) together with its omega-derivative."""

    n_qubits: int
    omega: float
    coupling_j: float
    h0: CMatrix = field(repr=False)
    dh0_domega: CMatrix = field(repr=False)

    def __post_init__(self):
        d = 2**self.n_qubits
        for name in ("h0", "dh0_domega"):
            m = getattr(self, name)
            if m.shape != (d, d):
                raise ValueError(f"{name} has shape {m.shape}, expected {(d, d)}")
            if not is_hermitian(m, 1e-12 * max(1.0, float(np.abs(m).max()))):
                raise ValueError(f"{name} is not Hermitian")

    @classmethod
    def reference(cls, omega: float = TWO_PI * 50.0, coupling_j: float = 214.5) -> "EncodingHamiltonian":
        """Two spins with equal offsets and a scalar coupling.

        ``H0 = omega (Z1 + Z2)/2 + pi J Z1 Z2 / 2`` with ``J`` in Hz and
        ``omega`` in rad/s.
        """
        z1 = embed(pauli("z"), 0, 2)
        z2 = embed(pauli("z"), 1, 2)
        dh = 0.5 * (z1 + z2)
        h0 = omega * dh + 0.5 * np.pi * coupling_j * (z1 @ z2)
        return cls(2, float(omega), float(coupling_j), h0, dh)

    @classmethod
    def spin_chain(cls, n_qubits: int, omega: float, coupling_j: float) -> "EncodingHamiltonian":
        """``omega sum_i Z_i / 2 + pi J sum_i Z_i Z_{i+1} / 2``; equals :meth:`reference` for two spins."""
        if n_qubits < 1:
            raise ValueError("need at least one qubit")
        zs = [embed(pauli("z"), i, n_qubits) for i in range(n_qubits)]
        dh = 0.5 * sum(zs)
        h0 = omega * dh
        for i in range(n_qubits - 1):
            h0 = h0 + 0.5 * np.pi * coupling_j * (zs[i] @ zs[i + 1])
        return cls(n_qubits, float(omega), float(coupling_j), h0, dh)

    def with_omega(self, omega: float) -> "EncodingHamiltonian":
        """Same system at a different parameter value (H0 is affine in omega)."""
        h0 = self.h0 + (omega - self.omega) * self.dh0_domega
        return EncodingHamiltonian(self.n_qubits, float(omega), self.coupling_j, h0, self.dh0_domega)


@dataclass(frozen=True)
class ControlHamiltonianSpec:
    qubit: int
    axis: str
    matrix: CMatrix = field(repr=False, compare=False)

    @classmethod
    def make(cls, qubit: int, axis: str, n_qubits: int) -> "ControlHamiltonianSpec":
        return cls(qubit, axis, embed(pauli(axis), qubit, n_qubits))

    @property
    def label(self) -> str:
        return f"q{self.qubit}{self.axis}"


def control_specs(n_qubits: int, axes=("x", "y")) -> list[ControlHamiltonianSpec]:
    """Controls ordered qubit-major: q0x, q0y, q1x, q1y, ..."""
    return [ControlHamiltonianSpec.make(q, a, n_qubits) for q in range(n_qubits) for a in axes]


@dataclass(frozen=True)
class ControlGrid:
    """Piecewise-constant control amplitudes (rad/s), shape ``(K, M)``, over total time ``T``."""

    amplitudes: NDArray[np.float64]
    T: float

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=float)
        if amps.ndim != 2:
            raise ValueError(f"amplitudes must be 2-D (K, M), got shape {amps.shape}")
        if amps.shape[1] < 1:
            raise ValueError("need at least one slice")
        if not np.all(np.isfinite(amps)):
            raise ValueError("amplitudes must be finite")
        if self.T < 0:
            raise ValueError("total time must be non-negative")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "T", float(self.T))

    @property
    def K(self) -> int:
        return self.amplitudes.shape[0]

    @property
    def M(self) -> int:
        return self.amplitudes.shape[1]

    @property
    def dt(self) -> float:
        return self.T / self.M

    @classmethod
    def zeros(cls, K: int, M: int, T: float) -> "ControlGrid":
        return cls(np.zeros((K, M)), T)

    def replace(self, amplitudes) -> "ControlGrid":
        return ControlGrid(amplitudes, self.T)

    def clipped(self, bound: float) -> "ControlGrid":
        return self.replace(np.clip(self.amplitudes, -bound, bound))

    def refined(self, factor: int) -> "ControlGrid":
        """Same physical pulse on ``factor`` times as many slices."""
        return self.replace(np.repeat(self.amplitudes, factor, axis=1))


def _generators(H: EncodingHamiltonian, specs, u: ControlGrid) -> NDArray[np.complex128]:
    if len(specs) != u.K:
        raise ValueError(f"{len(specs)} control Hamiltonians but grid has K={u.K}")
    ctrl = np.stack([s.matrix for s in specs])  # (K, d, d)
    return H.h0[None] + np.einsum("km,kab->mab", u.amplitudes, ctrl)


def slice_propagators(H: EncodingHamiltonian, specs, u: ControlGrid) -> NDArray[np.complex128]:
    """All M slice unitaries, stacked as ``(M, d, d)``; entry ``m-1`` is slice ``m``."""
    gens = _generators(H, specs, u)
    w, v = np.linalg.eigh(gens)
    phases = np.exp(-1j * u.dt * w)
    return np.einsum("mab,mb,mcb->mac", v, phases, v.conj())


def slice_propagator(H: EncodingHamiltonian, specs, u: ControlGrid, m: int) -> CMatrix:
    """exp{-i dt [H0 + sum_k u_k[m] H_k]} for the 1-based slice ``m``."""
    if not 1 <= m <= u.M:
        raise IndexError(f"slice {m} outside 1..{u.M}")
    gen = H.h0 + sum(u.amplitudes[k, m - 1] * s.matrix for k, s in enumerate(specs))
    return expm_unitary(gen, u.dt)


def window_propagator(props: NDArray[np.complex128], m1: int, m2: int) -> CMatrix:
    """Ordered product of slices ``m1..m2`` (1-based, inclusive), later slices on the left.

    ``props`` is the output of :func:`slice_propagators`. An empty window
    (``m1 == m2 + 1``) gives the identity.
    """
    M = props.shape[0]
    if not (1 <= m1 <= m2 + 1 and m2 <= M and m2 >= 0):
        raise IndexError(f"invalid window ({m1}, {m2}) for M={M}")
    out = np.eye(props.shape[1], dtype=complex)
    for m in range(m1, m2 + 1):
        out = props[m - 1] @ out
    return out


def total_propagator(H: EncodingHamiltonian, specs, u: ControlGrid) -> CMatrix:
    return window_propagator(slice_propagators(H, specs, u), 1, u.M)


def local_rotation(qubit: int, axis: str, angle: float, n_qubits: int) -> CMatrix:
    """embed(exp(-i angle sigma/2), qubit, n)."""
    s = pauli(axis)
    r = np.cos(angle / 2) * np.eye(2) - 1j * np.sin(angle / 2) * s
    return embed(r, qubit, n_qubits)


def evolve_unitary(H: EncodingHamiltonian, specs, u: ControlGrid, rho0: CMatrix) -> CMatrix:
    """Noiseless final state, conjugating slice by slice like the device does."""
    rho = np.asarray(rho0, dtype=complex)
    for U in slice_propagators(H, specs, u):
        rho = U @ rho @ U.conj().T
    return rho
