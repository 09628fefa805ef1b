"""Error models for the simulated NMR sensor.

Per-slice relaxation is applied as phase damping (T2) followed by
generalized amplitude damping (T1), each qubit in turn. Pulse fluctuation,
initial-state imperfection and readout noise are independent toggles on
:class:`NoiseModel`.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from .encoding import ControlGrid
from .qcore import CMatrix, embed, fidelity, n_qubits_of

KRAUS_TOL = 1e-12


@dataclass(frozen=True)
class RelaxationParams:
    """Per-qubit T1/T2 in seconds and the GAD bath polarization ``gad_p``."""

    t1: tuple[float, ...] = (18.5, 9.9)
    t2: tuple[float, ...] = (0.3, 3.3)
    gad_p: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "t1", tuple(float(x) for x in self.t1))
        object.__setattr__(self, "t2", tuple(float(x) for x in self.t2))
        if len(self.t1) != len(self.t2):
            raise ValueError("t1 and t2 need one entry per qubit")
        if any(t <= 0 for t in self.t1 + self.t2):
            raise ValueError("relaxation times must be positive")
        if not 0.0 <= self.gad_p <= 1.0:
            raise ValueError("gad_p must lie in [0, 1]")


@dataclass(frozen=True)
class NoiseModel:
    """Which error sources are on. ``None`` disables a source."""

    relaxation: RelaxationParams | None = None
    pulse_fluctuation: float | None = None
    initial_state_fidelity: float | None = None
    readout_sigma: float | None = None

    def __post_init__(self):
        if self.pulse_fluctuation is not None and not 0.0 <= self.pulse_fluctuation <= 1.0:
            raise ValueError("pulse_fluctuation must lie in [0, 1]")
        if self.initial_state_fidelity is not None and not 0.0 < self.initial_state_fidelity <= 1.0:
            raise ValueError("initial_state_fidelity must lie in (0, 1]")
        if self.readout_sigma is not None and self.readout_sigma < 0:
            raise ValueError("readout_sigma must be non-negative")

    @classmethod
    def reference(cls) -> "NoiseModel":
        """All four error sources at the chloroform experiment's levels."""
        return cls(RelaxationParams(), 0.05, 0.9986, 1e-4)

    @property
    def is_noiseless(self) -> bool:
        return (
            self.relaxation is None
            and not self.pulse_fluctuation
            and (self.initial_state_fidelity is None or self.initial_state_fidelity == 1.0)
            and not self.readout_sigma
        )

    def only(self, *names: str) -> "NoiseModel":
        """Copy keeping only the named sources."""
        kept = {n: getattr(self, n) for n in names}
        return replace(NoiseModel(), **kept)


def phase_damping_probability(dt: float, t2: float) -> float:
    return 0.5 * (1.0 - np.exp(-dt / t2))


def gad_eta(dt: float, t1: float) -> float:
    return -np.expm1(-dt / t1)


def gad_kraus(eta: float, p: float) -> list[np.ndarray]:
    """Single-qubit Kraus operators E0..E3 of generalized amplitude damping."""
    a, b = np.sqrt(1.0 - eta), np.sqrt(eta)
    return [
        np.sqrt(p) * np.array([[1, 0], [0, a]], dtype=complex),
        np.sqrt(1 - p) * np.array([[0, 0], [b, 0]], dtype=complex),
        np.sqrt(1 - p) * np.array([[a, 0], [0, 1]], dtype=complex),
        np.sqrt(p) * np.array([[0, b], [0, 0]], dtype=complex),
    ]


def kraus_completeness_error(ops) -> float:
    s = sum(e.conj().T @ e for e in ops)
    return float(np.max(np.abs(s - np.eye(s.shape[0]))))


def apply_kraus(rho: CMatrix, ops) -> CMatrix:
    return sum(e @ rho @ e.conj().T for e in ops)


def _check_qubits(rho: CMatrix, params: RelaxationParams) -> int:
    n = n_qubits_of(rho)
    if len(params.t1) < n:
        raise ValueError(f"relaxation parameters cover {len(params.t1)} qubits, state has {n}")
    return n


def phase_damping(rho: CMatrix, dt: float, params: RelaxationParams) -> CMatrix:
    """Dephase each qubit in turn: rho -> (1-p_i) rho + p_i Z_i rho Z_i."""
    n = _check_qubits(rho, params)
    for i in range(n):
        p = phase_damping_probability(dt, params.t2[i])
        # Z_i is diagonal, so Z_i rho Z_i is an elementwise sign flip
        z = np.diag(embed(np.diag([1.0, -1.0]), i, n)).real
        rho = (1.0 - p) * rho + p * (z[:, None] * rho * z[None, :])
    return rho


def generalized_amplitude_damping(rho: CMatrix, dt: float, params: RelaxationParams) -> CMatrix:
    n = _check_qubits(rho, params)
    for i in range(n):
        ops = gad_kraus(gad_eta(dt, params.t1[i]), params.gad_p)
        if kraus_completeness_error(ops) > KRAUS_TOL:
            raise ArithmeticError("GAD Kraus operators are not trace preserving")
        rho = apply_kraus(rho, [embed(e, i, n) for e in ops])
    return rho


def relax(rho: CMatrix, dt: float, params: RelaxationParams) -> CMatrix:
    """One slice worth of decoherence: PD on every qubit, then GAD on every qubit."""
    return generalized_amplitude_damping(phase_damping(rho, dt, params), dt, params)


@lru_cache(maxsize=64)
def relaxation_superoperator(n_qubits: int, dt: float, params: RelaxationParams) -> np.ndarray:
    """Matrix S with vec(relax(rho)) = S @ vec(rho), row-major vec.

    Built by pushing every matrix unit through :func:`relax`, so it is the
    same channel; the sensor uses it to avoid re-embedding Kraus operators
    on every slice.
    """
    d = 2**n_qubits
    cols = []
    for idx in range(d * d):
        unit = np.zeros(d * d, dtype=complex)
        unit[idx] = 1.0
        cols.append(relax(unit.reshape(d, d), dt, params).ravel())
    out = np.stack(cols, axis=1)
    out.setflags(write=False)
    return out


def perturb_controls(u: ControlGrid, fraction: float, rng: np.random.Generator) -> ControlGrid:
    """Scale each amplitude by an independent factor 1 + Uniform(-fraction, fraction)."""
    if fraction < 0:
        raise ValueError("fraction must be non-negative")
    if fraction == 0:
        return u
    delta = rng.uniform(-fraction, fraction, size=u.amplitudes.shape)
    return u.replace(u.amplitudes * (1.0 + delta))


def _depolarize(target: CMatrix, eps: float) -> CMatrix:
    d = target.shape[0]
    return (1.0 - eps) * target + eps * np.eye(d) / d


def imperfect_initial_state(target: CMatrix, fidelity_target: float) -> CMatrix:
    """Mix ``target`` with the maximally mixed state down to a given overlap fidelity.

    Solves for the mixing weight with a bracketing root finder; the
    normalized overlap decreases monotonically from 1 at zero mixing to
    ``1/sqrt(d)`` at full mixing for a pure target.
    """
    if not 0.0 < fidelity_target <= 1.0:
        raise ValueError("fidelity_target must lie in (0, 1]")
    if fidelity_target == 1.0:
        return np.array(target, dtype=complex)
    floor = fidelity(target, np.eye(target.shape[0]) / target.shape[0])
    if fidelity_target <= floor:
        raise ValueError(f"fidelity {fidelity_target} unreachable by depolarizing (floor {floor:.4f})")
    eps = brentq(lambda e: fidelity(target, _depolarize(target, e)) - fidelity_target, 0.0, 1.0, xtol=1e-15)
    return _depolarize(target, eps)


def readout_noise(values, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Add i.i.d. zero-mean Gaussian noise of standard deviation ``sigma``."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    values = np.asarray(values, dtype=float)
    if sigma == 0:
        return values.copy()
    return values + rng.normal(0.0, sigma, size=values.shape)
