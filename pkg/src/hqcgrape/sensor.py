"""Simulated quantum sensor: prepare, evolve under controls with noise, measure.

The closed-loop optimizer talks to the device only through :class:`Sensor`.
Each instance owns a seeded random stream and counts every evolution it
runs, so the cost of a gradient (2KM evolutions) can be checked exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import metrology
from .encoding import ControlGrid, EncodingHamiltonian, control_specs, local_rotation, slice_propagators
from .noise import NoiseModel, imperfect_initial_state, perturb_controls, readout_noise, relaxation_superoperator
from .qcore import CMatrix, check_density_matrix, ket, pure_state


class Insertion(NamedTuple):
    """Instantaneous rotation exp(-i sign pi/4 sigma_axis) on ``qubit`` after slice ``after`` (1-based)."""

    qubit: int
    axis: str
    sign: int
    after: int


@dataclass(frozen=True)
class SensorConfig:
    hamiltonian: EncodingHamiltonian
    control_specs: list
    noise: NoiseModel = field(default_factory=NoiseModel)
    probe: CMatrix | None = field(default=None, repr=False)
    T: float = 9e-3
    M: int = 6

    def __post_init__(self):
        n = self.hamiltonian.n_qubits
        if self.probe is None:
            object.__setattr__(self, "probe", pure_state(ket("0" * n)))
        check_density_matrix(self.probe)
        if self.probe.shape[0] != 2**n:
            raise ValueError("probe dimension does not match the Hamiltonian")
        if any(s.qubit >= n for s in self.control_specs):
            raise ValueError("control acts on a qubit outside the register")
        dh = self.hamiltonian.dh0_domega
        if np.max(np.abs(dh - np.diag(np.diag(dh)))) > 0:
            raise ValueError("the sensor reads populations only; dH0/domega must be diagonal")
        if self.M < 1 or self.T < 0:
            raise ValueError("need M >= 1 and T >= 0")

    @classmethod
    def reference(cls, noise: NoiseModel | None = None, **overrides) -> "SensorConfig":
        """Two-spin chloroform preset: omega = 2 pi 50 Hz, J = 214.5 Hz, T = 9 ms, M = 6."""
        H = EncodingHamiltonian.reference()
        kw = dict(hamiltonian=H, control_specs=control_specs(2), noise=noise or NoiseModel(), T=9e-3, M=6)
        kw.update(overrides)
        return cls(**kw)

    @property
    def K(self) -> int:
        return len(self.control_specs)

    def noiseless(self) -> "SensorConfig":
        return SensorConfig(self.hamiltonian, self.control_specs, NoiseModel(), self.probe, self.T, self.M)

    def with_noise(self, noise: NoiseModel) -> "SensorConfig":
        return SensorConfig(self.hamiltonian, self.control_specs, noise, self.probe, self.T, self.M)


@dataclass(frozen=True)
class MeasurementRecord:
    """Measured populations and the QFI computed from them.

    ``populations`` holds the noisy readout of the basis states that carry
    generator weight (for two spins: ``|00>`` then ``|11>``).
    """

    populations: np.ndarray
    qfi_normalized: float
    evolutions_used: int

    @property
    def p00(self) -> float:
        return float(self.populations[0])

    @property
    def p11(self) -> float:
        return float(self.populations[-1])


class Sensor:
    """One simulated device with its own random stream and evolution counter."""

    def __init__(self, config: SensorConfig, seed=None):
        self.config = config
        self.rng = np.random.default_rng(seed)
        self.evolutions_used = 0
        weights = np.real(np.diag(config.hamiltonian.dh0_domega))
        self._readout_index = np.flatnonzero(np.abs(weights) > 0)
        self.generator_weights = weights[self._readout_index]
        self._probe = self._prepare()

    def clone(self, seed) -> "Sensor":
        return Sensor(self.config, seed)

    def _prepare(self) -> CMatrix:
        f = self.config.noise.initial_state_fidelity
        if f is None or f == 1.0:
            return np.array(self.config.probe, dtype=complex)
        return imperfect_initial_state(self.config.probe, f)

    def prepare(self) -> CMatrix:
        """Initial state as the device produces it (the PPS identity part is dropped)."""
        return self._probe.copy()

    def evolve(self, u: ControlGrid, insertion: Insertion | list[Insertion] | None = None) -> CMatrix:
        """Run one experiment and return the final density matrix."""
        cfg = self.config
        noise = cfg.noise
        if u.K != cfg.K:
            raise ValueError(f"grid has K={u.K}, sensor expects {cfg.K}")
        inserts = [] if insertion is None else [insertion] if isinstance(insertion, Insertion) else list(insertion)
        for ins in inserts:
            if not 1 <= ins.after <= u.M:
                raise IndexError(f"insertion after slice {ins.after} outside 1..{u.M}")
            if ins.sign not in (-1, 1):
                raise ValueError("insertion sign must be +1 or -1")
        self.evolutions_used += 1
        if noise.pulse_fluctuation:
            u = perturb_controls(u, noise.pulse_fluctuation, self.rng)
        props = slice_propagators(cfg.hamiltonian, cfg.control_specs, u)
        n = cfg.hamiltonian.n_qubits
        d = 2**n
        channel = None if noise.relaxation is None else relaxation_superoperator(n, u.dt, noise.relaxation)
        rho = self._probe
        for m in range(1, u.M + 1):
            U = props[m - 1]
            rho = U @ rho @ U.conj().T
            if channel is not None:
                rho = (channel @ rho.ravel()).reshape(d, d)
            for ins in inserts:
                if ins.after == m:
                    R = local_rotation(ins.qubit, ins.axis, ins.sign * np.pi / 2, n)
                    rho = R @ rho @ R.conj().T
        return rho

    def measure_populations(self, rho: CMatrix) -> np.ndarray:
        """Read the generator-weighted basis populations, with readout noise, clamped to [0, 1]."""
        p = np.real(np.diag(rho))[self._readout_index]
        sigma = self.config.noise.readout_sigma
        if sigma:
            p = readout_noise(p, sigma, self.rng)
        return np.clip(p, 0.0, 1.0)

    def measure_diagonals(self, rho: CMatrix) -> tuple[float, float]:
        """(<00|rho|00>, <11|rho|11>) for the two-spin register."""
        if self.config.hamiltonian.n_qubits != 2:
            raise ValueError("measure_diagonals is the two-qubit readout; use measure_populations")
        p = self.measure_populations(rho)
        return float(p[0]), float(p[-1])

    def measure_qfi(self, u: ControlGrid) -> MeasurementRecord:
        p = self.measure_populations(self.evolve(u))
        value = metrology.qfi_from_populations(p, self.generator_weights)
        return MeasurementRecord(p, value, self.evolutions_used)

    def measure_gradient(self, u: ControlGrid, reference: MeasurementRecord | None = None) -> np.ndarray:
        return metrology.rotation_insertion_gradient(self, u, reference)
