"""Quantum Fisher information and its gradient with respect to control amplitudes.

QFI here is the variance form ``4 T^2 Var(dH0/domega)``. Two numbers are kept:
``raw`` with the ``4 T^2`` prefactor (units s^2) and ``normalized = 4 Var(dH0/domega)``,
which for the two-spin system equals ``Var(Z1 + Z2)`` and is 4 for a NOON state.
Optimizers ascend the normalized value and every gradient returned here is
its derivative; multiply by ``T**2`` for the raw-unit gradient.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.typing import NDArray

from .encoding import ControlGrid, EncodingHamiltonian, slice_propagators
from .qcore import CMatrix, is_hermitian, n_qubits_of, purity

PROB_TOL = 1e-6


@dataclass(frozen=True)
class QfiValue:
    raw: float
    normalized: float


def _expect(rho: CMatrix, op: CMatrix) -> float:
    return float(np.real(np.einsum("ij,ji->", rho, op)))


def qfi(rho: CMatrix, dh: CMatrix, T: float) -> QfiValue:
    """Variance-form QFI of ``rho`` for generator ``dh`` over encoding time ``T``."""
    if not is_hermitian(dh):
        raise ValueError("generator must be Hermitian")
    var = _expect(rho, dh @ dh) - _expect(rho, dh) ** 2
    return QfiValue(raw=4.0 * T**2 * var, normalized=4.0 * var)


def qfi_from_populations(populations, generator_diag) -> float:
    """Normalized QFI from computational-basis populations for a diagonal generator."""
    p = np.asarray(populations, dtype=float)
    d = np.asarray(generator_diag, dtype=float)
    return 4.0 * (float(p @ (d * d)) - float(p @ d) ** 2)


def qfi_from_diagonals(p00: float, p11: float, T: float | None = None) -> QfiValue:
    """Two-spin shortcut: only <00|rho|00> and <11|rho|11> enter the QFI.

    ``T`` is only needed for the raw value; it defaults to NaN when omitted.
    """
    if min(p00, p11) < -PROB_TOL or max(p00, p11) > 1 + PROB_TOL or p00 + p11 > 1 + PROB_TOL:
        raise ValueError(f"populations out of range: p00={p00}, p11={p11}")
    normalized = 4.0 * (p00 + p11) - 4.0 * (p00 - p11) ** 2
    raw = normalized * T**2 if T is not None else float("nan")
    return QfiValue(raw=raw, normalized=normalized)


def qfi_gradient_from_derivative(drho: CMatrix, rho: CMatrix, dh: CMatrix) -> float:
    """d(normalized QFI) given d(rho); linear in ``drho``."""
    return 4.0 * (_expect(drho, dh @ dh) - 2.0 * _expect(drho, dh) * _expect(rho, dh))


def analytic_gradient(
    H: EncodingHamiltonian,
    specs,
    u: ControlGrid,
    rho0: CMatrix,
    dh: CMatrix | None = None,
) -> NDArray[np.float64]:
    """Closed-form GRAPE gradient of the normalized QFI, shape ``(K, M)``.

    Uses the first-order slice derivative
    ``d rho(T)/d u_k[m] = -i dt U_{m+1}^M [H_k, rho_m] U_{m+1}^M^dagger``, with
    ``rho_m`` the state after slice ``m``. The observable side is propagated
    backwards in the Heisenberg picture, so the cost is O(KM) matrix products.
    """
    dh = H.dh0_domega if dh is None else dh
    props = slice_propagators(H, specs, u)
    M, d = props.shape[0], props.shape[1]

    forward = np.empty((M, d, d), dtype=complex)
    rho = rho0
    for m in range(M):
        rho = props[m] @ rho @ props[m].conj().T
        forward[m] = rho
    rho_T = rho

    obs1 = dh @ dh
    obs2 = dh
    mean_dh = _expect(rho_T, dh)
    back1 = np.empty_like(forward)
    back2 = np.empty_like(forward)
    o1, o2 = obs1.astype(complex), obs2.astype(complex)
    for m in range(M - 1, -1, -1):
        back1[m], back2[m] = o1, o2
        o1 = props[m].conj().T @ o1 @ props[m]
        o2 = props[m].conj().T @ o2 @ props[m]

    grad = np.empty((len(specs), M))
    for k, spec in enumerate(specs):
        s = spec.matrix
        for m in range(M):
            comm = s @ forward[m] - forward[m] @ s
            drho_tr1 = -1j * u.dt * np.einsum("ij,ji->", comm, back1[m])
            drho_tr2 = -1j * u.dt * np.einsum("ij,ji->", comm, back2[m])
            grad[k, m] = 4.0 * (drho_tr1.real - 2.0 * drho_tr2.real * mean_dh)
    return grad


def rotation_insertion_gradient(sensor, u: ControlGrid, reference=None) -> NDArray[np.float64]:
    """Gradient of the normalized QFI measured by inserting +-pi/2 rotations.

    For every control (qubit k, axis a) and slice m the sensor runs the
    full sequence twice with ``R_a^k(+pi/2)`` and ``R_a^k(-pi/2)`` inserted
    after slice m; the population difference of the two runs is
    ``(rho+ - rho-) = d rho / d u_k[m] / dt``. That costs 2KM evolutions.

    ``reference`` is a :class:`~hqcgrape.sensor.MeasurementRecord` of the
    unperturbed sequence; when omitted one extra evolution measures it.
    """
    from .sensor import Insertion  # local import: sensor depends on this module

    if reference is None:
        reference = sensor.measure_qfi(u)
    weights = sensor.generator_weights
    mean = float(reference.populations @ weights)
    K, M = u.K, u.M
    grad = np.zeros((K, M))
    for k, spec in enumerate(sensor.config.control_specs):
        for m in range(1, M + 1):
            plus = sensor.measure_populations(sensor.evolve(u, Insertion(spec.qubit, spec.axis, +1, m)))
            minus = sensor.measure_populations(sensor.evolve(u, Insertion(spec.qubit, spec.axis, -1, m)))
            dp = u.dt * (plus - minus)
            grad[k, m - 1] = 4.0 * (float(dp @ weights**2) - 2.0 * float(dp @ weights) * mean)
    return grad


def finite_difference_gradient(
    objective: Callable[[ControlGrid], float], u: ControlGrid, step: float = 1e-4
) -> NDArray[np.float64]:
    """Central differences of ``objective`` in every amplitude."""
    if step <= 0:
        raise ValueError("step must be positive")
    base = u.amplitudes
    grad = np.zeros_like(base)
    for idx in np.ndindex(base.shape):
        up = base.copy()
        dn = base.copy()
        up[idx] += step
        dn[idx] -= step
        grad[idx] = (objective(u.replace(up)) - objective(u.replace(dn))) / (2.0 * step)
    return grad


def noon_fidelity(rho: CMatrix) -> float:
    """Best normalized overlap with (|00>+e^{i phi}|11>)/sqrt(2) over phi.

    The phase enters only through ``Re(e^{i phi} rho[3, 0])``, so the
    maximum is ``(rho00 + rho33)/2 + |rho03|``; the NOON state is pure.
    """
    if n_qubits_of(rho) != 2:
        raise ValueError("noon_fidelity is defined for two-qubit states")
    overlap = 0.5 * (rho[0, 0].real + rho[3, 3].real) + abs(rho[0, 3])
    return float(overlap / np.sqrt(purity(rho)))
