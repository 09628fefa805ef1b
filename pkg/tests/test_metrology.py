import numpy as np
import pytest

from hqcgrape import metrology as mt
from hqcgrape.encoding import ControlGrid, EncodingHamiltonian, control_specs, evolve_unitary
from hqcgrape.qcore import expm_unitary, ket, noon_state, pure_state, random_density_matrix, random_pure_state
from hqcgrape.sensor import Sensor, SensorConfig

T = 9e-3
H = EncodingHamiltonian.reference()
DH = H.dh0_domega
SPECS = control_specs(2)
RHO0 = pure_state(ket("00"))


def objective(u):
    return mt.qfi(evolve_unitary(H, SPECS, u, RHO0), DH, u.T).normalized


def test_qfi_noon_is_four_for_any_phase():
    for phi in np.linspace(0, 2 * np.pi, 9):
        q = mt.qfi(noon_state(phi), DH, T)
        assert q.normalized == pytest.approx(4.0, abs=1e-12)
        assert q.raw == pytest.approx(4.0 * T**2, rel=1e-12)


def test_qfi_examples():
    assert mt.qfi(RHO0, DH, T).normalized == pytest.approx(0.0, abs=1e-15)
    # populations 1/2 on |00> (Z1+Z2 = 2) and |01> (Z1+Z2 = 0): Tr[rho A^2] = 2, Tr[rho A] = 1
    assert mt.qfi(pure_state(ket("00") + ket("01")), DH, T).normalized == pytest.approx(1.0)


def test_qfi_rejects_non_hermitian():
    with pytest.raises(ValueError):
        mt.qfi(RHO0, np.triu(np.ones((4, 4))), T)


def test_qfi_from_diagonals():
    assert mt.qfi_from_diagonals(0.5, 0.5).normalized == pytest.approx(4.0)
    assert mt.qfi_from_diagonals(1.0, 0.0).normalized == pytest.approx(0.0)
    assert mt.qfi_from_diagonals(0.25, 0.25).normalized == pytest.approx(2.0)
    diag = np.diag([0.25, 0.3, 0.2, 0.25]).astype(complex)
    assert mt.qfi(diag, DH, T).normalized == pytest.approx(2.0)
    with pytest.raises(ValueError):
        mt.qfi_from_diagonals(0.8, 0.5)


def test_diagonal_shortcut_equals_full_formula(rng):
    for _ in range(200):
        rho = random_density_matrix(4, rng)
        full = mt.qfi(rho, DH, T)
        short = mt.qfi_from_diagonals(rho[0, 0].real, rho[3, 3].real, T)
        assert short.normalized == pytest.approx(full.normalized, abs=1e-12)
        assert short.raw == pytest.approx(full.raw, abs=1e-16)


def test_qfi_invariant_under_encoding_rotation(rng):
    for _ in range(200):
        rho = random_density_matrix(4, rng)
        V = expm_unitary(DH, rng.uniform(-10, 10))
        a = mt.qfi(rho, DH, T).normalized
        b = mt.qfi(V @ rho @ V.conj().T, DH, T).normalized
        assert a == pytest.approx(b, abs=1e-10)


def test_qfi_bounds_on_pure_states(rng):
    vals = [mt.qfi(random_pure_state(4, rng), DH, T).normalized for _ in range(10_000)]
    assert min(vals) >= 0.0
    assert max(vals) <= 4.0 + 1e-9


def test_analytic_gradient_at_zero_controls_matches_fd():
    u = ControlGrid.zeros(4, 6, T)
    ga = mt.analytic_gradient(H, SPECS, u, RHO0)
    gf = mt.finite_difference_gradient(objective, u, 1e-4)
    # |00> is stationary: populations move only at second order
    np.testing.assert_allclose(ga, 0.0, atol=1e-12)
    np.testing.assert_allclose(gf, 0.0, atol=1e-8)


def test_commuting_control_has_zero_gradient(rng):
    specs = control_specs(2, ("z",))
    u = ControlGrid(rng.uniform(-300, 300, (2, 6)), T)
    np.testing.assert_array_equal(mt.analytic_gradient(H, specs, u, RHO0), 0.0)


@pytest.mark.parametrize("M", [1, 3, 6])
def test_rotation_insertion_equals_analytic(rng, M):
    cfg = SensorConfig.reference(M=M)
    for _ in range(5):
        u = ControlGrid(rng.uniform(-1500, 1500, (4, M)), T)
        ga = mt.analytic_gradient(H, SPECS, u, RHO0)
        gr = mt.rotation_insertion_gradient(Sensor(cfg), u)
        assert np.max(np.abs(ga - gr)) <= 1e-9


def test_rotation_insertion_cost_and_zero_time(ideal_config):
    sensor = Sensor(ideal_config)
    u = ControlGrid(np.ones((4, 6)) * 100.0, T)
    mt.rotation_insertion_gradient(sensor, u)
    assert sensor.evolutions_used == 2 * 4 * 6 + 1
    g0 = mt.rotation_insertion_gradient(Sensor(ideal_config), ControlGrid(np.ones((4, 6)) * 100.0, 0.0))
    np.testing.assert_array_equal(g0, 0.0)


def test_fd_on_quadratic():
    target = np.arange(6.0).reshape(2, 3)
    f = lambda u: -float(np.sum((u.amplitudes - target) ** 2))  # noqa: E731
    u = ControlGrid(np.ones((2, 3)), 1.0)
    np.testing.assert_allclose(mt.finite_difference_gradient(f, u, 1e-3), -2 * (1 - target), atol=1e-8)
    with pytest.raises(ValueError):
        mt.finite_difference_gradient(f, u, 0.0)


def test_fd_step_plateau(rng):
    u = ControlGrid(rng.uniform(-300, 300, (4, 6)), T)
    ref = mt.finite_difference_gradient(objective, u, 1e-4)
    for step in (1e-2, 1e-3, 1e-5, 1e-6):
        g = mt.finite_difference_gradient(objective, u, step)
        assert np.linalg.norm(g - ref) <= 1e-4 * np.linalg.norm(ref)


def test_analytic_vs_fd_first_order_convergence(rng):
    u = ControlGrid(rng.uniform(-300, 300, (4, 6)), T)
    errs = []
    for f in (1, 2, 4):
        uf = u.refined(f)
        ga = mt.analytic_gradient(H, SPECS, uf, RHO0)
        gf = mt.finite_difference_gradient(objective, uf, 1e-4)
        errs.append(np.linalg.norm(ga - gf) / np.linalg.norm(gf))
    ratios = np.array(errs[1:]) / np.array(errs[:-1])
    assert np.all((ratios > 0.4) & (ratios < 0.6))  # error halves with dt


def test_noon_fidelity():
    assert mt.noon_fidelity(noon_state(0.3)) == pytest.approx(1.0)
    # (1/2 + 0) / sqrt(1)
    assert mt.noon_fidelity(RHO0) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        mt.noon_fidelity(np.eye(8) / 8)


def test_noon_fidelity_is_max_over_phase(rng):
    from hqcgrape.qcore import fidelity

    phis = np.linspace(0, 2 * np.pi, 2001)
    for _ in range(20):
        rho = random_density_matrix(4, rng)
        brute = max(fidelity(rho, noon_state(p)) for p in phis)
        assert mt.noon_fidelity(rho) == pytest.approx(brute, abs=1e-6)
        assert mt.noon_fidelity(rho) >= brute - 1e-12
