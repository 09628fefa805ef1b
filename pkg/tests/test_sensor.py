import numpy as np
import pytest

from hqcgrape.encoding import ControlGrid, evolve_unitary
from hqcgrape.metrology import qfi
from hqcgrape.noise import NoiseModel
from hqcgrape.qcore import ket, pure_state
from hqcgrape.sensor import Insertion, Sensor, SensorConfig

T = 9e-3


@pytest.fixture
def u(rng):
    return ControlGrid(rng.uniform(-300, 300, (4, 6)), T)


def test_ideal_config_defaults():
    cfg = SensorConfig.reference()
    assert (cfg.K, cfg.M, cfg.T) == (4, 6, 9e-3)
    np.testing.assert_array_equal(cfg.probe, pure_state(ket("00")))
    assert cfg.noise.is_noiseless


def test_evolution_counts(ideal_config, u):
    s = Sensor(ideal_config)
    s.measure_gradient(u)
    assert s.evolutions_used == 49
    rec = s.measure_qfi(u)
    s.measure_gradient(u, rec)
    assert s.evolutions_used == 49 + 1 + 48


def test_noiseless_sensor_matches_ideal_model(ideal_config, u):
    s = Sensor(ideal_config)
    ideal = evolve_unitary(ideal_config.hamiltonian, ideal_config.control_specs, u, ideal_config.probe)
    np.testing.assert_array_equal(s.evolve(u), ideal)
    assert s.measure_qfi(u).qfi_normalized == pytest.approx(qfi(ideal, ideal_config.hamiltonian.dh0_domega, T).normalized, abs=1e-12)


def test_inverse_insertions_cancel(noisy_config, u):
    quiet = noisy_config.with_noise(NoiseModel.reference().only("relaxation", "initial_state_fidelity"))
    s = Sensor(quiet)
    plain = s.evolve(u)
    pair = [Insertion(1, "y", +1, 3), Insertion(1, "y", -1, 3)]
    np.testing.assert_allclose(s.evolve(u, pair), plain, atol=1e-14)


def test_evolution_preserves_trace(noisy_config, rng):
    s = Sensor(noisy_config, 5)
    for _ in range(50):
        v = ControlGrid(rng.uniform(-1500, 1500, (4, 6)), T)
        rho = s.evolve(v, Insertion(int(rng.integers(2)), "x", 1, int(rng.integers(1, 7))))
        assert abs(np.trace(rho) - 1) <= 1e-12


def test_same_seed_same_readings(noisy_config, u):
    a, b = Sensor(noisy_config, 42), Sensor(noisy_config, 42)
    for _ in range(3):
        assert a.measure_qfi(u).qfi_normalized == b.measure_qfi(u).qfi_normalized
    np.testing.assert_array_equal(a.measure_gradient(u), b.measure_gradient(u))
    assert Sensor(noisy_config, 43).measure_qfi(u).qfi_normalized != Sensor(noisy_config, 42).measure_qfi(u).qfi_normalized


def test_measure_diagonals(ideal_config):
    s = Sensor(ideal_config)
    p00, p11 = s.measure_diagonals(pure_state(ket("00")))
    assert (p00, p11) == (1.0, 0.0)
    rho = np.diag([0.1, 0.2, 0.3, 0.4]).astype(complex)
    assert s.measure_diagonals(rho) == pytest.approx((0.1, 0.4))


def test_readout_clamped(noisy_config):
    s = Sensor(noisy_config.with_noise(NoiseModel(readout_sigma=0.5)), 0)
    for _ in range(100):
        p = s.measure_populations(pure_state(ket("00")))
        assert np.all((p >= 0) & (p <= 1))


def test_invalid_insertions(ideal_config, u):
    s = Sensor(ideal_config)
    with pytest.raises(IndexError):
        s.evolve(u, Insertion(0, "x", 1, 7))
    with pytest.raises(ValueError):
        s.evolve(u, Insertion(0, "x", 2, 1))
    with pytest.raises(ValueError):
        s.evolve(ControlGrid.zeros(2, 6, T))


def test_invalid_probe():
    with pytest.raises(ValueError):
        SensorConfig.reference(probe=np.eye(4))
