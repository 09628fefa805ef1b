import numpy as np
import pytest

from hqcgrape.qcore import (
    dag,
    embed,
    expm_unitary,
    fidelity,
    ket,
    noon_state,
    pauli,
    pure_state,
    random_hermitian,
    random_pure_state,
)

I2 = np.eye(2)


def test_pauli_definitions():
    np.testing.assert_array_equal(pauli("z"), np.diag([1, -1]))
    np.testing.assert_array_equal(pauli("x"), [[0, 1], [1, 0]])
    np.testing.assert_allclose(pauli("y") @ pauli("y"), I2)
    with pytest.raises(ValueError):
        pauli("w")


def test_embed_placement():
    np.testing.assert_array_equal(np.diag(embed(pauli("z"), 0, 2)).real, [1, 1, -1, -1])
    np.testing.assert_array_equal(np.diag(embed(pauli("z"), 1, 2)).real, [1, -1, 1, -1])
    np.testing.assert_array_equal(embed(I2, 0, 2), np.eye(4))
    with pytest.raises(IndexError):
        embed(pauli("x"), 2, 2)


def test_embed_disjoint_supports_commute(rng):
    for _ in range(50):
        a = random_hermitian(2, rng)
        b = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        A, B = embed(a, 0, 2), embed(b, 1, 2)
        assert np.max(np.abs(A @ B - B @ A)) <= 1e-12


def test_expm_known_rotation():
    U = expm_unitary(pauli("x") * np.pi / 2, 1.0)
    np.testing.assert_allclose(U, -1j * pauli("x"), atol=1e-14)
    np.testing.assert_allclose(expm_unitary(np.zeros((4, 4)), 0.7), np.eye(4))


def test_expm_inverse_and_unitarity(rng):
    for _ in range(1000):
        H = random_hermitian(4, rng, scale=rng.uniform(0.1, 500.0))
        t = rng.uniform(-0.01, 0.01)
        U = expm_unitary(H, t)
        assert np.max(np.abs(dag(U) @ U - np.eye(4))) <= 1e-10
        assert np.max(np.abs(U @ expm_unitary(H, -t) - np.eye(4))) <= 1e-10


def test_expm_rejects_non_hermitian():
    with pytest.raises(ValueError):
        expm_unitary(np.array([[0, 1], [0, 0]], dtype=complex), 1.0)


def test_fidelity_examples():
    rho = pure_state([1, 2j, 0.5, -1])
    assert fidelity(rho, rho) == pytest.approx(1.0)
    assert fidelity(pure_state(ket("00")), pure_state(ket("11"))) == pytest.approx(0.0)
    # Tr(NOON |00><00|) = 1/2 and both purities are 1
    assert fidelity(noon_state(0.0), pure_state(ket("00"))) == pytest.approx(0.5)


def test_fidelity_symmetric_and_detects_equality(rng):
    for _ in range(200):
        a = random_pure_state(4, rng)
        b = random_pure_state(4, rng)
        assert fidelity(a, b) == pytest.approx(fidelity(b, a), abs=1e-14)
        assert fidelity(a, b) < 1 - 1e-9
        assert fidelity(a, a) == pytest.approx(1.0, abs=1e-12)


def test_fidelity_errors():
    with pytest.raises(ValueError):
        fidelity(np.eye(2) / 2, np.eye(4) / 4)
    with pytest.raises(ValueError):
        fidelity(np.zeros((2, 2)), np.eye(2) / 2)
