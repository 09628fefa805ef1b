import numpy as np
import pytest

from hqcgrape.encoding import ControlGrid
from hqcgrape.noise import (
    NoiseModel,
    RelaxationParams,
    apply_kraus,
    gad_eta,
    gad_kraus,
    generalized_amplitude_damping,
    imperfect_initial_state,
    kraus_completeness_error,
    perturb_controls,
    phase_damping,
    phase_damping_probability,
    readout_noise,
    relax,
    relaxation_superoperator,
)
from hqcgrape.qcore import check_density_matrix, fidelity, ket, noon_state, pure_state, purity, random_density_matrix

DT = 1.5e-3
REF = RelaxationParams()


def test_reference_parameters():
    assert REF.t2 == (0.3, 3.3)
    assert REF.t1 == (18.5, 9.9)
    assert REF.gad_p == 0.5
    with pytest.raises(ValueError):
        RelaxationParams(t1=(1.0,), t2=(1.0, 2.0))
    with pytest.raises(ValueError):
        RelaxationParams(t1=(0.0, 1.0))


def test_pd_probability():
    assert phase_damping_probability(DT, 0.3) == pytest.approx(2.4937604e-3, rel=1e-7)


def test_gad_eta():
    assert gad_eta(DT, 18.5) == pytest.approx(8.10778e-5, rel=1e-5)


def test_pd_leaves_diagonal_states(rng):
    rho = np.diag(rng.dirichlet(np.ones(4))).astype(complex)
    np.testing.assert_allclose(phase_damping(rho, DT, REF), rho, atol=1e-16)


def test_pd_infinite_t2_is_identity(rng):
    rho = random_density_matrix(4, rng)
    p = RelaxationParams(t2=(np.inf, np.inf))
    np.testing.assert_allclose(phase_damping(rho, DT, p), rho)


def test_pd_dephases_noon_coherence():
    rho = phase_damping(noon_state(), DT, REF)
    expected = np.exp(-DT / 0.3) * np.exp(-DT / 3.3) * 0.5
    assert abs(rho[0, 3]) == pytest.approx(expected, rel=1e-12)


def test_gad_kraus_completeness():
    for t1 in REF.t1:
        assert kraus_completeness_error(gad_kraus(gad_eta(DT, t1), 0.5)) <= 1e-12
    for eta in (0.0, 0.3, 1.0):
        for p in (0.0, 0.5, 1.0):
            assert kraus_completeness_error(gad_kraus(eta, p)) <= 1e-12


def test_gad_zero_eta_is_identity(rng):
    rho = random_density_matrix(2, rng)
    np.testing.assert_allclose(apply_kraus(rho, gad_kraus(0.0, 0.5)), rho, atol=1e-15)


def test_gad_relaxes_towards_bath_populations():
    # repeated GAD at p = 1/2 drives a single spin to the maximally mixed state
    rho = pure_state(ket("0"))
    ops = gad_kraus(0.2, 0.5)
    for _ in range(200):
        rho = apply_kraus(rho, ops)
    np.testing.assert_allclose(rho, np.eye(2) / 2, atol=1e-12)


def test_channels_trace_hermiticity_purity(rng):
    for _ in range(1000):
        rho = random_density_matrix(4, rng, rank=rng.integers(1, 5))
        for channel in (phase_damping, generalized_amplitude_damping):
            out = channel(rho, DT, REF)
            assert abs(np.trace(out) - 1) <= 1e-12
            assert np.max(np.abs(out - out.conj().T)) <= 1e-12
            assert purity(out) <= purity(rho) + 1e-12


def test_superoperator_matches_channels(rng):
    S = relaxation_superoperator(2, DT, REF)
    for _ in range(20):
        rho = random_density_matrix(4, rng)
        np.testing.assert_allclose((S @ rho.ravel()).reshape(4, 4), relax(rho, DT, REF), atol=1e-15)


def test_perturb_controls(rng):
    u = ControlGrid(rng.uniform(-300, 300, (4, 6)), 9e-3)
    assert perturb_controls(u, 0.0, rng) is u
    v = perturb_controls(u, 0.05, rng)
    ratio = v.amplitudes / u.amplitudes
    assert np.all(np.abs(ratio - 1) <= 0.05)
    assert np.any(np.abs(ratio - 1) > 0.03)
    a = perturb_controls(u, 0.05, np.random.default_rng(3))
    b = perturb_controls(u, 0.05, np.random.default_rng(3))
    np.testing.assert_array_equal(a.amplitudes, b.amplitudes)
    with pytest.raises(ValueError):
        perturb_controls(u, -0.1, rng)


def test_imperfect_initial_state():
    target = pure_state(ket("00"))
    np.testing.assert_array_equal(imperfect_initial_state(target, 1.0), target)
    rho = imperfect_initial_state(target, 0.9986)
    assert fidelity(rho, target) == pytest.approx(0.9986, abs=1e-6)
    check_density_matrix(rho)
    with pytest.raises(ValueError):
        imperfect_initial_state(target, 0.4)  # below the fully mixed overlap 1/2
    with pytest.raises(ValueError):
        imperfect_initial_state(target, 1.2)


def test_readout_noise_statistics():
    r = np.random.default_rng(11)
    vals = np.full(100_000, 0.25)
    assert np.array_equal(readout_noise(vals, 0.0, r), vals)
    noisy = readout_noise(vals, 1e-4, r)
    assert noisy.std() == pytest.approx(1e-4, rel=0.02)
    assert abs(noisy.mean() - 0.25) <= 3 * 1e-4 / np.sqrt(vals.size)


def test_noise_model_toggles():
    assert NoiseModel().is_noiseless
    full = NoiseModel.reference()
    assert not full.is_noiseless
    only = full.only("relaxation")
    assert only.relaxation == REF and only.pulse_fluctuation is None and only.readout_sigma is None
    with pytest.raises(ValueError):
        NoiseModel(pulse_fluctuation=1.5)
