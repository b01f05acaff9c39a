import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qcbm.simulator import (
    CNOT,
    H,
    ConfigurationError,
    NoiseConfig,
    Rot,
    ShotHistogram,
    Statevector,
    apply_gate,
    apply_noise,
    distribution_to_dict,
    exact_probabilities,
    prepare_initial,
    sample_shots,
)

import oracle

angles = st.floats(-2 * np.pi, 2 * np.pi, allow_nan=False)


def basis(n, bits):
    v = np.zeros(2**n, dtype=complex)
    v[int(bits, 2)] = 1
    return Statevector(v, n)


def random_state(n, rng):
    v = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return Statevector(v / np.linalg.norm(v), n)


# --- initial states ------------------------------------------------------

def test_all_zero_two_qubits():
    np.testing.assert_array_equal(prepare_initial("all_zero", 2).amplitudes, [1, 0, 0, 0])


def test_ghz_three_qubits():
    probs = distribution_to_dict(exact_probabilities(prepare_initial("ghz", 3)), 3)
    assert probs == pytest.approx({"000": 0.5, "111": 0.5}, abs=1e-15)


def test_bell_product_four_qubits():
    # two Bell pairs on (0,1) and (2,3)
    probs = exact_probabilities(prepare_initial("bell", 4))
    expected = np.abs(oracle.initial_state("bell", 4)) ** 2
    np.testing.assert_allclose(probs, expected, atol=1e-15)
    assert distribution_to_dict(probs, 4) == pytest.approx(
        {"0000": 0.25, "0011": 0.25, "1100": 0.25, "1111": 0.25}
    )


def test_all_plus_is_uniform():
    amps = prepare_initial("all_plus", 5).amplitudes
    np.testing.assert_allclose(amps, 2 ** (-5 / 2))


@pytest.mark.parametrize("tag,n", [("bell", 3), ("ghz", 4), ("ghz", 2)])
def test_divisibility_errors_name_tag_and_count(tag, n):
    with pytest.raises(ConfigurationError, match=rf"{tag}.*{n}"):
        prepare_initial(tag, n)


# --- gates ---------------------------------------------------------------

def test_rot_y_pi_flips():
    out = apply_gate(basis(1, "0"), Rot(0, 0.0, np.pi, 0.0))
    np.testing.assert_allclose(exact_probabilities(out), [0, 1], atol=1e-15)


def test_cnot_truth_table():
    out = apply_gate(basis(2, "10"), CNOT(0, 1))
    np.testing.assert_allclose(np.abs(out.amplitudes), [0, 0, 0, 1])


def test_bell_preparation():
    state = apply_gate(apply_gate(basis(2, "00"), H(0)), CNOT(0, 1))
    np.testing.assert_allclose(exact_probabilities(state), [0.5, 0, 0, 0.5], atol=1e-15)


def test_ry_half_pi_gives_even_split():
    out = apply_gate(basis(1, "0"), Rot(0, 0.0, np.pi / 2, 0.0))
    np.testing.assert_allclose(exact_probabilities(out), [0.5, 0.5], atol=1e-15)


def test_qubit_zero_is_leftmost():
    out = apply_gate(basis(3, "000"), Rot(0, 0.0, np.pi, 0.0))
    probs = exact_probabilities(out)
    assert np.argmax(probs) == 0b100
    assert probs[0b100] == pytest.approx(1.0)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 4), st.data(), angles, angles, angles)
def test_rot_matches_kron_oracle(n, data, omega, theta, phi):
    target = data.draw(st.integers(0, n - 1))
    state = random_state(n, np.random.default_rng(data.draw(st.integers(0, 2**16))))
    got = apply_gate(state, Rot(target, omega, theta, phi)).amplitudes
    want = oracle.embed(oracle.rot(omega, theta, phi), target, n) @ state.amplitudes
    np.testing.assert_allclose(got, want, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 5), st.data())
def test_cnot_and_h_match_kron_oracle(n, data):
    control, target = data.draw(st.lists(st.integers(0, n - 1), min_size=2, max_size=2, unique=True))
    state = random_state(n, np.random.default_rng(data.draw(st.integers(0, 2**16))))
    got = apply_gate(state, CNOT(control, target)).amplitudes
    np.testing.assert_allclose(got, oracle.cnot(control, target, n) @ state.amplitudes, atol=1e-12)
    got = apply_gate(state, H(target)).amplitudes
    np.testing.assert_allclose(got, oracle.embed(oracle.HAD, target, n) @ state.amplitudes, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 5), st.lists(st.tuples(st.integers(0, 4), angles, angles, angles), max_size=12), st.integers(0, 999))
def test_norm_preserved_by_gate_sequences(n, rots, seed):
    state = random_state(n, np.random.default_rng(seed))
    for i, (q, a, b, c) in enumerate(rots):
        state = apply_gate(state, Rot(q % n, a, b, c))
        if n > 1:
            state = apply_gate(state, CNOT(q % n, (q + 1 + i) % n if (q + 1 + i) % n != q % n else (q + 1) % n))
    assert abs(state.norm() - 1) < 1e-10


@settings(max_examples=50, deadline=None)
@given(angles, angles, angles, st.integers(0, 999))
def test_rot_inverse_restores_state(omega, theta, phi, seed):
    state = random_state(2, np.random.default_rng(seed))
    out = apply_gate(apply_gate(state, Rot(1, omega, theta, phi)), Rot(1, -phi, -theta, -omega))
    np.testing.assert_allclose(out.amplitudes, state.amplitudes, atol=1e-10)


def test_bad_indices_raise():
    state = basis(2, "00")
    with pytest.raises(IndexError):
        apply_gate(state, Rot(2, 0, 0, 0))
    with pytest.raises(IndexError):
        apply_gate(state, CNOT(0, 5))
    with pytest.raises(ValueError):
        apply_gate(state, CNOT(1, 1))


# --- sampling ------------------------------------------------------------

def test_deterministic_state_samples():
    hist = sample_shots(basis(2, "10"), 8192, seed=3)
    assert hist.to_dict() == {"10": 8192}
    assert hist.total_shots == 8192


def test_bell_counts_within_binomial_bound():
    bell = prepare_initial("bell", 2)
    hist = sample_shots(bell, 20000, seed=12345)
    assert abs(hist.to_dict()["00"] - 10000) <= 3 * np.sqrt(20000 * 0.25)
    assert set(hist.to_dict()) <= {"00", "11"}


def test_uniform_chi_square_below_critical():
    hist = sample_shots(prepare_initial("all_plus", 2), 8192, seed=2024)
    expected = 8192 / 4
    chi2 = np.sum((hist.counts - expected) ** 2 / expected)
    assert chi2 < 16.27


def test_sampling_reproducible_per_seed():
    state = prepare_initial("all_plus", 3)
    a = sample_shots(state, 1000, seed=9).counts
    b = sample_shots(state, 1000, seed=9).counts
    np.testing.assert_array_equal(a, b)


def test_frequencies_converge():
    hist = sample_shots(prepare_initial("all_plus", 2), 10**6, seed=1)
    assert np.max(np.abs(hist.frequencies() - 0.25)) < 5e-3


def test_histogram_dict_roundtrip():
    hist = sample_shots(prepare_initial("ghz", 3), 500, seed=0)
    again = ShotHistogram.from_dict(hist.to_dict(), 3)
    np.testing.assert_array_equal(again.counts, hist.counts)
    assert all(len(k) == 3 for k in hist.to_dict())


# --- noise ---------------------------------------------------------------

def test_trivial_noise_is_identity():
    p = np.array([0.1, 0.2, 0.3, 0.4])
    np.testing.assert_array_equal(apply_noise(p, NoiseConfig()), p)


def test_full_depolarizing_gives_uniform():
    out = apply_noise(np.array([1.0, 0, 0, 0, 0, 0, 0, 0]), NoiseConfig(depolarizing=1.0))
    np.testing.assert_allclose(out, 1 / 8)


def test_single_qubit_readout_flip():
    out = apply_noise(np.array([1.0, 0.0]), NoiseConfig(p01=0.1))
    np.testing.assert_allclose(out, [0.9, 0.1])


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.floats(0, 1), st.floats(0, 1), st.integers(0, 999))
def test_readout_matches_loop_oracle(n, p01, p10, seed):
    p = np.random.default_rng(seed).dirichlet(np.ones(2**n))
    np.testing.assert_allclose(apply_noise(p, NoiseConfig(p01, p10)), oracle.readout(p, p01, p10), atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 5), st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.integers(0, 999))
def test_noise_output_is_a_distribution(n, p01, p10, lam, seed):
    p = np.random.default_rng(seed).dirichlet(np.ones(2**n))
    out = apply_noise(p, NoiseConfig(p01, p10, lam))
    assert np.all(out >= 0)
    assert abs(out.sum() - 1) < 1e-10


@pytest.mark.parametrize("kwargs", [{"p01": -0.1}, {"p10": 1.5}, {"depolarizing": 2.0}, {"p01": (0.1, 1.2)}])
def test_noise_parameters_validated(kwargs):
    with pytest.raises(ConfigurationError):
        NoiseConfig(**kwargs)
