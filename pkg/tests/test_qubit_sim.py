import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qelection.qubit_sim import (
    GATES,
    MINUS,
    ONE,
    PLUS,
    ZERO,
    LostQubitError,
    QubitRegister,
    QubitState,
    RegisterConsumedError,
    apply_gate,
    channel_transmit,
    encode_conjugate,
    ensemble_density,
    is_density_matrix,
    layered_amplitudes,
    measure_register,
    prepare_layered,
    product_vectors,
    trace_distance,
)

from . import oracles

bit_lists = st.integers(1, 24).flatmap(lambda n: st.tuples(
    st.lists(st.integers(0, 1), min_size=n, max_size=n),
    st.lists(st.integers(0, 1), min_size=n, max_size=n),
))


def rng(seed=0):
    return np.random.default_rng(seed)


class TestGates:
    def test_h_on_zero_is_plus(self):
        assert apply_gate(ZERO, "H").same_ray(PLUS)
        assert np.allclose(apply_gate(ZERO, "H").vector, PLUS.vector)

    def test_y_on_one_is_minus_zero(self):
        out = apply_gate(ONE, "Y")
        assert np.allclose(out.vector, -ZERO.vector)

    def test_y_on_plus_matches_matrix_oracle(self):
        expected = oracles.Y @ (oracles.H @ oracles.KET0)
        out = apply_gate(PLUS, "Y")
        assert np.allclose(out.vector, expected)
        assert np.allclose(out.vector, -MINUS.vector)

    def test_gate_matrices_match_oracle(self):
        assert np.allclose(GATES["H"], oracles.H)
        assert np.allclose(GATES["Y"], oracles.Y)

    def test_h_squared_identity_and_y_squared_minus_identity(self):
        assert np.allclose(GATES["H"] @ GATES["H"], np.eye(2))
        assert np.allclose(GATES["Y"] @ GATES["Y"], -np.eye(2))

    def test_unknown_gate(self):
        with pytest.raises(ValueError):
            apply_gate(ZERO, "X")

    def test_state_normalization_enforced(self):
        with pytest.raises(ValueError):
            QubitState(1.0, 1.0)

    @given(st.floats(0, 2 * np.pi), st.sampled_from(["H", "Y", "I"]), st.integers(0, 1), st.integers(0, 1))
    def test_gate_twice_preserves_distribution(self, theta, gate, basis, outcome):
        s = QubitState(np.cos(theta), np.sin(theta))
        twice = apply_gate(apply_gate(s, gate), gate)
        assert twice.probability(basis, outcome) == pytest.approx(s.probability(basis, outcome), abs=1e-12)

    @given(st.floats(0, 2 * np.pi), st.integers(0, 1), st.integers(0, 1))
    def test_global_sign_unobservable(self, theta, basis, outcome):
        s = QubitState(np.cos(theta), np.sin(theta))
        neg = QubitState(-s.amp0, -s.amp1)
        assert s.probability(basis, outcome) == pytest.approx(neg.probability(basis, outcome), abs=1e-12)

    def test_y_flips_eigenstates_in_both_bases(self):
        for basis, value in itertools.product((0, 1), repeat=2):
            for seed in range(5):
                r2 = encode_conjugate([value], [basis])
                r2.apply("Y")
                assert measure_register(r2, [basis], rng(seed)).bits[0] == 1 - value


class TestEncoding:
    def test_identity_case(self):
        reg = encode_conjugate([0], [0])
        assert reg.state(0).same_ray(ZERO)

    def test_one_in_diagonal_is_minus(self):
        assert encode_conjugate([1], [1]).state(0).same_ray(MINUS)

    def test_two_positions_oracle(self):
        reg = encode_conjugate([0, 1], [1, 0])
        expect = [oracles.H @ oracles.KET0, oracles.KET1]
        for k, v in enumerate(expect):
            assert np.allclose(reg.state(k).vector, v)
        assert reg.state(0).same_ray(PLUS) and reg.state(1).same_ray(ONE)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            encode_conjugate([0, 1], [0])

    @given(bit_lists, st.integers(0, 2**32))
    def test_correct_basis_is_deterministic(self, rn, seed):
        R, N = rn
        out = measure_register(encode_conjugate(R, N), N, rng(seed)).bits
        assert out.tolist() == R


class TestLayered:
    def test_all_zero_is_ground_state(self):
        reg = prepare_layered([0] * 4, [0] * 4, [0] * 4, [0] * 4)
        assert all(s.same_ray(ZERO) for s in reg.states())

    def test_single_y(self):
        assert prepare_layered([0], [1], [0], [0]).state(0).same_ray(ONE)

    def test_h_h_y_is_one(self):
        expected = oracles.qubit([(oracles.Y, 1), (oracles.H, 1), (oracles.Y, 0), (oracles.H, 1)])
        state = prepare_layered([1], [1], [1], [0]).state(0)
        assert np.allclose(state.vector, expected)
        assert state.same_ray(ONE)

    def test_anticommutation_reduction_exhaustive(self):
        for a, b, c, d in itertools.product((0, 1), repeat=4):
            layered = prepare_layered([a], [b], [c], [d]).state(0).vector
            reduced = oracles.qubit([(oracles.Y, b ^ d), (oracles.H, a ^ c)])
            assert np.allclose(layered, reduced) or np.allclose(layered, -reduced)

    def test_matches_kron_oracle(self):
        g = rng(3)
        for _ in range(20):
            S1, R1, S2, R2 = (g.integers(0, 2, 5) for _ in range(4))
            vec = product_vectors(layered_amplitudes(S1, R1, S2, R2))[0]
            assert np.allclose(vec, oracles.layered_full(S1, R1, S2, R2))

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            prepare_layered([0, 1], [0], [0, 1], [0, 1])


class TestMeasurement:
    def test_eigenstates(self):
        assert measure_register(QubitRegister.from_states([ZERO]), [0], rng()).bits[0] == 0
        assert measure_register(QubitRegister.from_states([PLUS]), [1], rng()).bits[0] == 0

    def test_plus_in_rectilinear_is_fair(self):
        reg = QubitRegister.from_states([PLUS] * 10_000)
        freq = 1 - measure_register(reg, np.zeros(10_000, dtype=np.uint8), rng(7)).bits.mean()
        assert abs(freq - 0.5) <= 0.02

    def test_wrong_basis_uniform(self):
        n = 20_000
        g = rng(11)
        R = g.integers(0, 2, n)
        N = g.integers(0, 2, n)
        bits = measure_register(encode_conjugate(R, N), 1 - N, g).bits
        freq = bits.mean()
        assert abs(freq - 0.5) <= 3 * np.sqrt(0.25 / n)

    def test_consumed_after_measurement(self):
        reg = QubitRegister.zeros(3)
        measure_register(reg, [0, 0, 0], rng())
        assert reg.consumed
        with pytest.raises(RegisterConsumedError):
            measure_register(reg, [0, 0, 0], rng())
        with pytest.raises(RegisterConsumedError):
            reg.apply("H")

    def test_basis_length_checked(self):
        with pytest.raises(ValueError):
            measure_register(QubitRegister.zeros(3), [0, 0], rng())

    def test_lost_positions_reported_not_read(self):
        reg = QubitRegister.zeros(4)
        reg.mark_lost([False, True, False, True])
        with pytest.raises(LostQubitError):
            reg.state(1)
        assert np.isnan(reg.amplitudes()[1]).all()
        meas = measure_register(reg, [0] * 4, rng())
        assert meas.lost.tolist() == [1, 3]
        assert meas.received.tolist() == [0, 2]


class TestChannel:
    def test_identity_channel(self):
        reg = encode_conjugate([1, 0, 1], [0, 1, 1])
        before = reg.amplitudes()
        out = channel_transmit(reg, 0.0, 0.0, rng())
        assert np.array_equal(out.amplitudes(), before)
        assert reg.consumed and not out.lost.any()

    def test_total_loss(self):
        out = channel_transmit(QubitRegister.zeros(50), 1.0, 0.0, rng())
        assert out.lost.all()

    def test_certain_flip(self):
        expected = oracles.Y @ oracles.KET0
        out = channel_transmit(QubitRegister.zeros(1), 0.0, 1.0, rng())
        assert np.allclose(out.state(0).vector, expected)
        assert measure_register(out, [0], rng()).bits[0] == 1

    def test_probability_validation(self):
        with pytest.raises(ValueError):
            channel_transmit(QubitRegister.zeros(1), 1.5, 0.0, rng())

    def test_no_public_copy(self):
        reg = QubitRegister.zeros(2)
        assert not hasattr(reg, "copy") and not hasattr(reg, "clone")


class TestDensity:
    def test_pure_zero(self):
        assert np.allclose(ensemble_density([ZERO]), np.diag([1.0, 0.0]))

    def test_classical_mixture(self):
        assert np.allclose(ensemble_density([ZERO, ONE]), np.eye(2) / 2)

    def test_one_qubit_layered_average(self):
        states = [prepare_layered([a], [b], [c], [d]) for a, b, c, d in itertools.product((0, 1), repeat=4)]
        rho = ensemble_density(states)
        assert trace_distance(rho, np.eye(2) / 2) < 1e-12

    @pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 6])
    def test_conjugate_ensemble_is_maximally_mixed(self, n):
        keys = np.array(oracles.strings(n), dtype=np.uint8)
        s = np.repeat(keys, len(keys), axis=0)
        r = np.tile(keys, (len(keys), 1))
        z = np.zeros_like(s)
        rho = ensemble_density(layered_amplitudes(z, r, s, z))
        assert is_density_matrix(rho)
        assert trace_distance(rho, np.eye(2**n) / 2**n) < 1e-12

    def test_matches_kron_oracle(self):
        keys = np.array(oracles.strings(2), dtype=np.uint8)
        s = np.repeat(keys, 4, axis=0)
        r = np.tile(keys, (4, 1))
        z = np.zeros_like(s)
        rho = ensemble_density(layered_amplitudes(z, r, s, z))
        assert np.allclose(rho, oracles.outsider_density_full(2))

    def test_weights_validated(self):
        with pytest.raises(ValueError):
            ensemble_density([ZERO, ONE], weights=[0.7, 0.7])

    def test_dimension_cap(self):
        with pytest.raises(ValueError):
            ensemble_density(np.zeros((1, 9, 2)) + [1.0, 0.0])

    def test_trace_distance_examples(self):
        rho = np.diag([0.3, 0.7])
        assert trace_distance(rho, rho) == 0
        assert trace_distance(np.diag([1.0, 0]), np.diag([0, 1.0])) == pytest.approx(1.0)
        half = np.eye(2) / 2
        zero = np.diag([1.0, 0])
        assert trace_distance(half, zero) == pytest.approx(oracles.trace_distance_exact(half, zero))
        assert trace_distance(half, zero) == pytest.approx(0.5)

    def test_trace_distance_dimension_mismatch(self):
        with pytest.raises(ValueError):
            trace_distance(np.eye(2), np.eye(4))

    @settings(max_examples=30)
    @given(st.integers(0, 2**32))
    def test_trace_distance_symmetric(self, seed):
        g = rng(seed)
        a = g.normal(size=(4, 4))
        b = g.normal(size=(4, 4))
        a, b = a @ a.T, b @ b.T
        a, b = a / np.trace(a), b / np.trace(b)
        assert trace_distance(a, b) == pytest.approx(trace_distance(b, a))
        assert trace_distance(a, b) == pytest.approx(oracles.trace_distance_exact(a, b))
