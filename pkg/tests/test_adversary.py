import numpy as np
import pytest

from qelection.adversary import (
    ADMIN_COLLUSION,
    EAVESDROPPER,
    FORGER,
    AttackConfig,
    AttackOutcome,
    BudgetExceeded,
    IncompleteTranscriptError,
    basis_collusion_attack,
    density_audit,
    ecc_forger_attack,
    exclusion_simulation,
    forge_ballot_attack,
    forged_ballot_injection,
    intercept_resend,
    intercept_resend_attack,
    run_attack,
    trace_collusion_attack,
    trace_collusion_experiment,
)
from qelection.election import (
    ChannelConfig,
    CollusionLog,
    ElectionConfig,
    ElectionParams,
    initialize_election,
    run_full_election,
    run_key_distribution_phase,
)
from qelection.primitives import EccCode
from qelection.qubit_sim import QubitRegister, channel_transmit
from qelection.transcript import make_rng

from . import oracles

# Frozen from tests/oracles.py (exhaustive enumeration, independent of the package).
COINCIDE_WRONG = {1: 1.0, 2: 0.5, 3: 0.25}
DETECTION_N20 = 0.996828788061066
FORGER_ECC_PASS_24 = 3.885491643984551e-07


def rng(*seed):
    return make_rng(*(seed or (0,)))


class TestOracleConstants:
    def test_intercept_and_detection(self):
        assert oracles.intercept_resend_error_exact() == 0.25
        assert oracles.detection_exact(20) == pytest.approx(DETECTION_N20, rel=1e-15)
        assert DETECTION_N20 == pytest.approx(1 - 0.75**20)

    @pytest.mark.parametrize("m", [1, 2])
    def test_coincidence_enumeration(self, m):
        assert oracles.collusion_coincide_exact(m, wrong=True) == pytest.approx(COINCIDE_WRONG[m])
        assert oracles.collusion_coincide_exact(m, wrong=False) == pytest.approx(1.0)

    def test_frozen_coincidence_matches_closed_form(self):
        for m, p in COINCIDE_WRONG.items():
            assert p == 1 / 2 ** (m - 1)

    def test_random_state_fair(self):
        assert oracles.random_state_p0(0) == pytest.approx(0.5)
        assert oracles.random_state_p0(1) == pytest.approx(0.5)

    def test_forger_ecc_pass_probability(self):
        assert oracles.forger_ecc_success_exact(24, 3, 0.25) == pytest.approx(FORGER_ECC_PASS_24, rel=1e-12)


class TestOutcome:
    def test_validation(self):
        with pytest.raises(ValueError):
            AttackOutcome("x", 1.5, 10, 0.0)
        with pytest.raises(ValueError):
            AttackOutcome("x", 0.5, 0, 0.0)

    def test_z_score(self):
        o = AttackOutcome("x", 0.3, 100, 0.05, closed_form=0.25)
        assert o.z_score() == pytest.approx(1.0) and o.within()
        assert np.isnan(AttackOutcome("x", 0.3, 100, 0.05).z_score())
        assert AttackOutcome("x", 1.0, 10, 0.0, closed_form=1.0).within()
        assert not AttackOutcome("x", 0.9, 10, 0.0, closed_form=1.0).within()

    def test_capabilities(self):
        assert not {"S", "M"} & FORGER.keys
        assert {"S1", "S2", "M1", "M2", "R1", "R2"} <= ADMIN_COLLUSION.keys
        assert not EAVESDROPPER.keys and not EAVESDROPPER.clone


class TestInterceptResend:
    def test_rates(self):
        rate, det = intercept_resend_attack(rng(1), n_qubits=10_000, n_check=20, detection_trials=2000)
        assert abs(rate.estimate - 0.25) <= 0.02 and rate.within()
        assert det.closed_form == pytest.approx(DETECTION_N20)
        assert det.within()

    def test_no_attack(self):
        rate, det = intercept_resend_attack(rng(2), n_qubits=2000, detection_trials=200, attack=False)
        assert rate.estimate == 0 and det.estimate == 0

    def test_preserves_losses(self):
        g = rng(3)
        reg = channel_transmit(QubitRegister.zeros(50), 0.5, 0.0, g)
        lost = reg.lost.copy()
        assert np.array_equal(intercept_resend(reg, g).lost, lost)


class TestForge:
    @pytest.mark.parametrize("m", [1, 2, 4])
    def test_acceptance(self, m):
        out = forge_ballot_attack(m, 40_000, rng(4, m), honest_trials=50)
        assert out.closed_form == 2.0**-m
        assert out.within(4)
        assert out.extras["honest_acceptance"] == 1.0

    def test_halving(self):
        a = forge_ballot_attack(2, 100_000, rng(5), honest_trials=0)
        b = forge_ballot_attack(3, 100_000, rng(6), honest_trials=0)
        assert abs(b.estimate / a.estimate - 0.5) <= 0.05

    def test_injection_matches_closed_form(self):
        params = ElectionParams(l=12, m=2, s=2, check_bits=2)  # 4-bit tags, 4-bit pads
        g = rng(7)
        state = initialize_election(3, ("A", "B"), params, g)
        run_key_distribution_phase(state, ChannelConfig(), g)
        out = forged_ballot_injection(state, 20_000, g)
        assert out.closed_form == pytest.approx(3 / 16 * 2 / 4)
        assert out.within(4)
        assert sum(state.tally.values()) == 0


class TestBasisCollusion:
    @pytest.mark.parametrize("m", [1, 2, 3, 4])
    def test_wrong_guess(self, m):
        out = basis_collusion_attack(m, 20_000, rng(8, m))
        assert out.closed_form == 1 / 2 ** (m - 1)
        assert out.within(4)
        assert out.extras["exclusion_cost"] == (2**m - 1) * m

    @pytest.mark.parametrize("m", [1, 3])
    def test_correct_guess(self, m):
        assert basis_collusion_attack(m, 5000, rng(9), guess="correct").estimate == 1.0

    @pytest.mark.parametrize("m", [2, 3])
    def test_exclusion(self, m):
        res = exclusion_simulation(m, 30, rng(10))
        assert res["min_voters"] >= res["lower_bound"] == (2**m - 1) * m
        assert res["found_rate"] == 1.0

    @pytest.mark.parametrize("m", [1, 5])
    def test_exclusion_range(self, m):
        with pytest.raises(ValueError):
            exclusion_simulation(m, 1, rng())


class TestTrace:
    def test_chance_at_two_voters(self):
        out = trace_collusion_experiment(2, 400, rng(11))
        assert out.closed_form == 0.5 and out.within(4)
        assert out.extras["all_hypotheses_consistent"]

    def test_single_voter(self):
        assert trace_collusion_experiment(1, 20, rng(12)).estimate == 1.0

    def test_classical_links_all(self):
        out = trace_collusion_experiment(4, 30, rng(13), classical=True)
        assert out.estimate == 1.0 and out.closed_form == 1.0

    def test_every_hypothesis_consistent(self):
        res = run_full_election(ElectionConfig(n_voters=6, params=ElectionParams(l=20, m=2, s=2, check_bits=2)), rng(14))
        acc, sessions, consistent = trace_collusion_attack(res.state.collusion, res.state.truth, rng(15))
        assert sessions == 6 and consistent and 0 <= acc <= 1

    def test_incomplete(self):
        with pytest.raises(IncompleteTranscriptError):
            trace_collusion_attack(CollusionLog(), {}, rng())
        with pytest.raises(IncompleteTranscriptError):
            trace_collusion_attack(CollusionLog(ecc=True, charlie=[{}]), {}, rng())
        res = run_full_election(ElectionConfig(n_voters=2, params=ElectionParams(l=20, m=2, s=2, check_bits=2)), rng(16))
        with pytest.raises(IncompleteTranscriptError):
            trace_collusion_attack(res.state.collusion, {}, rng())


class TestDensityAudit:
    @pytest.mark.parametrize("view,l,m", [("outsider", 2, 2), ("bob1", 1, 2), ("bob2", 1, 2),
                                          ("charlie", 1, 2), ("charlie", 2, 3), ("outsider", 1, 3)])
    def test_exact(self, view, l, m):
        res = density_audit(view, l, m, rng(17))
        assert res.distance < 1e-12

    def test_outsider_matches_oracle(self):
        assert oracles.trace_distance_exact(oracles.outsider_density_full(2), np.eye(4) / 4) < 1e-12
        assert density_audit("outsider", 1, 2).dim == 4

    def test_budget(self):
        with pytest.raises(BudgetExceeded):
            density_audit("outsider", 3, 3)
        with pytest.raises(ValueError):
            density_audit("eve", 1, 2)


class TestEccForger:
    @pytest.mark.parametrize("strategy", ["random", "intercept"])
    def test_forger_rejected(self, strategy):
        out = ecc_forger_attack(150, rng(18), strategy=strategy)
        assert abs(out.estimate - 0.5) <= 4 * out.stderr + 0.01
        assert out.extras["decode_failure_rate"] == 1.0
        assert out.extras["acceptance_rate"] == 0.0
        assert out.extras["exceed_capability_rate"] == 1.0

    def test_strategy_checked(self):
        with pytest.raises(ValueError):
            ecc_forger_attack(1, rng(), strategy="clone")


class TestDispatch:
    def test_config_validation(self):
        with pytest.raises(ValueError):
            AttackConfig("teleport")
        with pytest.raises(ValueError):
            AttackConfig("forge_ballot", trials=0)

    def test_rows(self):
        assert len(run_attack(AttackConfig("basis_collusion", 500, {"m": 2}), rng())) == 2
        rows = run_attack(AttackConfig("forge_ballot", 2000, {"m": 2}), rng())
        assert rows[0].metric == "forge_acceptance"
        with pytest.raises(ValueError):
            run_attack(AttackConfig("density_audit"), rng())

    def test_lossy_collusion_log_flagged(self):
        params = ElectionParams(l=128, m=2, s=2, check_bits=2, ecc=EccCode("repetition", 3), tag_len=28)
        g = rng(19)
        state = initialize_election(2, ("A", "B"), params, g)
        run_key_distribution_phase(state, ChannelConfig(loss_p=0.05), g)
        with pytest.raises(IncompleteTranscriptError):
            trace_collusion_attack(state.collusion, state.truth, g)
