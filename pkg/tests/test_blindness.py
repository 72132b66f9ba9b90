"""Server-view indistinguishability and the adversary harness."""

import math

import numpy as np
import pytest

from cobit.blindness import (
    INPUT_PAIRS,
    Guess,
    Observation,
    PadLeakSanity,
    Strategy,
    ZERO_ROTATION_RULE,
    adversary_guess_experiment,
    averaged_view,
    builtin_strategies,
    estimate_noisy_view,
    generate_observations,
    output_state,
    probe_views,
    round_operator,
    run_blindness_audit,
    score_strategies,
    view_multiset,
)
from cobit.noise import NoiseModel
from cobit.protocol import RoundConfig
from cobit.states import (
    ATOL,
    CobitState,
    MAXIMALLY_MIXED,
    basis_state,
    equal_up_to_global_phase,
    trace_distance,
)


class TestExactViews:
    @pytest.mark.parametrize("mode", ["plates", "abstract"])
    def test_averaged_view_is_maximally_mixed(self, mode):
        for a, b in INPUT_PAIRS:
            rho = averaged_view(a, b, mode)
            assert trace_distance(rho, MAXIMALLY_MIXED) <= ATOL

    @pytest.mark.parametrize("mode", ["plates", "abstract"])
    def test_pairwise_views_identical(self, mode):
        views = [averaged_view(a, b, mode) for a, b in INPUT_PAIRS]
        for i in range(len(views)):
            for j in range(i + 1, len(views)):
                assert trace_distance(views[i], views[j]) <= ATOL

    @pytest.mark.parametrize("mode", ["plates", "abstract"])
    def test_multiset_is_both_basis_states(self, mode):
        for a, b in INPUT_PAIRS:
            ms = view_multiset(a, b, mode)
            probs = sorted(s.prob1() for s in ms)
            assert probs[0] == pytest.approx(0.0, abs=ATOL)
            assert probs[1] == pytest.approx(1.0, abs=ATOL)

    def test_output_states_encode_padded_outcome(self):
        for a, b in INPUT_PAIRS:
            for r in (0, 1):
                want = basis_state((1 - (a & b)) ^ 1 ^ r)
                got = output_state(a, b, r)
                assert equal_up_to_global_phase(got, want, tol=ATOL)

    def test_probe_family_input_independent(self):
        rng = np.random.default_rng(0)
        for _ in range(25):
            v = rng.normal(size=4)
            v /= np.linalg.norm(v)
            probe = CobitState(complex(v[0], v[1]), complex(v[2], v[3]))
            families = [probe_views(a, b, probe) for a, b in INPUT_PAIRS]
            base = families[0]
            for fam in families[1:]:
                matched = all(
                    any(equal_up_to_global_phase(x, y, tol=1e-9) for y in fam)
                    for x in base
                )
                assert matched


class TestAudit:
    @pytest.mark.parametrize("mode", ["plates", "abstract"])
    def test_passes_with_pad(self, mode):
        report = run_blindness_audit(mode=mode, n_copies=100, n_probes=50)
        assert report.passed
        assert report.max_distance_from_mixed <= ATOL
        assert report.max_pairwise_distance <= ATOL
        assert report.multiset_ok and report.multi_copy_ok and report.probe_ok
        assert report.n_copies == 100 and report.n_probes == 50

    def test_fails_without_pad(self):
        report = run_blindness_audit(pad_removed=True)
        assert not report.passed
        assert report.max_pairwise_distance == pytest.approx(1.0, abs=ATOL)
        assert report.max_distance_from_mixed == pytest.approx(0.5, abs=ATOL)

    def test_report_lines_carry_verdict(self):
        report = run_blindness_audit()
        text = "\n".join(report.to_lines())
        assert "PASS" in text
        failing = run_blindness_audit(pad_removed=True)
        assert "FAIL" in "\n".join(failing.to_lines())

    def test_zero_rotation_rule_matches_operators(self):
        # the stated rule: the round operator is the identity ray exactly
        # when the padded outcome s would read 0
        assert "s is 0" in ZERO_ROTATION_RULE
        for a, b in INPUT_PAIRS:
            for r in (0, 1):
                op = round_operator(a, b, r, "plates")
                is_identity_ray = np.allclose(np.abs(op), np.eye(2), atol=ATOL)
                s = (1 - (a & b)) ^ 1 ^ r
                assert is_identity_ray == (s == 0)

    def test_global_sign_appendix_complete(self):
        report = run_blindness_audit()
        assert len(report.global_signs) == 8
        joined = "\n".join(report.global_signs)
        for a, b in INPUT_PAIRS:
            assert f"a={a}, b={b}" in joined
        # the lone negative sign sits on the decoded-1 branch of (1, 1)
        assert "(a=1, b=1, r=0): -flip" in joined

    def test_bad_mode_rejected(self):
        with pytest.raises(ValueError):
            run_blindness_audit(mode="optical")


class TestNoisyViews:
    def test_jittered_views_stay_indistinguishable(self):
        noise = NoiseModel(plate_jitter_sigma=0.1)
        cfg = RoundConfig(noise=noise)
        rhos = []
        for a, b in INPUT_PAIRS:
            rng = np.random.default_rng(100 + 2 * a + b)
            rhos.append(estimate_noisy_view(a, b, cfg, 10_000, rng))
        for i in range(len(rhos)):
            for j in range(i + 1, len(rhos)):
                assert trace_distance(rhos[i], rhos[j]) < 0.05

    def test_lost_everything_raises(self):
        cfg = RoundConfig(noise=NoiseModel(loss_prob=1.0))
        with pytest.raises(RuntimeError):
            estimate_noisy_view(0, 0, cfg, 10, np.random.default_rng(0))


class TestAdversaries:
    def test_builtin_strategies_stay_at_chance(self):
        n = 10_000
        scores = adversary_guess_experiment(
            builtin_strategies(seed=1), n, RoundConfig(), np.random.default_rng(2)
        )
        sig_ab = 3 * math.sqrt(0.25 * 0.75 / n)
        sig_and = 3 * math.sqrt(0.25 / n)
        for sc in scores:
            assert abs(sc.inputs_accuracy.p_hat - 0.25) <= sig_ab, sc.name
            assert abs(sc.and_accuracy.p_hat - 0.5) <= sig_and, sc.name

    def test_pad_leak_sanity_is_perfect(self):
        scores = adversary_guess_experiment(
            [PadLeakSanity()], 2_000, RoundConfig(), np.random.default_rng(3)
        )
        assert scores[0].and_accuracy.p_hat == 1.0

    def test_leak_withheld_from_undeclared_strategies(self):
        seen: list[int | None] = []

        class Spy(Strategy):
            name = "spy"

            def guess(self, obs: Observation) -> Guess:
                seen.append(obs.leaked_r)
                return Guess(ab=(0, 0), and_=0)

        obs = generate_observations(50, RoundConfig(), np.random.default_rng(4))
        assert all(o.leaked_r is not None for _, o in obs)
        score_strategies([Spy()], obs)
        assert seen and all(x is None for x in seen)

    def test_observation_defaults(self):
        obs = Observation(s=1)
        assert obs.states == () and obs.raw == b"" and obs.leaked_r is None

    def test_scores_over_prebuilt_observations(self):
        obs = generate_observations(500, RoundConfig(), np.random.default_rng(5))
        scores = score_strategies(builtin_strategies(), obs)
        assert {s.name for s in scores} == {
            "outcome-follower",
            "outcome-inverter",
            "state-reader",
            "uniform",
        }
        for sc in scores:
            assert sc.inputs_accuracy.n == 500
