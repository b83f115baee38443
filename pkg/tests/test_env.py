import numpy as np
import pytest

from symcheck.env import (
    EnvConfig,
    EpisodeFinishedError,
    RepeatedQuestionError,
    answer_frequency_check,
    apply_answer,
    effective_max_questions,
    reset,
    step,
    termination,
)
from symcheck.knowledge import Belief, KnowledgeMatrix, posterior_from_history
from symcheck.priors import PriorSample
from symcheck.worldgen import gen_separable_world, gen_world


def two_condition_world():
    return KnowledgeMatrix(("a", "b"), ("s",), [[0.9], [0.1]])


def uniform_sample(n, true=0):
    return PriorSample(true, Belief.uniform(n))


class TestReset:
    def test_feature_vector_length_matches_network_input(self):
        # 330 symptoms + 9 conditions -> 339 agent-visible features
        m = gen_world(9, 330, seed=1)
        state = reset(m, uniform_sample(9), EnvConfig())
        assert state.features().shape == (339,)

    def test_reset_is_pure(self):
        m = two_condition_world()
        s1 = reset(m, uniform_sample(2), EnvConfig())
        s2 = reset(m, uniform_sample(2), EnvConfig())
        assert (s1.features() == s2.features()).all()
        assert s1.questions_asked == 0 and s1.history.n_asked == 0

    def test_posterior_equals_prior(self):
        m = two_condition_world()
        prior = Belief(np.array([0.3, 0.7]))
        state = reset(m, PriorSample(1, prior), EnvConfig())
        assert (state.posterior.probs == prior.probs).all()

    def test_dimension_mismatch(self):
        m = two_condition_world()
        with pytest.raises(ValueError):
            reset(m, PriorSample(0, Belief.uniform(3)), EnvConfig())

    def test_threshold_must_beat_chance(self):
        m = two_condition_world()
        with pytest.raises(ValueError, match="threshold"):
            reset(m, uniform_sample(2), EnvConfig(confidence_threshold=0.5))


class TestStep:
    def test_near_certain_symptom_answers_yes(self):
        m = KnowledgeMatrix(("a", "b"), ("s",), [[1.0], [0.5]])  # clamps to 1-1e-6
        cfg = EnvConfig()
        rng = np.random.default_rng(0)
        yes = 0
        n = 10_000
        for _ in range(n):
            out = step(reset(m, uniform_sample(2, true=0), cfg), 0, m, cfg, rng)
            yes += out.answer == "yes"
        assert yes / n >= 0.999

    def test_reward_is_posterior_mass_on_true(self):
        m = two_condition_world()
        cfg = EnvConfig()
        state = reset(m, uniform_sample(2, true=0), cfg)
        out = apply_answer(state, 0, "yes", m, cfg)
        # prior (0.5, 0.5), p(s|c) = (0.9, 0.1), yes -> posterior (0.9, 0.1)
        assert out.reward == pytest.approx(0.9, abs=1e-12)
        assert out.next_state.questions_asked == 1

    def test_threshold_termination(self):
        m = KnowledgeMatrix(("a", "b"), ("s",), [[0.99], [0.01]])
        cfg = EnvConfig(confidence_threshold=0.95)
        state = reset(m, uniform_sample(2, true=0), cfg)
        out = apply_answer(state, 0, "yes", m, cfg)
        assert out.next_state.posterior.probs[0] > 0.95
        assert out.done and out.done_reason == "threshold"

    def test_max_questions_termination(self):
        m = gen_world(3, 6, separability=0.0, seed=5)
        cfg = EnvConfig(max_questions=2, confidence_threshold=1.0)
        state = reset(m, uniform_sample(3), cfg)
        rng = np.random.default_rng(1)
        out = step(state, 0, m, cfg, rng)
        assert not out.done
        out = step(out.next_state, 1, m, cfg, rng)
        assert out.done and out.done_reason == "max_questions"

    def test_exhausting_symptoms_terminates(self):
        m = gen_separable_world(2)  # 2 symptoms, max_questions 10
        cfg = EnvConfig(confidence_threshold=1.0)
        assert effective_max_questions(cfg, m.n_symptoms) == 2
        state = reset(m, uniform_sample(2), cfg)
        rng = np.random.default_rng(2)
        out = step(state, 0, m, cfg, rng)
        out = step(out.next_state, 1, m, cfg, rng)
        assert out.done and out.done_reason == "max_questions"

    def test_repeated_question_raises(self):
        m = gen_world(2, 3, seed=0)
        cfg = EnvConfig()
        rng = np.random.default_rng(0)
        out = step(reset(m, uniform_sample(2), cfg), 1, m, cfg, rng)
        with pytest.raises(RepeatedQuestionError):
            step(out.next_state, 1, m, cfg, rng)

    def test_step_after_done_raises(self):
        m = KnowledgeMatrix(("a", "b"), ("s1", "s2"), [[0.99, 0.5], [0.01, 0.5]])
        cfg = EnvConfig(confidence_threshold=0.95)
        state = reset(m, uniform_sample(2, true=0), cfg)
        out = apply_answer(state, 0, "yes", m, cfg)
        assert out.done
        with pytest.raises(EpisodeFinishedError):
            step(out.next_state, 1, m, cfg, np.random.default_rng(0))

    def test_posterior_matches_batch_recomputation(self):
        m = gen_world(4, 8, seed=9)
        cfg = EnvConfig(confidence_threshold=1.0)
        sample = uniform_sample(4, true=2)
        state = reset(m, sample, cfg)
        rng = np.random.default_rng(3)
        for a in range(5):
            state = step(state, a, m, cfg, rng).next_state
        recomputed = posterior_from_history(sample.prior, m, state.history)
        assert np.abs(state.posterior.probs - recomputed.probs).max() < 1e-12

    def test_posterior_prior_mode_tracks_posterior(self):
        m = gen_world(3, 5, seed=4)
        cfg = EnvConfig(state_prior_mode="posterior", confidence_threshold=1.0)
        state = reset(m, uniform_sample(3), cfg)
        out = step(state, 0, m, cfg, np.random.default_rng(0))
        assert (out.next_state.prior_part.probs == out.next_state.posterior.probs).all()
        static_out = step(state, 0, m, EnvConfig(confidence_threshold=1.0), np.random.default_rng(0))
        assert (static_out.next_state.prior_part.probs == state.prior_part.probs).all()

    def test_feature_length_constant_within_episode(self):
        m = gen_world(3, 7, seed=6)
        cfg = EnvConfig(confidence_threshold=1.0)
        state = reset(m, uniform_sample(3), cfg)
        rng = np.random.default_rng(0)
        n = state.features().size
        for a in range(4):
            state = step(state, a, m, cfg, rng).next_state
            assert state.features().size == n

    def test_signature_question_clears_any_threshold(self):
        # uniform prior + signature yes pushes c* above 1 - 10*eps
        m = gen_separable_world(5)
        cfg = EnvConfig(confidence_threshold=0.99)
        state = reset(m, uniform_sample(5, true=3), cfg)
        out = apply_answer(state, 3, "yes", m, cfg)
        assert out.next_state.posterior.probs[3] > 1 - 10 * 1e-6
        assert out.done_reason == "threshold"


class TestAnswerFrequency:
    def test_binomial_bound(self):
        m = KnowledgeMatrix(("a", "b"), ("s",), [[0.6], [0.5]])
        rate = answer_frequency_check(m, 0, 0, 10_000, np.random.default_rng(8))
        assert abs(rate - 0.6) <= 3 * np.sqrt(0.6 * 0.4 / 10_000)

    def test_clamped_floor(self):
        m = KnowledgeMatrix(("a", "b"), ("s",), [[0.0], [0.5]])
        rate = answer_frequency_check(m, 0, 0, 10_000, np.random.default_rng(1))
        assert rate <= 0.001

    def test_reproducible(self):
        m = two_condition_world()
        r1 = answer_frequency_check(m, 0, 0, 5000, np.random.default_rng(5))
        r2 = answer_frequency_check(m, 0, 0, 5000, np.random.default_rng(5))
        assert r1 == r2

    def test_minimum_n(self):
        m = two_condition_world()
        with pytest.raises(ValueError):
            answer_frequency_check(m, 0, 0, 10, np.random.default_rng(0))


class TestTermination:
    def test_threshold_beats_max_questions(self):
        cfg = EnvConfig(max_questions=3)
        b = Belief(np.array([0.96, 0.04]))
        assert termination(b, 3, 5, cfg) == "threshold"

    def test_none_while_running(self):
        cfg = EnvConfig()
        assert termination(Belief.uniform(4), 2, 20, cfg) == "none"
