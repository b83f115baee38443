import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from symcheck.env import EnvConfig
from symcheck.greedy import expected_info_gain, run_greedy_episode, select_question
from symcheck.knowledge import Belief, KnowledgeMatrix
from symcheck.priors import PriorSample
from symcheck.worldgen import gen_separable_world, gen_world


def brute_force_best_symptom(b, m, asked):
    """Oracle: myopic-optimal question = argmax of one-step entropy drop,
    computed by direct enumeration over answers (linear space)."""
    best, best_gain = None, -np.inf
    h0 = -sum(p * math.log(p) for p in b.probs if p > 0)
    for s in range(m.n_symptoms):
        if s in asked:
            continue
        gain = h0
        for yes in (True, False):
            col = m.probs[:, s]
            lik = col if yes else 1 - col
            joint = b.probs * lik
            p_ans = joint.sum()
            post = joint / p_ans
            h = -sum(p * math.log(p) for p in post if p > 0)
            gain -= p_ans * h
        if gain > best_gain + 1e-15:
            best, best_gain = s, gain
    return best


class TestExpectedInfoGain:
    def test_identical_likelihood_gives_zero(self):
        m = KnowledgeMatrix(("a", "b"), ("s",), [[0.4], [0.4]])
        ig = expected_info_gain(Belief.uniform(2), m, 0)
        assert abs(ig) < 1e-12

    def test_near_perfect_split_approaches_ln2(self):
        m = KnowledgeMatrix(("a", "b"), ("s",), [[1.0], [0.0]])  # clamped to 1-eps/eps
        ig = expected_info_gain(Belief.uniform(2), m, 0)
        assert ig == pytest.approx(math.log(2), abs=1e-4)

    def test_one_hot_belief_gives_zero_everywhere(self):
        m = gen_world(3, 5, seed=1)
        b = Belief(np.array([0.0, 1.0, 0.0]))
        for s in range(5):
            assert abs(expected_info_gain(b, m, s)) < 1e-12

    def test_skewed_informative_symptom_value(self):
        # p(s|c) = (0.9, 0.1), uniform belief:
        # H = ln 2, both posteriors are (0.9, 0.1) permutations with
        # H = 0.325083, p_yes = 0.5 -> IG = 0.368064
        m = KnowledgeMatrix(("a", "b"), ("s",), [[0.9], [0.1]])
        ig = expected_info_gain(Belief.uniform(2), m, 0)
        assert ig == pytest.approx(math.log(2) - 0.3250829733914482, abs=1e-9)

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_non_negative(self, seed):
        rng = np.random.default_rng(seed)
        n_c = int(rng.integers(2, 6))
        n_s = int(rng.integers(1, 7))
        m = KnowledgeMatrix(
            tuple(f"c{i}" for i in range(n_c)),
            tuple(f"s{j}" for j in range(n_s)),
            rng.uniform(0.05, 0.95, size=(n_c, n_s)),
        )
        b = Belief(rng.dirichlet(np.ones(n_c)))
        for s in range(n_s):
            assert expected_info_gain(b, m, s) >= -1e-12


class TestSelectQuestion:
    def test_picks_higher_gain(self):
        # s0 near-perfect split (IG ~ ln 2 = 0.693), s1 mild (IG ~ 0.368)
        m = KnowledgeMatrix(("a", "b"), ("s0", "s1"), [[1.0, 0.9], [0.0, 0.1]])
        assert select_question(Belief.uniform(2), m, set()) == 0

    def test_mask_respected(self):
        m = KnowledgeMatrix(("a", "b"), ("s0", "s1"), [[1.0, 0.9], [0.0, 0.1]])
        assert select_question(Belief.uniform(2), m, {0}) == 1

    def test_all_uninformative_ties_to_lowest_index(self):
        m = KnowledgeMatrix(("a", "b"), ("s0", "s1", "s2"),
                            [[0.3, 0.3, 0.3], [0.3, 0.3, 0.3]])
        assert select_question(Belief.uniform(2), m, set()) == 0
        assert select_question(Belief.uniform(2), m, {0}) == 1

    def test_all_asked_raises(self):
        m = KnowledgeMatrix(("a", "b"), ("s0",), [[0.5], [0.5]])
        with pytest.raises(ValueError, match="asked"):
            select_question(Belief.uniform(2), m, {0})

    def test_argmax_invariant_to_affine_rescaling(self):
        rng = np.random.default_rng(11)
        m = gen_world(4, 6, seed=11)
        b = Belief(rng.dirichlet(np.ones(4)))
        gains = np.array([expected_info_gain(b, m, s) for s in range(6)])
        for a, c in ((2.5, 0.0), (7.0, 1.3), (0.01, -5.0)):
            assert np.argmax(gains) == np.argmax(a * gains + c)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_matches_myopic_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        n_c = int(rng.integers(2, 5))
        n_s = int(rng.integers(2, 6))
        m = KnowledgeMatrix(
            tuple(f"c{i}" for i in range(n_c)),
            tuple(f"s{j}" for j in range(n_s)),
            rng.uniform(0.05, 0.95, size=(n_c, n_s)),
        )
        b = Belief(rng.dirichlet(np.ones(n_c)))
        asked = set(rng.choice(n_s, size=rng.integers(0, n_s), replace=False).tolist())
        got = select_question(b, m, asked)
        want = brute_force_best_symptom(b, m, asked)
        assert abs(
            expected_info_gain(b, m, got) - expected_info_gain(b, m, want)
        ) < 1e-12


class TestGreedyEpisode:
    def test_separable_world_resolves_quickly(self):
        # uniform prior on a signature world: at most n_conditions - 1 questions
        m = gen_separable_world(3)
        cfg = EnvConfig()
        rng = np.random.default_rng(0)
        for true in range(3):
            trace = run_greedy_episode(m, PriorSample(true, Belief.uniform(3)), cfg, rng)
            assert len(trace) <= 2
            assert trace[-1].done_reason == "threshold"
            assert int(np.argmax(trace[-1].posterior)) == true

    def test_unreachable_threshold_runs_max_questions(self):
        m = gen_world(3, 12, seed=5)
        cfg = EnvConfig(max_questions=4, confidence_threshold=1.0)
        trace = run_greedy_episode(
            m, PriorSample(1, Belief.uniform(3)), cfg, np.random.default_rng(1)
        )
        assert len(trace) == 4
        assert trace[-1].done_reason == "max_questions"

    def test_deterministic_trace(self):
        m = gen_world(4, 8, seed=9)
        cfg = EnvConfig()
        s = PriorSample(2, Belief.uniform(4))
        t1 = run_greedy_episode(m, s, cfg, np.random.default_rng(3))
        t2 = run_greedy_episode(m, s, cfg, np.random.default_rng(3))
        assert len(t1) == len(t2)
        for a, b in zip(t1, t2):
            assert a.action == b.action and a.answer == b.answer
            assert (a.posterior == b.posterior).all()

    def test_no_repeat_questions(self):
        m = gen_world(4, 6, seed=2)
        cfg = EnvConfig(confidence_threshold=1.0, max_questions=6)
        trace = run_greedy_episode(
            m, PriorSample(0, Belief.uniform(4)), cfg, np.random.default_rng(8)
        )
        actions = [t.action for t in trace]
        assert len(actions) == len(set(actions))
