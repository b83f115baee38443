import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from symcheck.knowledge import (
    PROB_EPS,
    AnswerHistory,
    Belief,
    KnowledgeMatrix,
    belief_entropy,
    load_matrix,
    posterior_from_history,
    posterior_update,
    save_matrix,
)


def brute_force_posterior(prior, probs, answers):
    """Independent oracle: plain linear-space product of likelihoods.

    answers: list of (symptom_index, True for yes / False for no).
    """
    joint = np.array(prior, dtype=float)
    for s, yes in answers:
        col = probs[:, s]
        joint = joint * (col if yes else 1.0 - col)
    return joint / joint.sum()


def random_instance(rng, max_conditions=5, max_symptoms=6, max_answers=6):
    n_c = rng.integers(2, max_conditions + 1)
    n_s = rng.integers(1, max_symptoms + 1)
    probs = rng.uniform(0.02, 0.98, size=(n_c, n_s))
    m = KnowledgeMatrix(
        tuple(f"c{i}" for i in range(n_c)),
        tuple(f"s{j}" for j in range(n_s)),
        probs,
    )
    prior = rng.dirichlet(np.ones(n_c))
    k = rng.integers(0, min(max_answers, n_s) + 1)
    symptoms = rng.choice(n_s, size=k, replace=False)
    answers = [(int(s), bool(rng.integers(2))) for s in symptoms]
    return m, Belief(prior), answers


def history_from_answers(n_symptoms, answers):
    entries = np.zeros(n_symptoms, dtype=np.int8)
    for s, yes in answers:
        entries[s] = 1 if yes else -1
    return AnswerHistory(entries)


class TestKnowledgeMatrix:
    def test_round_trip_identity(self):
        m = load_matrix(
            {
                "conditions": ["a", "b"],
                "symptoms": ["s1", "s2"],
                "probs": [[0.9, 0.1], [0.1, 0.9]],
            }
        )
        assert np.allclose(m.probs, [[0.9, 0.1], [0.1, 0.9]])
        assert m.n_conditions == 2 and m.n_symptoms == 2

    def test_zero_entry_clamped(self):
        m = load_matrix(
            {"conditions": ["a", "b"], "symptoms": ["s"], "probs": [[0.0], [1.0]]}
        )
        assert m.probs[0, 0] == PROB_EPS
        assert m.probs[1, 0] == 1.0 - PROB_EPS

    def test_gross_out_of_range_rejected(self):
        with pytest.raises(ValueError, match="outside"):
            load_matrix(
                {"conditions": ["a", "b"], "symptoms": ["s"], "probs": [[1.7], [0.5]]}
            )

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="shape"):
            load_matrix(
                {"conditions": ["a", "b"], "symptoms": ["s"], "probs": [[0.5, 0.5]]}
            )

    def test_duplicate_names_rejected(self):
        with pytest.raises(ValueError, match="duplicate"):
            KnowledgeMatrix(("a", "a"), ("s",), [[0.5], [0.5]])

    def test_too_few_conditions(self):
        with pytest.raises(ValueError, match="2 conditions"):
            KnowledgeMatrix(("a",), ("s",), [[0.5]])

    def test_malformed_document(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        with pytest.raises(ValueError, match="malformed"):
            load_matrix(p)
        with pytest.raises(ValueError, match="missing"):
            load_matrix({"conditions": ["a", "b"]})

    def test_file_round_trip(self, tmp_path):
        m = KnowledgeMatrix(("a", "b"), ("s1", "s2"), [[0.9, 0.1], [0.2, 0.8]])
        path = tmp_path / "world.json"
        save_matrix(m, path)
        m2 = load_matrix(path)
        assert m2.condition_names == m.condition_names
        assert m2.symptom_names == m.symptom_names
        assert (m2.probs == m.probs).all()

    def test_immutability(self):
        m = KnowledgeMatrix(("a", "b"), ("s",), [[0.5], [0.5]])
        with pytest.raises(ValueError):
            m.probs[0, 0] = 0.1


class TestBelief:
    def test_validation(self):
        with pytest.raises(ValueError):
            Belief(np.array([0.5, 0.6]))
        with pytest.raises(ValueError):
            Belief(np.array([-0.1, 1.1]))
        with pytest.raises(ValueError):
            Belief.from_unnormalized([0.0, 0.0])

    def test_uniform(self):
        b = Belief.uniform(4)
        assert np.allclose(b.probs, 0.25)

    def test_from_unnormalized(self):
        b = Belief.from_unnormalized([2.0, 6.0])
        assert np.allclose(b.probs, [0.25, 0.75])


class TestAnswerHistory:
    def test_empty_and_with_answer(self):
        h = AnswerHistory.empty(3)
        assert h.n_asked == 0
        h2 = h.with_answer(1, "yes").with_answer(0, "no")
        assert list(h2.entries) == [-1, 1, 0]
        assert h2.n_asked == 2
        assert h.n_asked == 0  # original untouched

    def test_repeat_answer_rejected(self):
        h = AnswerHistory.empty(2).with_answer(0, "yes")
        with pytest.raises(ValueError, match="already"):
            h.with_answer(0, "no")

    def test_bad_values_rejected(self):
        with pytest.raises(ValueError):
            AnswerHistory(np.array([2, 0], dtype=np.int8))


class TestPosteriorUpdate:
    def setup_method(self):
        self.m = KnowledgeMatrix(("a", "b"), ("s",), [[0.9], [0.1]])

    def test_hand_bayes_yes(self):
        # 0.5*0.9 / (0.5*0.9 + 0.5*0.1) = 0.45 / 0.50 = 0.9
        post = posterior_update(Belief.uniform(2), self.m, 0, "yes")
        assert np.allclose(post.probs, [0.9, 0.1], atol=1e-12)

    def test_uninformative_likelihood(self):
        m = KnowledgeMatrix(("a", "b"), ("s",), [[0.5], [0.5]])
        post = posterior_update(Belief.uniform(2), m, 0, "yes")
        assert np.allclose(post.probs, [0.5, 0.5], atol=1e-15)

    def test_no_is_complement_identity(self):
        prior = Belief(np.array([0.3, 0.7]))
        post_no = posterior_update(prior, self.m, 0, "no")
        flipped = KnowledgeMatrix(("a", "b"), ("s",), [[0.1], [0.9]])
        post_flip = posterior_update(prior, flipped, 0, "yes")
        assert np.allclose(post_no.probs, post_flip.probs, atol=1e-12)

    def test_index_out_of_range(self):
        with pytest.raises(IndexError):
            posterior_update(Belief.uniform(2), self.m, 5, "yes")

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            posterior_update(Belief.uniform(3), self.m, 0, "yes")

    def test_one_hot_prior_stays_one_hot(self):
        prior = Belief(np.array([1.0, 0.0]))
        post = posterior_update(prior, self.m, 0, "no")
        assert np.allclose(post.probs, [1.0, 0.0])


class TestPosteriorFromHistory:
    def test_empty_history_returns_prior(self):
        m = KnowledgeMatrix(("a", "b"), ("s1", "s2"), [[0.9, 0.2], [0.1, 0.6]])
        prior = Belief(np.array([0.3, 0.7]))
        post = posterior_from_history(prior, m, AnswerHistory.empty(2))
        assert np.allclose(post.probs, prior.probs, atol=1e-15)

    def test_two_orders_identical(self):
        m = KnowledgeMatrix(("a", "b"), ("s1", "s2"), [[0.9, 0.2], [0.1, 0.6]])
        prior = Belief(np.array([0.4, 0.6]))
        ab = posterior_update(posterior_update(prior, m, 0, "yes"), m, 1, "no")
        ba = posterior_update(posterior_update(prior, m, 1, "no"), m, 0, "yes")
        assert np.allclose(ab.probs, ba.probs, atol=1e-12)
        h = history_from_answers(2, [(0, True), (1, False)])
        batch = posterior_from_history(prior, m, h)
        assert np.allclose(batch.probs, ab.probs, atol=1e-12)

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(7)
        m, prior, answers = random_instance(rng, 4, 5)
        h = history_from_answers(m.n_symptoms, answers)
        post = posterior_from_history(prior, m, h)
        oracle = brute_force_posterior(prior.probs, m.probs, answers)
        assert np.allclose(post.probs, oracle, atol=1e-9)

    @settings(max_examples=60, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_oracle_equivalence_property(self, seed):
        rng = np.random.default_rng(seed)
        m, prior, answers = random_instance(rng)
        h = history_from_answers(m.n_symptoms, answers)
        post = posterior_from_history(prior, m, h)
        oracle = brute_force_posterior(prior.probs, m.probs, answers)
        assert np.abs(post.probs - oracle).max() < 1e-9

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_order_invariance_property(self, seed):
        rng = np.random.default_rng(seed)
        m, prior, answers = random_instance(rng)
        h = history_from_answers(m.n_symptoms, answers)
        batch = posterior_from_history(prior, m, h)
        perm = list(answers)
        rng.shuffle(perm)
        seq = prior
        for s, yes in perm:
            seq = posterior_update(seq, m, s, "yes" if yes else "no")
        assert np.abs(batch.probs - seq.probs).max() < 1e-12

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 10_000), scale=st.floats(1e-3, 1e3))
    def test_prior_scale_invariance(self, seed, scale):
        rng = np.random.default_rng(seed)
        m, prior, answers = random_instance(rng)
        h = history_from_answers(m.n_symptoms, answers)
        weights = prior.probs * 3.7
        a = posterior_from_history(Belief.from_unnormalized(weights), m, h)
        b = posterior_from_history(Belief.from_unnormalized(weights * scale), m, h)
        assert np.abs(a.probs - b.probs).max() < 1e-12

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_normalization_and_no_exact_zero(self, seed):
        rng = np.random.default_rng(seed)
        m, prior, answers = random_instance(rng)
        # strictly positive prior + clamped matrix -> no exact zeros
        prior = Belief.from_unnormalized(prior.probs + 1e-3)
        h = history_from_answers(m.n_symptoms, answers)
        post = posterior_from_history(prior, m, h)
        assert abs(post.probs.sum() - 1.0) <= 1e-9
        assert (post.probs > 0).all()


class TestEntropy:
    def test_uniform_two(self):
        assert belief_entropy(Belief.uniform(2)) == pytest.approx(math.log(2), abs=1e-12)

    def test_one_hot_zero(self):
        assert belief_entropy(Belief(np.array([0.0, 1.0]))) == 0.0

    def test_skewed(self):
        # -0.9 ln 0.9 - 0.1 ln 0.1 = 0.32508297...
        got = belief_entropy(Belief(np.array([0.9, 0.1])))
        assert got == pytest.approx(0.3250829733914482, abs=1e-12)
