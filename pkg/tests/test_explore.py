import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from whittlelearn.explore import EpsilonDecay, ExplorationPolicy, action_probabilities, select_action, softmax

finite = st.floats(-300, 300, allow_nan=False)
q_rows = st.lists(finite, min_size=2, max_size=6).map(np.array)
kinds = st.sampled_from(["eg", "so", "es"])
eps = st.floats(0, 1)


class TestProbabilities:
    def test_softmax_symmetric(self):
        assert np.allclose(action_probabilities(ExplorationPolicy("so"), [0, 0]), [0.5, 0.5])

    def test_softmax_ln2(self):
        assert np.allclose(action_probabilities(ExplorationPolicy("so"), [np.log(2), 0]), [2 / 3, 1 / 3])

    def test_eps_greedy(self):
        assert np.allclose(action_probabilities(ExplorationPolicy("eg", 0.4), [1, 2]), [0.2, 0.8])

    def test_tie_goes_to_lowest(self):
        assert np.allclose(action_probabilities(ExplorationPolicy("eg", 0.4), [3, 3]), [0.8, 0.2])

    def test_eps_softmax_uniform(self):
        assert np.allclose(action_probabilities(ExplorationPolicy("es", 0.4), [0, 0]), [0.5, 0.5])

    def test_eps_softmax_mixture(self):
        p = action_probabilities(ExplorationPolicy("es", 0.4), [np.log(2), 0])
        assert np.allclose(p, 0.2 + 0.6 * np.array([2 / 3, 1 / 3]))

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            action_probabilities(ExplorationPolicy(), [np.nan, 0])

    def test_rejects_bad_epsilon(self):
        with pytest.raises(ValueError):
            ExplorationPolicy("eg", 1.5)

    def test_rejects_unknown_kind(self):
        with pytest.raises(ValueError):
            ExplorationPolicy("ucb")

    def test_no_overflow(self):
        p = softmax(np.array([700.0, -700.0]))
        assert np.all(np.isfinite(p)) and p[0] == pytest.approx(1.0)

    @settings(max_examples=200, deadline=None)
    @given(kinds, q_rows, eps)
    def test_is_distribution(self, kind, q, e):
        p = action_probabilities(ExplorationPolicy(kind, e), q)
        assert np.all(p >= 0)
        assert abs(p.sum() - 1.0) <= 1e-12

    @settings(max_examples=200, deadline=None)
    @given(q_rows, st.floats(-300, 300))
    def test_softmax_shift_invariant(self, q, c):
        assert np.max(np.abs(softmax(q + c) - softmax(q))) <= 1e-12


class TestDecay:
    def test_schedule(self):
        pol = ExplorationPolicy("eg", 0.1, EpsilonDecay())
        assert pol.epsilon_at(0) == 0.1
        assert pol.epsilon_at(19) == 0.1
        assert pol.epsilon_at(20) == pytest.approx(0.099)
        assert pol.epsilon_at(10**6) == 0.01

    def test_floor_above_epsilon(self):
        with pytest.raises(ValueError):
            ExplorationPolicy("eg", 0.005, EpsilonDecay())


class TestSelect:
    def test_pure_exploration_uniform(self, rng):
        pol = ExplorationPolicy("eg", 1.0)
        draws = np.array([select_action(pol, [0.0, 5.0], rng) for _ in range(100_000)])
        assert abs(draws.mean() - 0.5) < 0.01

    def test_pure_exploitation(self, rng):
        pol = ExplorationPolicy("eg", 0.0)
        assert all(select_action(pol, [0.3, -1.0], rng) == 0 for _ in range(1000))

    @pytest.mark.parametrize("kind", ["eg", "so", "es"])
    def test_empirical_law(self, rng, kind):
        pol = ExplorationPolicy(kind, 0.3)
        q = np.array([0.2, 1.0, -0.5])
        p = action_probabilities(pol, q)
        n = 100_000
        counts = np.bincount([select_action(pol, q, rng) for _ in range(n)], minlength=3)
        chi2 = np.sum((counts - n * p) ** 2 / (n * p))
        # 99.9% quantile of chi-square with 2 degrees of freedom
        assert chi2 < 13.8
