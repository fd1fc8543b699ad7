"""Slotted-Aloha baseline: closed forms and Monte-Carlo agreement."""

import math

import numpy as np
import pytest

from dqmac.baseline import (
    AlohaPolicy,
    aloha_act,
    aloha_throughput_analytic,
    optimal_attempt_prob,
    simulate_aloha,
)
from dqmac.errors import DomainError


class TestOptimalAttemptProb:
    def test_single_user(self):
        assert optimal_attempt_prob(1) == 1.0

    def test_four_users(self):
        assert optimal_attempt_prob(4) == 0.25

    def test_eleven_users(self):
        assert optimal_attempt_prob(11) == pytest.approx(1 / 11)

    def test_zero_users_rejected(self):
        with pytest.raises(DomainError):
            optimal_attempt_prob(0)


class TestAnalyticThroughput:
    def test_three_users_at_optimum(self):
        assert aloha_throughput_analytic(3, 1 / 3) == pytest.approx(4 / 9)

    def test_lone_user_always_transmitting(self):
        assert aloha_throughput_analytic(1, 1.0) == 1.0

    def test_large_n_approaches_inverse_e(self):
        value = aloha_throughput_analytic(100, 0.01)
        assert value == pytest.approx(0.3697, abs=5e-4)
        assert abs(value - math.exp(-1)) < 0.003

    def test_optimal_band_for_small_cliques(self):
        # (1 - 1/n)^(n-1) lies in (0.385, 0.45] for clique sizes 3..11.
        for n in range(3, 12):
            v = aloha_throughput_analytic(n, optimal_attempt_prob(n))
            assert 0.385 < v <= 0.45


class TestAlohaActions:
    def test_never_transmit(self):
        rng = np.random.default_rng(0)
        policy = AlohaPolicy(attempt_prob=0.0)
        assert all(aloha_act(policy, rng) == 0 for _ in range(100))

    def test_always_transmit_single_channel(self):
        rng = np.random.default_rng(0)
        policy = AlohaPolicy(attempt_prob=1.0)
        assert all(aloha_act(policy, rng) == 1 for _ in range(100))

    def test_empirical_attempt_frequency(self):
        rng = np.random.default_rng(42)
        p = 0.2
        draws = 100_000
        policy = AlohaPolicy(attempt_prob=p)
        hits = sum(aloha_act(policy, rng) > 0 for _ in range(draws))
        stderr = math.sqrt(p * (1 - p) / draws)
        assert abs(hits / draws - p) <= 3 * stderr

    def test_multichannel_choice_uniform(self):
        rng = np.random.default_rng(1)
        policy = AlohaPolicy(attempt_prob=1.0, num_channels=3)
        counts = np.bincount([aloha_act(policy, rng) for _ in range(30_000)], minlength=4)
        assert counts[0] == 0
        freq = counts[1:] / 30_000
        assert np.all(np.abs(freq - 1 / 3) < 0.02)


class TestSimulationMatchesAnalytic:
    @pytest.mark.parametrize("n", [3, 5, 11])
    def test_throughput_convergence(self, n):
        slots = 100_000
        p = optimal_attempt_prob(n)
        expected = aloha_throughput_analytic(n, p)
        result = simulate_aloha(n, AlohaPolicy(attempt_prob=p), slots, seed=n)
        # Per-slot success is Bernoulli(expected).
        tol = 4 * math.sqrt(expected * (1 - expected) / slots)
        assert abs(result["throughput"] - expected) <= tol
