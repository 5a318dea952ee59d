import math

import numpy as np
import pytest

from conftest import model_with_width, random_model
from glauberlearn.dynamics import (
    BlockSchedule,
    NeighborhoodHistory,
    NodeSampleSet,
    adversarial_run,
    all_node_samples,
    block_sequence,
    chain_mean,
    extract_node_samples,
    get_policy,
    glauber_kernel,
    m_regime_samples,
    run,
    step,
)
from glauberlearn.generators import covariance_opnorm_estimate, random_bounded_degree
from glauberlearn.ising import (
    GuardError,
    IsingModel,
    conditional_probability,
    config_index,
    exact_distribution,
    tv_distance,
)

X0 = np.array([1, -1, 1, -1], dtype=np.int8)


def empirical_table(configs, n):
    return np.bincount(config_index(configs), minlength=1 << n) / len(configs)


class TestSchedule:
    def test_descriptor_round_trip(self):
        for s in [BlockSchedule.glauber(), BlockSchedule.ell_block(3), BlockSchedule.symmetric(p=0.25),
                  BlockSchedule.symmetric([(0, 1), (2,)], [2.0, 1.0]), BlockSchedule.round_robin([2, 0, 1]),
                  BlockSchedule.round_robin(), BlockSchedule.full_resample(),
                  BlockSchedule.adversarial([1, 3], 0.25, "contrarian")]:
            assert BlockSchedule.from_descriptor(s.descriptor()) == s

    def test_validation(self):
        with pytest.raises(ValueError):
            BlockSchedule.ell_block(5).validate(4)
        with pytest.raises(ValueError):
            BlockSchedule.round_robin([0, 0, 1]).validate(3)
        with pytest.raises(ValueError):
            BlockSchedule.adversarial([0], 0.6)
        with pytest.raises(ValueError):
            BlockSchedule.symmetric(p=0.0)
        with pytest.raises(ValueError):
            BlockSchedule.symmetric([(0,), ()], [1, 1])
        with pytest.raises(GuardError):
            BlockSchedule.ell_block(21).validate(30)

    def test_symmetric_weights_normalized(self):
        s = BlockSchedule.symmetric([(0,), (1,)], [3, 1])
        assert s.weights == (0.75, 0.25)


class TestStep:
    def test_full_block_zero_model_uniform(self):
        m = IsingModel.zeros(3)
        gen = np.random.default_rng(0)
        out = np.array([step(m, [1, 1, 1], [0, 1, 2], gen) for _ in range(16_000)])
        counts = np.bincount(config_index(out), minlength=8)
        assert np.all(np.abs(counts - 2000) <= 5 * math.sqrt(16_000 / 8 * 7 / 8))

    def test_singleton_matches_conditional(self, rng):
        m = random_model(rng, 4)
        x = np.array([1, -1, -1, 1])
        p = conditional_probability(m, x, 2)
        gen = np.random.default_rng(1)
        k = sum(step(m, x, [2], gen)[2] == 1 for _ in range(10_000))
        assert abs(k - 10_000 * p) <= 5 * math.sqrt(10_000 * p * (1 - p))

    def test_locality(self, rng):
        m = random_model(rng, 6)
        x = np.array([1, -1, -1, 1, 1, -1])
        for _ in range(200):
            y = step(m, x, [1, 4], rng)
            assert np.array_equal(np.delete(y, [1, 4]), np.delete(x, [1, 4]))


class TestRun:
    @pytest.mark.parametrize("schedule", [
        BlockSchedule.glauber(), BlockSchedule.ell_block(2), BlockSchedule.symmetric(p=0.3),
        BlockSchedule.symmetric([(0, 1), (2, 3), (1,)], [1, 1, 2]), BlockSchedule.round_robin([3, 1, 0, 2]),
        BlockSchedule.full_resample()])
    def test_shape_locality_nonempty(self, schedule, rng):
        m = random_model(rng, 4)
        traj = run(m, schedule, X0, 500, 3)
        assert len(traj) == 500 and traj.configs.shape == (500, 4)
        assert traj.blocks.any(axis=1).all()
        assert traj.check_locality()

    def test_round_robin_order(self):
        traj = run(IsingModel.zeros(4), BlockSchedule.round_robin([2, 0, 3, 1]), X0, 8, 0)
        assert [traj.block(t)[0] for t in range(8)] == [2, 0, 3, 1] * 2
        assert (traj.update_counts() == 2).all()

    def test_round_robin_blocks_independent_of_seed(self):
        s = BlockSchedule.round_robin([1, 0, 2])
        np.testing.assert_array_equal(block_sequence(s, 3, 30, 1), block_sequence(s, 3, 30, 99))

    def test_ell_block_sizes(self):
        b = block_sequence(BlockSchedule.ell_block(3), 6, 1000, 0)
        assert (b.sum(axis=1) == 3).all()

    def test_full_resample_matches_table(self, rng):
        m = random_model(rng, 3)
        traj = run(m, BlockSchedule.full_resample(), [1, 1, 1], 100_000, 4)
        assert tv_distance(empirical_table(traj.configs, 3), exact_distribution(m)) <= 0.02

    def test_glauber_reaches_stationarity(self):
        m = random_model(np.random.default_rng(8), 4, scale=0.3)
        traj = run(m, BlockSchedule.glauber(), X0, 1_000_000, 5)
        assert traj.check_locality()
        assert tv_distance(empirical_table(traj.configs[-500_000:], 4), exact_distribution(m)) <= 0.05

    def test_block_dynamics_reaches_stationarity(self, rng):
        m = random_model(rng, 4, scale=0.5)
        traj = run(m, BlockSchedule.symmetric(p=0.4), X0, 40_000, 6)
        assert tv_distance(empirical_table(traj.configs[5000:], 4), exact_distribution(m)) <= 0.05

    def test_deterministic_given_seed(self, rng):
        m = random_model(rng, 5)
        a = run(m, BlockSchedule.ell_block(2), np.ones(5), 300, 12)
        b = run(m, BlockSchedule.ell_block(2), np.ones(5), 300, 12)
        np.testing.assert_array_equal(a.configs, b.configs)
        np.testing.assert_array_equal(a.blocks, b.blocks)
        assert a.seed == 12

    def test_rejects_m_regime_and_adversarial(self):
        with pytest.raises(ValueError):
            run(IsingModel.zeros(3), BlockSchedule.m_regime(), [1, 1, 1], 5)


class TestExtraction:
    def test_round_robin_counts(self):
        traj = run(IsingModel.zeros(4), BlockSchedule.round_robin(), X0, 4 * 7, 0)
        assert [len(s) for s in all_node_samples(traj)] == [7] * 4

    def test_glauber_counts_sum_to_T(self, rng):
        traj = run(random_model(rng, 5), BlockSchedule.glauber(), np.ones(5), 1234, 2)
        assert sum(len(s) for s in all_node_samples(traj)) == 1234

    def test_node_never_updated(self):
        traj = run(IsingModel.zeros(3), BlockSchedule.symmetric([(0, 1)], [1.0]), [1, 1, 1], 50, 0)
        assert len(extract_node_samples(traj, 2)) == 0

    def test_contents(self, rng):
        traj = run(random_model(rng, 4), BlockSchedule.glauber(), X0, 200, 1)
        s = extract_node_samples(traj, 1)
        times = np.flatnonzero(traj.blocks[:, 1])
        np.testing.assert_array_equal(s.labels, traj.configs[times, 1])
        np.testing.assert_array_equal(s.contexts, traj.configs[times][:, [0, 2, 3]])
        assert s.n == 4 and s.source == "glauber"

    def test_sample_set_validation(self):
        with pytest.raises(ValueError):
            NodeSampleSet(0, np.ones((3, 2)), np.ones(2))


class TestMRegime:
    def test_zero_model_fair_labels(self):
        sets = m_regime_samples(IsingModel.zeros(6), 60_000, 3)
        y = np.concatenate([s.labels for s in sets])
        assert abs(y.mean()) <= 5 / math.sqrt(len(y))
        ctx = np.vstack([s.contexts for s in sets]).astype(float)
        assert np.all(np.abs(ctx.mean(axis=0)) <= 5 / math.sqrt(len(ctx)))

    def test_context_covariance(self):
        sets = m_regime_samples(IsingModel.zeros(50), 10_000, 4)
        ctx = np.vstack([s.contexts for s in sets])
        assert 0.8 <= covariance_opnorm_estimate(ctx) <= 1.5

    def test_per_node_and_label_law(self, rng):
        m = random_model(rng, 3)
        sets = m_regime_samples(m, 0, 5, per_node=40_000)
        assert [len(s) for s in sets] == [40_000] * 3
        s = sets[0]
        # label law given the context is the exact conditional
        for ctx in ([1, 1], [-1, 1]):
            sel = (s.contexts == ctx).all(axis=1)
            p = conditional_probability(m, [1] + ctx, 0)
            k = sel.sum()
            assert abs((s.labels[sel] == 1).mean() - p) <= 5 * math.sqrt(p * (1 - p) / k)

    def test_total_count(self):
        assert sum(len(s) for s in m_regime_samples(IsingModel.zeros(4), 999, 1)) == 999


class TestAdversarial:
    def test_no_corrupt_equals_glauber(self, rng):
        m = random_model(rng, 5)
        a = adversarial_run(m, [], 0.25, "stubborn", np.ones(5), 5000, 77)
        g = run(m, BlockSchedule.glauber(), np.ones(5), 5000, 77)
        np.testing.assert_array_equal(a.configs, g.configs)
        np.testing.assert_array_equal(a.blocks, g.blocks)

    def test_half_gamma_is_fair_coin(self, rng):
        m = random_model(rng, 4)
        traj = adversarial_run(m, [0], 0.5, "stubborn", X0, 40_000, 3)
        y = extract_node_samples(traj, 0).labels
        assert abs(y.mean()) <= 5 / math.sqrt(len(y))

    def test_stubborn_floor(self):
        m = random_bounded_degree(8, 3, 0.4, 1)
        traj = adversarial_run(m, [2], 0.1, "stubborn", np.ones(8), 80_000, 4)
        y = extract_node_samples(traj, 2).labels
        assert len(y) >= 9000
        assert 0.08 <= np.mean(y == -1) <= 0.12
        assert traj.check_locality()

    def test_honest_updates_faithful(self, rng):
        m = random_model(rng, 4)
        traj = adversarial_run(m, [3], 0.2, "contrarian", X0, 200_000, 9)
        s = extract_node_samples(traj, 1)
        for ctx in np.unique(s.contexts, axis=0):
            sel = (s.contexts == ctx).all(axis=1)
            full = np.insert(ctx, 1, 1)
            p = conditional_probability(m, full, 1)
            k = sel.sum()
            assert abs((s.labels[sel] == 1).mean() - p) <= 5 * math.sqrt(p * (1 - p) / k)

    def test_policy_sees_only_neighbors(self):
        m = IsingModel.from_edges(4, {(0, 1): 0.5, (0, 2): 0.5})
        seen = []

        def spy(view):
            assert isinstance(view, NeighborhoodHistory)
            seen.append((view.neighbors, view.current.shape, view.history().shape[1]))
            return 0.5

        adversarial_run(m, [0], 0.25, spy, X0, 200, 1)
        assert seen and all(s == ((1, 2), (2,), 2) for s in seen)

    def test_contrarian_and_lookup(self):
        view = NeighborhoodHistory(0, [1, 2], np.array([1, 1, 1]), np.empty((0, 3)), 0)
        assert get_policy("contrarian")(view) == 0.0
        with pytest.raises(ValueError):
            get_policy("nope")

    def test_gamma_range(self):
        with pytest.raises(ValueError):
            adversarial_run(IsingModel.zeros(3), [0], 0.0, "stubborn", [1, 1, 1], 10)


class TestKernel:
    def test_stationary_and_reversible(self, rng):
        for _ in range(10):
            m = random_model(rng, 4)
            pi = exact_distribution(m).probabilities
            P = glauber_kernel(m)
            np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-12)
            assert np.max(np.abs(pi @ P - pi)) <= 1e-10
            F = pi[:, None] * P
            assert np.max(np.abs(F - F.T)) <= 1e-10

    def test_guard(self):
        with pytest.raises(GuardError):
            glauber_kernel(IsingModel.zeros(13))


def test_chain_mean_close_to_exact():
    m = model_with_width(np.random.default_rng(3), 6, 0.8)
    mean, se = chain_mean(m, 300_000, 1)
    exact = exact_distribution(m).mean()
    assert np.all(np.abs(mean - exact) <= 5 * se + 1e-3)
