import math

import numpy as np
import pytest
import scipy.stats
from hypothesis import given, settings
from hypothesis import strategies as st

from kstep_lln.constructions import block_deviation_tail
from kstep_lln.sampling import (
    TailEstimate,
    block_deviation_sampler,
    clopper_pearson,
    counter_seeds,
    counter_uniforms,
    derive_seed,
    mc_tail,
    tree_deviation_sampler,
)
from kstep_lln.trees import deviation_per_leaf, exact_tail, random_tree


class TestCounterStreams:
    def test_seeds_are_pure_functions_of_inputs(self):
        idx = np.arange(10, dtype=np.uint64)
        np.testing.assert_array_equal(counter_seeds(42, idx), counter_seeds(42, idx))
        assert not np.array_equal(counter_seeds(42, idx), counter_seeds(43, idx))

    def test_uniforms_independent_of_batch_layout(self):
        keys = counter_seeds(7, np.arange(100, dtype=np.uint64))
        full = counter_uniforms(keys, 8)
        split = np.vstack([counter_uniforms(keys[:37], 8), counter_uniforms(keys[37:], 8)])
        np.testing.assert_array_equal(full, split)

    def test_uniforms_range_and_mean(self):
        u = counter_uniforms(counter_seeds(0, np.arange(4000, dtype=np.uint64)), 16)
        assert u.min() >= 0.0 and u.max() < 1.0
        n = u.size
        assert abs(u.mean() - 0.5) < 3.0 / math.sqrt(12 * n)

    def test_derive_seed_distinct_branches(self):
        assert derive_seed(1, 2, 3) != derive_seed(1, 3, 2)
        assert derive_seed(1, 2) != derive_seed(2, 2)


class TestClopperPearson:
    def test_degenerate_ends(self):
        lo, hi = clopper_pearson(0, 100)
        assert lo == 0.0 and hi < 0.06
        lo, hi = clopper_pearson(100, 100)
        assert hi == 1.0 and lo > 0.94

    @given(st.integers(1, 2000), st.data())
    @settings(max_examples=100, deadline=None)
    def test_matches_scipy_binomtest(self, trials, data):
        hits = data.draw(st.integers(0, trials))
        lo, hi = clopper_pearson(hits, trials)
        ref = scipy.stats.binomtest(hits, trials).proportion_ci(
            confidence_level=0.99, method="exact"
        )
        assert lo == pytest.approx(ref.low, abs=1e-9)
        assert hi == pytest.approx(ref.high, abs=1e-9)

    def test_rejects_bad_counts(self):
        with pytest.raises(ValueError):
            clopper_pearson(5, 4)
        with pytest.raises(ValueError):
            clopper_pearson(0, 10, confidence=1.0)


class TestTailEstimate:
    def test_interval_must_contain_point(self):
        with pytest.raises(ValueError):
            TailEstimate(p_hat=0.5, trials=10, seed=0, ci_low=0.6, ci_high=0.9, hits=5)

    def test_contains(self):
        est = TailEstimate(p_hat=0.5, trials=10, seed=0, ci_low=0.2, ci_high=0.8, hits=5)
        assert est.contains(0.3)
        assert not est.contains(0.9)


class TestMcTail:
    def test_impossible_event_gives_zero_with_zero_lower_end(self):
        sampler = block_deviation_sampler(4, 2)
        est = mc_tail(sampler, 100.0, sided="upper", trials=5000, seed=1)
        assert est.p_hat == 0.0
        assert est.ci_low == 0.0
        assert est.hits == 0

    def test_block_instance_covers_exact_value(self):
        est = mc_tail(
            block_deviation_sampler(6, 1),
            math.sqrt(6),
            sided="upper",
            trials=100_000,
            seed=31,
        )
        assert est.contains(7 / 64)

    def test_identical_across_worker_counts(self):
        sampler = block_deviation_sampler(12, 3)
        kwargs = dict(sided="two_sided", trials=70_001, seed=5)
        one = mc_tail(sampler, 6.0, workers=1, **kwargs)
        four = mc_tail(sampler, 6.0, workers=4, **kwargs)
        assert one == four

    def test_tree_sampler_agrees_with_exact_enumeration(self):
        tree, seq = random_tree(depth=6, max_branching=3, seed=404)
        lag = 2
        dev = deviation_per_leaf(tree, seq, lag)
        C = float(np.quantile(np.abs(dev), 0.85))
        exact = exact_tail(tree, seq, lag, C)
        est = mc_tail(
            tree_deviation_sampler(tree, seq, lag), C, sided="two_sided", trials=80_000, seed=2
        )
        assert est.contains(exact)

    def test_sampler_failure_reports_trial_index(self):
        def broken(master_seed, trials):
            if 70_000 in trials:
                raise RuntimeError("boom")
            return np.zeros(len(trials))

        with pytest.raises(RuntimeError, match="trial 70000"):
            mc_tail(broken, 0.5, sided="upper", trials=100_000, seed=0)

    def test_rejects_bad_arguments(self):
        sampler = block_deviation_sampler(4, 2)
        with pytest.raises(ValueError):
            mc_tail(sampler, 1.0, sided="upper", trials=0, seed=0)
        with pytest.raises(ValueError):
            mc_tail(sampler, 1.0, sided="middle", trials=10, seed=0)

    def test_coverage_over_repeated_seeds(self):
        # 99% intervals of a conservative exact method must contain the true
        # value nearly always; 194/200 allows more than 4 sigma of slack.
        exact = block_deviation_tail(8, 1, math.sqrt(8))
        sampler = block_deviation_sampler(8, 1)
        contained = sum(
            mc_tail(sampler, math.sqrt(8), sided="upper", trials=5000, seed=s).contains(exact)
            for s in range(200)
        )
        assert contained >= 194

    def test_block_sampler_distribution_matches_exact_tails(self):
        # Single big sample; compare hit rates at several thresholds at once.
        sampler = block_deviation_sampler(16, 2)
        for C in (0.0, 4.0, 8.0):
            exact = block_deviation_tail(16, 2, C)
            est = mc_tail(sampler, C, sided="upper", trials=60_000, seed=99)
            assert est.contains(exact)

    def test_samplers_reject_ragged_blocks(self):
        with pytest.raises(ValueError):
            block_deviation_sampler(7, 2)
