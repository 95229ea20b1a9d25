import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kstep_lln.bounds import HorizonParams, deviation_threshold
from kstep_lln.decision import (
    DecisionSpace,
    LossSpec,
    Strategy,
    adversarial_strategy,
    bayesian_strategy,
    clairvoyant_envelope,
    expected_loss,
    expected_losses,
    random_strategy,
    regret_tail,
    shifted_deviation_check,
    shifted_sequence,
    total_loss,
    total_losses,
)
from kstep_lln.trees import ProbabilityTree, exact_tail, random_tree


def uniform_binary_tree(depth):
    parents, probs = [], []
    n = 1
    for _ in range(depth):
        parents.append(np.repeat(np.arange(n), 2))
        probs.append(np.full(2 * n, 0.5))
        n *= 2
    return ProbabilityTree(parents=tuple(parents), branch_probs=tuple(probs))


def random_loss(tree, n_steps, horizon, n_decisions, seed):
    rng = np.random.default_rng(seed)
    counts = tree.node_counts
    return LossSpec(
        space=DecisionSpace(tuple(f"d{i}" for i in range(n_decisions))),
        horizon=horizon,
        tables=tuple(
            tuple(rng.uniform(0, 1, size=counts[n + horizon]) for _ in range(n_decisions))
            for n in range(1, n_steps + 1)
        ),
    )


class TestValidation:
    def test_decision_space(self):
        with pytest.raises(ValueError):
            DecisionSpace(())
        with pytest.raises(ValueError):
            DecisionSpace(("a", "a"))

    def test_loss_range(self):
        tree = uniform_binary_tree(2)
        with pytest.raises(ValueError, match=r"\[0, 1\]"):
            LossSpec(
                space=DecisionSpace(("a",)),
                horizon=1,
                tables=((np.array([0.5, 1.2, 0.0, 0.1]),),),
            )

    def test_tree_too_shallow(self):
        tree = uniform_binary_tree(2)
        loss = random_loss(uniform_binary_tree(3), 2, 1, 2, seed=0)
        with pytest.raises(ValueError, match="too shallow"):
            total_losses(tree, loss, Strategy(choices=(np.zeros(2, int), np.zeros(4, int))))


class TestExpectedLoss:
    def test_constant_tables(self):
        tree = uniform_binary_tree(3)
        loss = LossSpec(
            space=DecisionSpace(("a", "b")),
            horizon=1,
            tables=tuple(
                (np.full(tree.node_counts[n + 1], 0.3), np.full(tree.node_counts[n + 1], 0.8))
                for n in (1, 2)
            ),
        )
        np.testing.assert_allclose(expected_losses(tree, loss, 1, 0), [0.3, 0.3], atol=1e-15)
        np.testing.assert_allclose(expected_losses(tree, loss, 2, 1), np.full(4, 0.8), atol=1e-15)

    def test_two_leaf_average(self):
        tree = uniform_binary_tree(2)
        loss = LossSpec(
            space=DecisionSpace(("a",)),
            horizon=1,
            tables=((np.array([0.0, 1.0, 0.0, 1.0]),),),
        )
        np.testing.assert_allclose(expected_losses(tree, loss, 1, 0), [0.5, 0.5], atol=1e-15)

    def test_three_branch_dot_product(self):
        # probs (0.2, 0.3, 0.5) against losses (1, 0, 0.4) -> 0.4
        tree = ProbabilityTree(
            parents=(np.array([0]), np.array([0, 0, 0])),
            branch_probs=(np.array([1.0]), np.array([0.2, 0.3, 0.5])),
        )
        loss = LossSpec(
            space=DecisionSpace(("a",)), horizon=1, tables=((np.array([1.0, 0.0, 0.4]),),)
        )
        assert expected_loss(tree, loss, 1, 0, node=0) == pytest.approx(0.4, abs=1e-15)

    def test_index_validation(self):
        tree = uniform_binary_tree(2)
        loss = random_loss(tree, 1, 1, 2, seed=1)
        with pytest.raises(ValueError):
            expected_losses(tree, loss, 2, 0)
        with pytest.raises(ValueError):
            expected_losses(tree, loss, 1, 5)
        with pytest.raises(ValueError):
            expected_loss(tree, loss, 1, 0, node=99)


class TestBayesianStrategy:
    def test_ties_go_to_first_decision(self):
        tree = uniform_binary_tree(2)
        tab = np.full(4, 0.5)
        loss = LossSpec(
            space=DecisionSpace(("a", "b", "c")),
            horizon=1,
            tables=((tab.copy(), tab.copy(), tab.copy()),),
        )
        bayes = bayesian_strategy(tree, loss)
        assert np.all(bayes.choices[0] == 0)

    def test_picks_smaller_expected_loss(self):
        tree = uniform_binary_tree(2)
        loss = LossSpec(
            space=DecisionSpace(("a", "b")),
            horizon=1,
            tables=((np.full(4, 0.3), np.full(4, 0.7)),),
        )
        assert np.all(bayesian_strategy(tree, loss).choices[0] == 0)

    def test_exhaustive_strategy_enumeration(self):
        # Depth-3 binary tree, two steps with one-step impact, two decisions:
        # 2^(2+4) rival strategies; the per-node dominance inequality must
        # hold against all of them, at every node, and so must the expected
        # total loss ordering.
        tree = uniform_binary_tree(3)
        loss = random_loss(tree, 2, 1, 2, seed=2024)
        bayes = bayesian_strategy(tree, loss)
        cond = {
            n: np.stack([expected_losses(tree, loss, n, d) for d in (0, 1)]) for n in (1, 2)
        }
        probs = tree.leaf_probabilities()
        bayes_expected_total = float(np.dot(probs, total_losses(tree, loss, bayes)))
        counts = tree.node_counts
        for bits1 in itertools.product((0, 1), repeat=counts[1]):
            for bits2 in itertools.product((0, 1), repeat=counts[2]):
                rival = Strategy(
                    choices=(np.array(bits1, dtype=int), np.array(bits2, dtype=int))
                )
                for n in (1, 2):
                    mine = cond[n][bayes.choices[n - 1], np.arange(counts[n])]
                    theirs = cond[n][rival.choices[n - 1], np.arange(counts[n])]
                    assert np.all(mine <= theirs + 1e-12)
                rival_total = float(np.dot(probs, total_losses(tree, loss, rival)))
                assert bayes_expected_total <= rival_total + 1e-12

    def test_reordering_decisions_moves_the_tie_break(self):
        tree = uniform_binary_tree(2)
        rng = np.random.default_rng(5)
        tab = rng.uniform(0, 1, size=4)
        # two identical decisions under different orderings
        loss_ab = LossSpec(
            space=DecisionSpace(("a", "b")), horizon=1, tables=((tab, tab.copy()),)
        )
        assert np.all(bayesian_strategy(tree, loss_ab).choices[0] == 0)
        other = rng.uniform(0, 1, size=4)
        loss_mixed = LossSpec(
            space=DecisionSpace(("a", "b")), horizon=1, tables=((other, tab),)
        )
        loss_swapped = LossSpec(
            space=DecisionSpace(("b", "a")), horizon=1, tables=((tab, other),)
        )
        orig = bayesian_strategy(tree, loss_mixed).choices[0]
        swapped = bayesian_strategy(tree, loss_swapped).choices[0]
        # same decisions, permuted indices: choices flip 0 <-> 1 wherever
        # the expected losses differ
        np.testing.assert_array_equal(orig, 1 - swapped)


class TestTotalLoss:
    def test_zero_losses(self):
        tree = uniform_binary_tree(3)
        loss = LossSpec(
            space=DecisionSpace(("a",)),
            horizon=1,
            tables=tuple((np.zeros(tree.node_counts[n + 1]),) for n in (1, 2)),
        )
        strat = Strategy(choices=(np.zeros(2, int), np.zeros(4, int)))
        np.testing.assert_allclose(total_losses(tree, loss, strat), np.zeros(8), atol=1e-15)

    def test_single_step(self):
        tree = uniform_binary_tree(2)
        loss = LossSpec(
            space=DecisionSpace(("a",)),
            horizon=1,
            tables=((np.array([0.25, 0.5, 0.75, 1.0]),),),
        )
        strat = Strategy(choices=(np.zeros(2, int),))
        assert total_loss(tree, loss, strat, leaf=0) == 0.25

    def test_two_step_table_lookups_by_hand(self):
        tree = uniform_binary_tree(3)
        rng = np.random.default_rng(9)
        t1 = (rng.uniform(0, 1, 4), rng.uniform(0, 1, 4))
        t2 = (rng.uniform(0, 1, 8), rng.uniform(0, 1, 8))
        loss = LossSpec(space=DecisionSpace(("a", "b")), horizon=1, tables=(t1, t2))
        strat = Strategy(
            choices=(np.array([0, 1]), np.array([1, 0, 0, 1]))
        )
        # Leaf 5 = binary 101: depth-1 ancestor 1, depth-2 ancestor 2.
        # Step 1 decision at node 1 is 1, loss read at depth-2 node 2;
        # step 2 decision at node 2 is 0, loss read at depth-3 node 5.
        expected = t1[1][2] + t2[0][5]
        assert total_loss(tree, loss, strat, leaf=5) == pytest.approx(expected, abs=1e-15)

    def test_leaf_range_check(self):
        tree = uniform_binary_tree(2)
        loss = random_loss(tree, 1, 1, 2, seed=3)
        strat = Strategy(choices=(np.zeros(2, int),))
        with pytest.raises(ValueError):
            total_loss(tree, loss, strat, leaf=4)

    @given(st.integers(0, 5000))
    @settings(max_examples=50, deadline=None)
    def test_loss_range_bounds(self, seed):
        tree, _ = random_tree(4, 3, seed=seed)
        loss = random_loss(tree, 2, 2, 2, seed=seed + 1)
        strat = random_strategy(tree, loss, seed=seed + 2)
        totals = total_losses(tree, loss, strat)
        assert np.all(totals >= 0.0) and np.all(totals <= 2.0 + 1e-12)


class TestRegretTail:
    def test_zero_against_itself(self):
        tree = uniform_binary_tree(3)
        loss = random_loss(tree, 2, 1, 2, seed=11)
        bayes = bayesian_strategy(tree, loss)
        assert regret_tail(tree, loss, bayes, 1e-9) == 0.0

    def test_zero_beyond_loss_range(self):
        tree = uniform_binary_tree(3)
        loss = random_loss(tree, 2, 1, 2, seed=12)
        alt = random_strategy(tree, loss, seed=13)
        assert regret_tail(tree, loss, alt, loss.n_steps + 0.1) == 0.0

    @given(st.integers(0, 2000))
    @settings(max_examples=60, deadline=None)
    def test_bounded_by_threshold_guarantee(self, seed):
        tree, _ = random_tree(4, 3, seed=seed)
        loss = random_loss(tree, 2, 2, 3, seed=seed + 1)
        alt = adversarial_strategy(tree, loss)
        for eps in (0.1, 0.3, 0.69):
            thr = deviation_threshold(HorizonParams(N=2, K=2, epsilon=eps))
            assert regret_tail(tree, loss, alt, thr) < eps / 2


class TestShiftedSequence:
    def test_identical_strategies_give_zero_sequence(self):
        tree = uniform_binary_tree(3)
        loss = random_loss(tree, 2, 1, 2, seed=21)
        bayes = bayesian_strategy(tree, loss)
        seq = shifted_sequence(tree, loss, bayes)
        assert all(np.allclose(v, 0.0) for v in seq.values)
        report = shifted_deviation_check(tree, loss, bayes)
        assert report.passed
        assert report.max_sum_identity_error < 1e-15

    def test_decision_independent_losses_give_zero_sequence(self):
        tree = uniform_binary_tree(3)
        rng = np.random.default_rng(22)
        shared = tuple(rng.uniform(0, 1, size=tree.node_counts[n + 1]) for n in (1, 2))
        loss = LossSpec(
            space=DecisionSpace(("a", "b")),
            horizon=1,
            tables=tuple((t, t.copy()) for t in shared),
        )
        alt = random_strategy(tree, loss, seed=23)
        seq = shifted_sequence(tree, loss, alt)
        assert all(np.allclose(v, 0.0) for v in seq.values)

    @given(st.integers(0, 3000))
    @settings(max_examples=100, deadline=None)
    def test_checks_pass_on_random_instances(self, seed):
        tree, _ = random_tree(4, 3, seed=seed)
        loss = random_loss(tree, 2, 2, 2, seed=seed + 1)
        alt = random_strategy(tree, loss, seed=seed + 2)
        report = shifted_deviation_check(tree, loss, alt)
        assert report.passed, report.failures
        assert report.max_conditional_mean <= 1e-9

    @given(st.integers(0, 2000))
    @settings(max_examples=40, deadline=None)
    def test_one_sided_deviation_tail_within_budget(self, seed):
        tree, _ = random_tree(5, 2, seed=seed)
        loss = random_loss(tree, 3, 2, 2, seed=seed + 1)
        alt = adversarial_strategy(tree, loss)
        seq = shifted_sequence(tree, loss, alt)
        for eps in (0.1, 0.69):
            thr = deviation_threshold(HorizonParams(N=3, K=2, epsilon=eps))
            assert exact_tail(tree, seq, 2, thr, sided="upper") < eps / 2


class TestBaselines:
    def test_adversarial_maximizes_per_node(self):
        tree = uniform_binary_tree(3)
        loss = random_loss(tree, 2, 1, 2, seed=31)
        adv = adversarial_strategy(tree, loss)
        bayes = bayesian_strategy(tree, loss)
        for n in (1, 2):
            table = np.stack([expected_losses(tree, loss, n, d) for d in (0, 1)])
            idx = np.arange(tree.node_counts[n])
            assert np.all(table[adv.choices[n - 1], idx] >= table[bayes.choices[n - 1], idx])

    def test_random_strategy_is_deterministic_per_seed(self):
        tree = uniform_binary_tree(3)
        loss = random_loss(tree, 2, 1, 3, seed=32)
        a = random_strategy(tree, loss, seed=7)
        b = random_strategy(tree, loss, seed=7)
        assert all(np.array_equal(x, y) for x, y in zip(a.choices, b.choices))

    def test_envelope_lower_bounds_every_strategy(self):
        tree = uniform_binary_tree(3)
        loss = random_loss(tree, 2, 1, 2, seed=33)
        env = clairvoyant_envelope(tree, loss)
        for bits1 in itertools.product((0, 1), repeat=2):
            for bits2 in itertools.product((0, 1), repeat=4):
                strat = Strategy(choices=(np.array(bits1, int), np.array(bits2, int)))
                assert np.all(env <= total_losses(tree, loss, strat) + 1e-12)
