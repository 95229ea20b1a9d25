"""Finite probability trees: adapted values, lagged conditional means, exact tails.

A tree of depth D realizes a filtration on a finite sample space: the
depth-d nodes are the time-d information sets, a leaf is a full outcome,
and the trivial information available before time 1 is the root.  An
adapted sequence attaches one value to every node of each depth, which is
exactly what measurability with respect to the depth-d partition means.
Conditional expectations are computed by exact backward induction, so tail
probabilities of the deviation statistic

    S = sum_{n=1}^N (Y_n - E(Y_n | F_{n-K}))

come out exact up to float accumulation, and serve as the oracle against
which Monte Carlo estimates (see `sampling`) are judged.

Trees are meant to be treated as immutable after construction.  Desk scale
is about 10^6 leaves for exact enumeration; beyond that, sample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bounds import HorizonParams, deviation_threshold

__all__ = [
    "ProbabilityTree",
    "AdaptedSequence",
    "DeviationBoundCheck",
    "conditional_expectation",
    "deviation_per_leaf",
    "exact_tail",
    "verify_deviation_bound",
    "random_tree",
    "block_process_tree",
]

_PROB_SUM_TOL = 1e-12
_LEAF_SUM_TOL = 1e-9
_VALUE_TOL = 1e-12


@dataclass(frozen=True)
class ProbabilityTree:
    """Rooted tree with branch probabilities; depth-d arrays index depth-d nodes.

    `parents[d-1][i]` is the depth-(d-1) parent of depth-d node i, and
    `branch_probs[d-1][i]` the probability of reaching it from that parent.
    The root (depth 0) is implicit and unique.
    """

    parents: tuple[np.ndarray, ...]
    branch_probs: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        if len(self.parents) != len(self.branch_probs):
            raise ValueError("parents and branch_probs must cover the same depths")
        if not self.parents:
            raise ValueError("tree must have depth at least 1")
        counts = self.node_counts
        for d, (par, pr) in enumerate(zip(self.parents, self.branch_probs), start=1):
            if len(par) != len(pr):
                raise ValueError(f"depth {d}: parent and probability arrays differ in length")
            if len(par) == 0:
                raise ValueError(f"depth {d}: empty level")
            if par.min() < 0 or par.max() >= counts[d - 1]:
                raise ValueError(f"depth {d}: parent index out of range")
            if not np.all(pr > 0):
                raise ValueError(f"depth {d}: branch probabilities must be positive")
            sums = np.bincount(par, weights=pr, minlength=counts[d - 1])
            if np.any(np.abs(sums - 1.0) > _PROB_SUM_TOL):
                bad = int(np.argmax(np.abs(sums - 1.0)))
                raise ValueError(
                    f"depth {d}: branch probabilities at parent {bad} sum to {sums[bad]!r}"
                )
        leaf_total = math.fsum(self.leaf_probabilities().tolist())
        if abs(leaf_total - 1.0) > _LEAF_SUM_TOL:
            raise ValueError(f"leaf probabilities sum to {leaf_total!r}")

    @property
    def depth(self) -> int:
        return len(self.parents)

    @property
    def node_counts(self) -> tuple[int, ...]:
        return (1,) + tuple(len(p) for p in self.parents)

    def node_probabilities(self, depth: int) -> np.ndarray:
        """Unconditional probabilities of the depth-d nodes."""
        if not 0 <= depth <= self.depth:
            raise ValueError(f"depth must lie in [0, {self.depth}], got {depth}")
        probs = np.ones(1)
        for d in range(1, depth + 1):
            probs = probs[self.parents[d - 1]] * self.branch_probs[d - 1]
        return probs

    def leaf_probabilities(self) -> np.ndarray:
        return self.node_probabilities(self.depth)


@dataclass(frozen=True)
class AdaptedSequence:
    """One value per node, per step: `values[n-1]` lives on the depth-n nodes.

    All values are bounded by 1 in absolute value; adaptedness is structural
    (a step-n value is a function of the depth-n node and nothing else).
    """

    values: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        if not self.values:
            raise ValueError("sequence must cover at least one step")
        for n, v in enumerate(self.values, start=1):
            if np.any(np.abs(v) > 1.0 + _VALUE_TOL):
                raise ValueError(f"step {n}: values must be bounded by 1 in absolute value")

    @property
    def n_steps(self) -> int:
        return len(self.values)


def _check_consistent(tree: ProbabilityTree, seq: AdaptedSequence) -> None:
    if seq.n_steps > tree.depth:
        raise ValueError(f"sequence has {seq.n_steps} steps but tree depth is {tree.depth}")
    counts = tree.node_counts
    for n, v in enumerate(seq.values, start=1):
        if len(v) != counts[n]:
            raise ValueError(f"step {n}: {len(v)} values for {counts[n]} depth-{n} nodes")


def _pull_back(tree: ProbabilityTree, values: np.ndarray, depth: int, target: int) -> np.ndarray:
    """Backward induction of node values from `depth` to `target` <= depth."""
    out = values
    for d in range(depth, target, -1):
        out = np.bincount(
            tree.parents[d - 1],
            weights=tree.branch_probs[d - 1] * out,
            minlength=tree.node_counts[d - 1],
        )
    return out


def conditional_expectation(
    tree: ProbabilityTree, seq: AdaptedSequence, n: int, lag: int
) -> np.ndarray:
    """E(Y_n | F_{n-lag}) as one value per depth-max(n-lag, 0) node.

    When the lag reaches past the start of time the conditioning collapses
    to the trivial information set and the result is the single root value,
    the unconditional mean of Y_n.
    """
    _check_consistent(tree, seq)
    if not 1 <= n <= seq.n_steps:
        raise ValueError(f"step n must lie in [1, {seq.n_steps}], got {n}")
    if lag < 1:
        raise ValueError(f"lag must be a positive integer, got {lag}")
    return _pull_back(tree, seq.values[n - 1], n, max(n - lag, 0))


def deviation_per_leaf(tree: ProbabilityTree, seq: AdaptedSequence, lag: int) -> np.ndarray:
    """Deviation S = sum_n (Y_n - E(Y_n|F_{n-lag})), one value per depth-N node.

    N is the sequence length; each of the N terms has magnitude at most 2.
    """
    _check_consistent(tree, seq)
    if lag < 1:
        raise ValueError(f"lag must be a positive integer, got {lag}")
    N = seq.n_steps
    counts = tree.node_counts
    # Conditional means are subtracted where they become known, then pushed
    # down to depth N along with the Y values in a single forward pass.
    pending = [np.zeros(counts[d]) for d in range(N + 1)]
    for n in range(1, N + 1):
        d = max(n - lag, 0)
        pending[d] = pending[d] + conditional_expectation(tree, seq, n, lag)
    acc = -pending[0]
    for d in range(1, N + 1):
        acc = acc[tree.parents[d - 1]] + seq.values[d - 1] - pending[d]
    return acc


def exact_tail(
    tree: ProbabilityTree,
    seq: AdaptedSequence,
    lag: int,
    C: float,
    sided: str = "two_sided",
) -> float:
    """Exact P(|S| >= C) (two_sided) or P(S >= C) (upper) by leaf enumeration."""
    if sided not in ("two_sided", "upper"):
        raise ValueError(f"sided must be 'two_sided' or 'upper', got {sided!r}")
    dev = deviation_per_leaf(tree, seq, lag)
    probs = tree.node_probabilities(seq.n_steps)
    mask = (np.abs(dev) >= C) if sided == "two_sided" else (dev >= C)
    return math.fsum(probs[mask].tolist())


@dataclass(frozen=True)
class DeviationBoundCheck:
    holds: bool
    tail: float
    threshold: float
    epsilon: float


def verify_deviation_bound(
    tree: ProbabilityTree, seq: AdaptedSequence, lag: int, epsilon: float
) -> DeviationBoundCheck:
    """Compare the exact two-sided deviation tail against its guaranteed bound.

    `holds` must come back True on every valid input; a False return would
    falsify either the bound or this engine.
    """
    threshold = deviation_threshold(HorizonParams(N=seq.n_steps, K=lag, epsilon=epsilon))
    tail = exact_tail(tree, seq, lag, threshold, sided="two_sided")
    return DeviationBoundCheck(holds=tail < epsilon, tail=tail, threshold=threshold, epsilon=epsilon)


def random_tree(
    depth: int, max_branching: int, seed: int
) -> tuple[ProbabilityTree, AdaptedSequence]:
    """Seeded random tree with Dirichlet-ish branch weights and Y uniform in [-1, 1].

    Branching per node is uniform on {2, ..., max_branching}; children are
    laid out parent-contiguously.  Deterministic given the seed.
    """
    if depth < 1:
        raise ValueError(f"depth must be at least 1, got {depth}")
    if max_branching < 2:
        raise ValueError(f"max_branching must be at least 2, got {max_branching}")
    rng = np.random.default_rng(seed)
    parents: list[np.ndarray] = []
    branch_probs: list[np.ndarray] = []
    values: list[np.ndarray] = []
    n_nodes = 1
    for _ in range(depth):
        branching = rng.integers(2, max_branching + 1, size=n_nodes)
        par = np.repeat(np.arange(n_nodes), branching)
        weights = rng.exponential(size=len(par)) + 1e-6
        sums = np.bincount(par, weights=weights, minlength=n_nodes)
        parents.append(par)
        branch_probs.append(weights / sums[par])
        n_nodes = len(par)
        values.append(rng.uniform(-1.0, 1.0, size=n_nodes))
    tree = ProbabilityTree(parents=tuple(parents), branch_probs=tuple(branch_probs))
    return tree, AdaptedSequence(values=tuple(values))


def block_process_tree(N: int, K: int) -> tuple[ProbabilityTree, AdaptedSequence]:
    """The law of the block-sign process as an explicit tree of depth N.

    A fresh fair sign is revealed at each block start (a binary split with
    equal probabilities); all other steps are deterministic pass-throughs.
    Node index bit 0 encodes the newest block's sign: 0 is +1, 1 is -1.
    """
    if N < 1 or K < 1 or N % K != 0:
        raise ValueError(f"need K | N with both positive, got N={N}, K={K}")
    parents: list[np.ndarray] = []
    branch_probs: list[np.ndarray] = []
    values: list[np.ndarray] = []
    n_nodes = 1
    for n in range(1, N + 1):
        if (n - 1) % K == 0:
            parents.append(np.repeat(np.arange(n_nodes), 2))
            branch_probs.append(np.full(2 * n_nodes, 0.5))
            n_nodes *= 2
        else:
            parents.append(np.arange(n_nodes))
            branch_probs.append(np.ones(n_nodes))
        values.append(1.0 - 2.0 * (np.arange(n_nodes) % 2))
    tree = ProbabilityTree(parents=tuple(parents), branch_probs=tuple(branch_probs))
    return tree, AdaptedSequence(values=tuple(values))
