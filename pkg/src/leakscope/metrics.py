"""Leakage metrics over trace-ID partitions.

Each metric takes the leaf sizes of a trace-ID tree: the reaching set of n
traces is partitioned into leaves of indistinguishable traces. Mutual
information is measured in bits (log base 2). Guessing entropies count
expected guesses; their upper bound (n + 1) / 2 is attained when all traces
fall into one leaf.

The leakage score rescales minimal guessing entropy linearly onto 0..100,
with 0 at (n + 1) / 2 (no leakage) and 100 at 1 (some trace is unique).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence


class MetricContractError(ValueError):
    pass


def _check_partition(leaf_sizes: Sequence[int], n: int) -> None:
    if n < 1:
        raise MetricContractError(f"need at least one trace, got n={n}")
    if not leaf_sizes or any(s < 1 for s in leaf_sizes):
        raise MetricContractError(f"leaves must be nonempty: {leaf_sizes}")
    if sum(leaf_sizes) != n:
        raise MetricContractError(
            f"partition sums to {sum(leaf_sizes)}, expected n={n}"
        )


def mutual_information(leaf_sizes: Sequence[int], n: int) -> float:
    """Average bits learned per observed trace: (1/n) * sum |L| * log2(n/|L|)."""
    _check_partition(leaf_sizes, n)
    return sum(s * math.log2(n / s) for s in leaf_sizes) / n


def conditional_guessing_entropy(leaf_sizes: Sequence[int], n: int) -> float:
    """Expected guesses to identify the trace: (1/2n) * sum |L| * (|L| + 1)."""
    _check_partition(leaf_sizes, n)
    return sum(s * (s + 1) for s in leaf_sizes) / (2 * n)


def minimal_guessing_entropy(leaf_sizes: Sequence[int]) -> float:
    """Guesses needed for the most identifying trace: min (|L| + 1) / 2."""
    if not leaf_sizes or any(s < 1 for s in leaf_sizes):
        raise MetricContractError(f"leaves must be nonempty: {leaf_sizes}")
    return min((s + 1) / 2 for s in leaf_sizes)


def leakage_score(min_ge: float, n: int) -> float:
    """Rescale minimal GE onto 0..100 (0 = no leakage, 100 = unique trace)."""
    if n < 2:
        raise MetricContractError("leakage score undefined for fewer than 2 traces")
    upper = (n + 1) / 2
    if not 1.0 <= min_ge <= upper + 1e-12:
        raise MetricContractError(f"min GE {min_ge} outside [1, {upper}] for n={n}")
    if min_ge >= upper:
        return 0.0
    if min_ge <= 1.0:
        return 100.0
    return 100.0 * (upper - min_ge) / (upper - 1.0)


@dataclass(frozen=True)
class MetricStats:
    mean: float
    minimum: float
    maximum: float
    stddev: float  # population standard deviation


def summarize(values: Sequence[float]) -> MetricStats:
    """Mean / min / max / population stddev, so a single value has stddev 0."""
    if not values:
        raise MetricContractError("no values to aggregate")
    mean = sum(values) / len(values)
    var = sum((v - mean) ** 2 for v in values) / len(values)
    return MetricStats(mean, min(values), max(values), math.sqrt(var))


@dataclass(frozen=True)
class TreeMetrics:
    """Metrics of one trace-ID tree (one invocation of the enclosing context)."""

    n: int
    leaf_sizes: tuple[int, ...]
    mi: float
    cond_ge: float
    min_ge: float
    score: float


def evaluate_tree(leaf_sizes: Sequence[int]) -> TreeMetrics:
    n = sum(leaf_sizes)
    mi = mutual_information(leaf_sizes, n)
    cge = conditional_guessing_entropy(leaf_sizes, n)
    mge = minimal_guessing_entropy(leaf_sizes)
    # Single-leaf trees (and single-trace contexts) carry no leakage; the
    # score formula itself refuses n < 2.
    score = 0.0 if len(leaf_sizes) == 1 or n < 2 else leakage_score(mge, n)
    return TreeMetrics(n, tuple(leaf_sizes), mi, cge, mge, score)
