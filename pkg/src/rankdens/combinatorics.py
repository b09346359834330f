"""Kendall tau, the inversion-count distribution, and kernel normalization.

The distribution of Kendall tau under the uniform measure is computed by
the generating-function recursion, stored normalized by n! so that the
table is a probability mass function usable at large n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .rankings import Permutation


class CombinatoricsError(ValueError):
    pass


def kendall_tau(pi: Permutation, sigma: Permutation) -> int:
    """Number of item pairs ordered oppositely by the two permutations."""
    if pi.n != sigma.n:
        raise CombinatoricsError("permutation size mismatch")
    pos = pi.positions()
    seq = [pos[item] for item in sigma.order]
    return _count_inversions(seq)


def _count_inversions(seq) -> int:
    # merge sort; O(n log n)
    n = len(seq)
    if n < 2:
        return 0
    mid = n // 2
    left, right = list(seq[:mid]), list(seq[mid:])
    inv = _count_inversions(left) + _count_inversions(right)
    left.sort()
    right.sort()
    i = j = 0
    while i < len(left) and j < len(right):
        if left[i] <= right[j]:
            i += 1
        else:
            inv += len(left) - i
            j += 1
    return inv


@dataclass(frozen=True)
class MahonianTable:
    """mass[t] = (# permutations at tau-distance t from a fixed one) / n!"""

    n: int
    mass: np.ndarray

    @property
    def max_distance(self) -> int:
        return self.n * (self.n - 1) // 2

    def unnormalized(self) -> np.ndarray:
        """Raw coefficient counts of G_n; exact only for small n."""
        if self.n > 18:
            raise CombinatoricsError("raw counts overflow float precision")
        return np.rint(self.mass * math.factorial(self.n)).astype(np.int64)


def mahonian_distribution(n: int) -> MahonianTable:
    """Normalized coefficients of prod_{j=1}^{n-1} (1 + z + ... + z^j).

    Incremental recursion with a sliding-window prefix sum: extending from
    j-1 to j items convolves with a length-j uniform window, O(1) per
    coefficient, O(n^3) total.
    """
    if n < 1:
        raise CombinatoricsError("n must be >= 1")
    g = np.ones(1)
    for j in range(2, n + 1):
        length = len(g) + j - 1
        cs = np.concatenate(([0.0], np.cumsum(g)))
        hi = np.minimum(np.arange(1, length + 1), len(g))
        lo = np.maximum(np.arange(1, length + 1) - j, 0)
        g = (cs[hi] - cs[lo]) / j
    return MahonianTable(n, g)


@dataclass(frozen=True)
class TriangularNormalization:
    """Normalization of the triangular kernel, stored as C(h)/n!.

    mode "exact-support": weight (1 - t/h) on t < h, zero beyond.
    mode "modified": weight (1 - t/h) everywhere, possibly negative at
    large distances; the normalizer has the closed form 1 - n(n-1)/(4h).
    """

    n: int
    h: float
    mode: str
    normC: float


MODES = ("exact-support", "modified")


def triangular_normalization(
    n: int, h: float, mode: str = "modified", table: MahonianTable | None = None
) -> TriangularNormalization:
    if mode not in MODES:
        raise CombinatoricsError(f"unknown kernel mode {mode!r}")
    if h <= 0:
        raise CombinatoricsError("bandwidth must be positive")
    if mode == "modified":
        quarter = n * (n - 1) / 4.0
        if h <= quarter:
            raise CombinatoricsError(
                f"modified kernel requires h > n(n-1)/4 = {quarter}"
            )
        normC = 1.0 - quarter / h
    else:
        if table is None:
            table = mahonian_distribution(n)
        elif table.n != n:
            raise CombinatoricsError("table size mismatch")
        t = np.arange(table.max_distance + 1)
        support = t < h
        normC = float(np.sum((1.0 - t[support] / h) * table.mass[support]))
    if normC <= 0:
        raise CombinatoricsError(f"non-positive normalization {normC}")
    return TriangularNormalization(n, float(h), mode, normC)


def kernel_weight(t: float, norm: TriangularNormalization) -> float:
    """Per-permutation kernel weight at distance t: (1 - t/h) / (n! normC)."""
    max_d = norm.n * (norm.n - 1) / 2
    if t < 0 or t > max_d:
        raise CombinatoricsError(f"distance {t} out of range 0..{max_d}")
    shape = 1.0 - t / norm.h
    if norm.mode == "exact-support" and t >= norm.h:
        return 0.0
    return shape * math.exp(-math.lgamma(norm.n + 1)) / norm.normC


def normalization_from_counts(counts: np.ndarray, h: int) -> float:
    """C(h) from the generating-function identity, for integer h.

    [z^h]H_n is the cumulative coefficient sum; [z^{h-1}]G'_n/(1-z) is the
    cumulative sum of t * counts[t]. Takes raw coefficient counts so the
    caller may supply an independently computed histogram.
    """
    if h < 1 or int(h) != h:
        raise CombinatoricsError("the coefficient identity needs integer h >= 1")
    h = int(h)
    t = np.arange(len(counts))
    upto = t <= min(h, len(counts) - 1)
    head = float(np.sum(counts[upto]))
    weighted = float(np.sum(t[upto] * counts[upto]))
    return head - weighted / h
