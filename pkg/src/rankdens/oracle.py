"""Brute-force references and synthetic data generation.

Everything here enumerates permutations directly and is therefore exact up
to floating-point summation; the closed-form implementations elsewhere are
tested against these.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .rankings import ItemUniverse, Permutation, RankingError, TiedRanking

BRUTE_BOUND = 8
_DIST_MATRIX_BOUND = 7


class PermTable:
    """All permutations of S_n with position matrix and distance matrix."""

    def __init__(self, n: int):
        if n > BRUTE_BOUND:
            raise RankingError(f"brute force requires n <= {BRUTE_BOUND}")
        self.n = n
        self.perms = [Permutation(p) for p in itertools.permutations(range(n))]
        self.pos = np.array([p.positions() for p in self.perms], dtype=np.int16)
        self.index = {p.order: i for i, p in enumerate(self.perms)}
        # inversion count of each permutation relative to the identity
        d0 = np.zeros(len(self.perms), dtype=np.int16)
        for a in range(n - 1):
            for b in range(a + 1, n):
                d0 += self.pos[:, a] > self.pos[:, b]
        self.dist_to_identity = d0
        self._dist: Optional[np.ndarray] = None

    @property
    def dist(self) -> np.ndarray:
        """Pairwise Kendall tau matrix; materialized lazily (n <= 7)."""
        if self._dist is None:
            if self.n > _DIST_MATRIX_BOUND:
                raise RankingError("pairwise distance matrix too large")
            m = np.zeros((len(self.perms), len(self.perms)), dtype=np.int16)
            for a in range(self.n - 1):
                for b in range(a + 1, self.n):
                    s = np.sign(self.pos[:, a] - self.pos[:, b]).astype(np.int16)
                    m += (s[:, None] * s[None, :]) < 0
            self._dist = m
        return self._dist

    def consistent_indices(self, r: TiedRanking) -> np.ndarray:
        """Indices of permutations consistent with the tied ranking."""
        ok = np.ones(len(self.perms), dtype=bool)
        ranked = sorted(r.ranked_items())
        for i, j in itertools.combinations(ranked, 2):
            gi, gj = r.group_index(i), r.group_index(j)
            if gi == gj:
                continue
            if gi < gj:
                ok &= self.pos[:, i] < self.pos[:, j]
            else:
                ok &= self.pos[:, j] < self.pos[:, i]
        return np.nonzero(ok)[0]


@lru_cache(maxsize=8)
def perm_table(n: int) -> PermTable:
    return PermTable(n)


def _kernel_values(n: int, h: float, mode: str) -> np.ndarray:
    """Per-permutation kernel weight indexed by distance, via brute C."""
    norm_c = brute_normalization(n, h, mode)  # C(h)/n!
    d = np.arange(n * (n - 1) // 2 + 1, dtype=float)
    w = 1.0 - d / h
    if mode == "exact-support":
        w[d >= h] = 0.0
    return w / (norm_c * math.factorial(n))


def brute_normalization(n: int, h: float, mode: str = "exact-support") -> float:
    """C(h)/n! by direct summation over all n! permutations."""
    pt = perm_table(n)
    d = pt.dist_to_identity.astype(float)
    w = 1.0 - d / h
    if mode == "exact-support":
        w[d >= h] = 0.0
    return float(np.mean(w))


def brute_pair_pref(u: TiedRanking, i: int, j: int) -> float:
    """P(i precedes j) counted over the enumerated consistent set."""
    pt = perm_table(u.n)
    idx = pt.consistent_indices(u)
    return float(np.mean(pt.pos[idx, i] < pt.pos[idx, j]))


def brute_expected_kendall(s: TiedRanking, r: TiedRanking) -> float:
    """Double average of Kendall tau over the two consistent sets."""
    if s.universe != r.universe:
        raise RankingError("universe mismatch")
    pt = perm_table(s.n)
    si = pt.consistent_indices(s)
    ri = pt.consistent_indices(r)
    return float(pt.dist[np.ix_(si, ri)].mean())


def brute_event_prob(
    rankings: Sequence[TiedRanking], h: float, mode: str, r: TiedRanking
) -> float:
    """Triple sum of the estimator with uniform surrogate, by enumeration."""
    if not rankings:
        raise RankingError("empty training set")
    n = r.n
    pt = perm_table(n)
    kv = _kernel_values(n, h, mode)
    ri = pt.consistent_indices(r)
    total = 0.0
    for s in rankings:
        si = pt.consistent_indices(s)
        total += float(kv[pt.dist[np.ix_(ri, si)]].sum()) / len(si)
    return total / len(rankings)


def brute_full_distribution(
    rankings: Sequence[TiedRanking], h: float, mode: str
) -> np.ndarray:
    """Estimated probability of every permutation of S_n, in PermTable order."""
    n = rankings[0].n
    pt = perm_table(n)
    kv = _kernel_values(n, h, mode)
    out = np.zeros(len(pt.perms))
    for s in rankings:
        si = pt.consistent_indices(s)
        out += kv[pt.dist[:, si]].mean(axis=1)
    return out / len(rankings)


# -- synthetic data ------------------------------------------------------


def sample_mallows(
    center: Permutation, concentration: float, rng: np.random.Generator
) -> Permutation:
    """Draw from the Mallows model by the repeated-insertion construction.

    The j-th most central-preferred item is inserted so that it creates v
    new inversions with probability proportional to exp(-concentration*v).
    """
    order: list[int] = []
    for idx, item in enumerate(center.order):
        if concentration <= 0:
            probs = np.full(idx + 1, 1.0 / (idx + 1))
        else:
            logits = -concentration * np.arange(idx + 1, dtype=float)
            logits -= logits.max()
            probs = np.exp(logits)
            probs /= probs.sum()
        v = rng.choice(idx + 1, p=probs)
        order.insert(idx - v, item)
    return Permutation(tuple(order))


@dataclass(frozen=True)
class MixtureConfig:
    """Mallows-mixture generator with independent-item censoring.

    Each user draws a component, a latent permutation, observes each item
    independently with probability rho (at least one item is always kept),
    and reports the observed items grouped into ties by consecutive blocks
    of ``tie_block`` positions (1 = no ties).
    """

    universe: ItemUniverse
    centers: tuple[Permutation, ...]
    concentrations: tuple[float, ...]
    weights: tuple[float, ...]
    rho: float = 1.0
    tie_block: int = 1

    def __post_init__(self):
        if not (len(self.centers) == len(self.concentrations) == len(self.weights)):
            raise ValueError("component fields must have equal length")
        if not self.weights or any(w < 0 for w in self.weights):
            raise ValueError("invalid component weights")
        if abs(sum(self.weights) - 1.0) > 1e-9:
            raise ValueError("component weights must sum to 1")
        if not 0 < self.rho <= 1:
            raise ValueError("rho must be in (0, 1]")
        if self.tie_block < 1:
            raise ValueError("tie_block must be >= 1")


def synthesize(
    config: MixtureConfig, m: int, seed: int, return_latent: bool = False
):
    """Reproducible corpus of m censored rankings (optionally with the
    latent permutations)."""
    rng = np.random.default_rng(seed)
    u = config.universe
    rankings = []
    latents = []
    for _ in range(m):
        comp = rng.choice(len(config.weights), p=np.asarray(config.weights))
        pi = sample_mallows(config.centers[comp], config.concentrations[comp], rng)
        keep = rng.random(u.n) < config.rho
        if not keep.any():
            keep[rng.integers(u.n)] = True
        observed = [item for item in pi.order if keep[item]]
        groups = [
            tuple(observed[i : i + config.tie_block])
            for i in range(0, len(observed), config.tie_block)
        ]
        rankings.append(TiedRanking(u, tuple(groups)))
        latents.append(pi)
    if return_latent:
        return rankings, latents
    return rankings


def random_tied_ranking(
    rng: np.random.Generator,
    universe: ItemUniverse,
    min_ranked: int = 1,
    level_labels: bool = False,
) -> TiedRanking:
    """Uniform-ish random tied incomplete ranking, for tests."""
    n = universe.n
    k = int(rng.integers(min_ranked, n + 1))
    items = rng.permutation(n)[:k]
    n_groups = int(rng.integers(1, k + 1))
    cuts = sorted(rng.choice(np.arange(1, k), size=n_groups - 1, replace=False)) if n_groups > 1 else []
    bounds = [0, *cuts, k]
    groups = tuple(
        tuple(int(x) for x in items[a:b]) for a, b in zip(bounds, bounds[1:])
    )
    labels = None
    if level_labels:
        top = len(groups) + int(rng.integers(0, 3))
        labels = tuple(range(top, top - len(groups), -1))
    return TiedRanking(universe, groups, labels)
