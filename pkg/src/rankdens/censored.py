"""Closed-form statistics of censored rankings under the uniform surrogate."""

from __future__ import annotations

import itertools

from .rankings import RankingError, TiedRanking


def _center(u: TiedRanking, item: int) -> float:
    """2 * P(item precedes a never-ranked item) - 1, zero if item unranked.

    For a ranked item with best position tau and tie-group size phi the
    probability that an unranked item lands ahead of it is
    (tau + (phi-1)/2) / (k+1), with k the number of items ranked in u.
    """
    pos = u.ranked_position(item)
    if pos is None:
        return 0.0
    tau, phi = pos
    c = (tau + (phi - 1) / 2.0) / (u.k + 1)
    return 2.0 * c - 1.0


def pair_pref_prob(u: TiedRanking, i: int, j: int) -> float:
    """P(i precedes j) under the uniform law over permutations consistent
    with u. Five cases depending on which of i, j are ranked."""
    if i == j:
        raise RankingError("pair requires two distinct items")
    n = u.n
    if not (0 <= i < n and 0 <= j < n):
        raise RankingError("item index out of range")
    gi, gj = u.group_index(i), u.group_index(j)
    if gi is not None and gj is not None:
        if gi == gj:
            return 0.5
        return 1.0 if gi < gj else 0.0
    if gi is None and gj is None:
        return 0.5
    if gj is not None:  # only j ranked
        return (1.0 + _center(u, j)) / 2.0
    return 1.0 - (1.0 + _center(u, i)) / 2.0  # only i ranked


def _pair_factor(u: TiedRanking, i: int, j: int) -> float:
    """1 - 2 * pair_pref_prob(u, i, j); antisymmetric in (i, j)."""
    gi, gj = u.group_index(i), u.group_index(j)
    if gi is not None and gj is not None:
        if gi == gj:
            return 0.0
        return -1.0 if gi < gj else 1.0
    if gi is None and gj is None:
        return 0.0
    if gi is not None:
        return _center(u, i)
    return -_center(u, j)


def expected_kendall(s: TiedRanking, r: TiedRanking) -> float:
    """Mean Kendall tau between independent uniform draws from the two
    consistent-permutation sets.

    Iterates only over pairs drawn from the union of ranked items; pairs of
    two never-ranked items contribute nothing and pairs of one ranked item
    with the never-ranked pool collapse to a single multiplied term.
    """
    if s.universe != r.universe:
        raise RankingError("universe mismatch")
    n = s.n
    union = sorted(s.ranked_items() | r.ranked_items())
    total = 0.0
    for i, j in itertools.combinations(union, 2):
        fs = _pair_factor(s, i, j)
        if fs == 0.0:
            continue
        fr = _pair_factor(r, i, j)
        total += fs * fr
    outside = n - len(union)
    if outside:
        for i in union:
            total += outside * _center(s, i) * _center(r, i)
    return n * (n - 1) / 4.0 - total / 2.0
