"""Tied, incomplete rankings and their consistent-permutation semantics."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

ENUMERATION_BOUND = 8

GROUP_SEPARATORS = ("|", "≺")  # "|" or the precedes symbol


class RankingError(ValueError):
    """Invalid ranking construction or operation."""


@dataclass(frozen=True)
class ItemUniverse:
    """A dense 0..n-1 index space with optional external labels.

    When ``labels`` is None, external labels default to the 1-based item
    numbers "1".."n".
    """

    n: int
    labels: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        if self.n < 1:
            raise RankingError(f"universe size must be positive, got {self.n}")
        if self.labels is not None:
            if len(self.labels) != self.n:
                raise RankingError("labels length must equal universe size")
            if len(set(self.labels)) != self.n:
                raise RankingError("labels must be unique")

    def label_of(self, index: int) -> str:
        if self.labels is not None:
            return self.labels[index]
        return str(index + 1)

    def index_of(self, label: str) -> int:
        label = label.strip()
        if self.labels is not None:
            try:
                return self.labels.index(label)
            except ValueError:
                raise RankingError(f"unknown item label {label!r}") from None
        try:
            idx = int(label) - 1
        except ValueError:
            raise RankingError(f"unknown item label {label!r}") from None
        if not 0 <= idx < self.n:
            raise RankingError(f"item label {label!r} out of range 1..{self.n}")
        return idx


@dataclass(frozen=True)
class Permutation:
    """A total order; ``order[p]`` is the item at position p+1 (best first)."""

    order: tuple[int, ...]

    def __post_init__(self):
        n = len(self.order)
        if sorted(self.order) != list(range(n)):
            raise RankingError("permutation must be a bijection on 0..n-1")

    @property
    def n(self) -> int:
        return len(self.order)

    def position(self, item: int) -> int:
        """1-based rank of ``item`` (1 = most preferred)."""
        return self.order.index(item) + 1

    def positions(self) -> tuple[int, ...]:
        """positions()[i] is the 1-based rank of item i."""
        pos = [0] * self.n
        for p, item in enumerate(self.order):
            pos[item] = p + 1
        return tuple(pos)


@dataclass(frozen=True)
class TiedRanking:
    """An ordered sequence of disjoint tie groups, most preferred first.

    Doubles as an observation (a user's censored preference) and as an
    event (the set of all permutations consistent with it). Items not in
    any group are unranked and carry no constraints.
    """

    universe: ItemUniverse
    groups: tuple[tuple[int, ...], ...]
    level_labels: Optional[tuple[int, ...]] = None
    _group_of: dict = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        if not self.groups:
            raise RankingError("ranking needs at least one group")
        seen: dict[int, int] = {}
        norm = []
        for gi, group in enumerate(self.groups):
            if not group:
                raise RankingError("empty tie group")
            for item in group:
                if not 0 <= item < self.universe.n:
                    raise RankingError(f"item index {item} out of range")
                if item in seen:
                    raise RankingError(
                        f"item {self.universe.label_of(item)} appears in "
                        "more than one group"
                    )
                seen[item] = gi
            norm.append(tuple(sorted(group)))
        object.__setattr__(self, "groups", tuple(norm))
        object.__setattr__(self, "_group_of", seen)
        if self.level_labels is not None:
            if len(self.level_labels) != len(self.groups):
                raise RankingError("one level label per group required")
            for a, b in zip(self.level_labels, self.level_labels[1:]):
                if a <= b:
                    raise RankingError("level labels must be strictly decreasing")

    # -- basic structure -------------------------------------------------

    @property
    def n(self) -> int:
        return self.universe.n

    @property
    def k(self) -> int:
        """Number of ranked items."""
        return sum(len(g) for g in self.groups)

    def ranked_items(self) -> frozenset[int]:
        return frozenset(self._group_of)

    def group_index(self, item: int) -> Optional[int]:
        return self._group_of.get(item)

    def is_unconstrained(self) -> bool:
        """True when every permutation is consistent (a single tie group)."""
        return len(self.groups) == 1

    def ranked_position(self, item: int) -> Optional[tuple[int, int]]:
        """(tau, phi): minimal position among ranked items and tie-group size.

        Returns None for unranked items. tau counts positions only over the
        ranked items, i.e. 1 + total size of strictly better groups.
        """
        if not 0 <= item < self.n:
            raise RankingError(f"item index {item} out of range")
        gi = self._group_of.get(item)
        if gi is None:
            return None
        tau = 1 + sum(len(self.groups[j]) for j in range(gi))
        return tau, len(self.groups[gi])

    def log_consistent_count(self) -> float:
        """log of the number of permutations consistent with this ranking."""
        total = math.lgamma(self.n + 1) - math.lgamma(self.k + 1)
        for g in self.groups:
            total += math.lgamma(len(g) + 1)
        return total

    # -- relations -------------------------------------------------------

    def implies(self, other: "TiedRanking") -> bool:
        """True iff every permutation consistent with self satisfies other."""
        if self.universe != other.universe:
            raise RankingError("universe mismatch")
        for item in other._group_of:
            if item not in self._group_of:
                return False
        items = sorted(other._group_of)
        for i, j in itertools.combinations(items, 2):
            gi, gj = other._group_of[i], other._group_of[j]
            if gi == gj:
                continue  # tie in other imposes no constraint
            si, sj = self._group_of[i], self._group_of[j]
            if (gi < gj) != (si < sj) or si == sj:
                return False
        return True

    # -- editing ---------------------------------------------------------

    def insert_item(
        self,
        item: int,
        *,
        group: Optional[int] = None,
        gap: Optional[int] = None,
        level: Optional[int] = None,
    ) -> "TiedRanking":
        """Insert an unranked item, by tie group, by gap, or by level.

        Exactly one of ``group`` (join existing group), ``gap`` (new
        singleton group at gap position 0..k) or ``level`` (join/create the
        group with that level label) must be given.
        """
        if not 0 <= item < self.n:
            raise RankingError(f"item index {item} out of range")
        if item in self._group_of:
            raise RankingError(f"item {self.universe.label_of(item)} already ranked")
        chosen = [x is not None for x in (group, gap, level)]
        if sum(chosen) != 1:
            raise RankingError("exactly one of group, gap, level must be given")

        groups = [list(g) for g in self.groups]
        labels = list(self.level_labels) if self.level_labels is not None else None

        if group is not None:
            if not 0 <= group < len(groups):
                raise RankingError(f"group index {group} out of range")
            groups[group].append(item)
        elif gap is not None:
            if not 0 <= gap <= len(groups):
                raise RankingError(f"gap position {gap} out of range")
            groups.insert(gap, [item])
            if labels is not None:
                raise RankingError("gap insertion undefined with level labels; "
                                   "insert by level instead")
        else:
            if labels is None:
                raise RankingError("ranking has no level labels")
            if level in labels:
                groups[labels.index(level)].append(item)
            else:
                pos = 0
                while pos < len(labels) and labels[pos] > level:
                    pos += 1
                groups.insert(pos, [item])
                labels.insert(pos, level)
        return TiedRanking(
            self.universe,
            tuple(tuple(g) for g in groups),
            tuple(labels) if labels is not None else None,
        )

    # -- enumeration -----------------------------------------------------

    def consistent(self, perm: Permutation) -> bool:
        last = -1
        for item in perm.order:
            gi = self._group_of.get(item)
            if gi is None:
                continue
            if gi < last:
                return False
            last = max(last, gi)
        return True

    def enumerate_consistent(self, bound: int = ENUMERATION_BOUND) -> list[Permutation]:
        if self.n > bound:
            raise RankingError(
                f"enumeration requires n <= {bound}, got n = {self.n}"
            )
        return [
            Permutation(order)
            for order in itertools.permutations(range(self.n))
            if self.consistent(Permutation(order))
        ]

    def __str__(self) -> str:
        return format_ranking(self)


def parse_ranking(
    text: str,
    universe: ItemUniverse,
    level_labels: Optional[Sequence[int]] = None,
) -> TiedRanking:
    """Parse "3|2|1,4" / "3 ≺ 2 ≺ 1,4" notation into a TiedRanking."""
    normalized = text
    for sep in GROUP_SEPARATORS[1:]:
        normalized = normalized.replace(sep, "|")
    groups = []
    for chunk in normalized.split("|"):
        labels = [p for p in (s.strip() for s in chunk.split(",")) if p]
        if not labels:
            raise RankingError(f"empty group in ranking {text!r}")
        groups.append(tuple(universe.index_of(lbl) for lbl in labels))
    return TiedRanking(
        universe,
        tuple(groups),
        tuple(level_labels) if level_labels is not None else None,
    )


def format_ranking(r: TiedRanking) -> str:
    return "|".join(
        ",".join(r.universe.label_of(i) for i in g) for g in r.groups
    )


def project_ranking(
    r: TiedRanking, items: Sequence[int], universe: Optional[ItemUniverse] = None
) -> Optional[TiedRanking]:
    """Restrict a ranking to ``items``, reindexed to a smaller universe.

    Returns None when no ranked item survives. ``items[j]`` becomes item j
    of the sub-universe; labels carry over.
    """
    if universe is None:
        if tuple(items) == tuple(range(r.universe.n)):
            universe = r.universe
        else:
            universe = ItemUniverse(
                len(items), tuple(r.universe.label_of(i) for i in items)
            )
    new_index = {item: j for j, item in enumerate(items)}
    groups = []
    labels = []
    for gi, g in enumerate(r.groups):
        kept = tuple(new_index[i] for i in g if i in new_index)
        if kept:
            groups.append(kept)
            if r.level_labels is not None:
                labels.append(r.level_labels[gi])
    if not groups:
        return None
    return TiedRanking(
        universe, tuple(groups), tuple(labels) if labels else None
    )


def chain_ranking(universe: ItemUniverse, items: Iterable[int]) -> TiedRanking:
    """The event 'items in this strict order, everything else unranked'."""
    return TiedRanking(universe, tuple((i,) for i in items))


def pair_ranking(universe: ItemUniverse, i: int, j: int) -> TiedRanking:
    """The event i preferred to j."""
    return TiedRanking(universe, ((i,), (j,)))


def full_group_ranking(universe: ItemUniverse) -> TiedRanking:
    """The unconstrained event: all items in one tie group."""
    return TiedRanking(universe, (tuple(range(universe.n)),))
