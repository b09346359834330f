"""Kernel density estimation over preference events.

The fitted model is memory-based: it stores the training rankings plus
padded per-item statistics that let event probabilities be evaluated by
the expected-Kendall closed form in O(m k^2), where k counts the items
ranked in the event and in a training ranking.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .combinatorics import (
    MahonianTable,
    TriangularNormalization,
    mahonian_distribution,
    triangular_normalization,
)
from .rankings import (
    ENUMERATION_BOUND,
    ItemUniverse,
    Permutation,
    RankingError,
    TiedRanking,
    chain_ranking,
    format_ranking,
    parse_ranking,
    project_ranking,
)

LIKELIHOOD_FLOOR = 1e-12


class EstimatorError(ValueError):
    pass


def default_bandwidth(n: int) -> float:
    """n(n-1)/2: the largest possible distance, keeping modified-kernel
    weights non-negative everywhere."""
    return n * (n - 1) / 2.0


@dataclass(frozen=True)
class EventProbability:
    value: float
    log_value: float
    negative: bool = False

    def __float__(self) -> float:
        return self.value


@dataclass(frozen=True)
class _SubsetStats:
    """Training-side pair statistics restricted to an item subset.

    fbar[x, y] is the training mean of 1 - 2*P(item x precedes item y |
    training ranking), antisymmetric. wbar[x] is the mean, over training
    rankings, of the summed pair factor between subset item x and every
    item outside the subset.
    """

    items: tuple[int, ...]
    fbar: np.ndarray
    wbar: np.ndarray


class KernelModel:
    """Triangular-kernel smoother over censored rankings."""

    def __init__(
        self,
        universe: ItemUniverse,
        training: Sequence[TiedRanking],
        h: float,
        mode: str,
        norm: TriangularNormalization,
    ):
        self.universe = universe
        self.training = tuple(training)
        self.h = float(h)
        self.mode = mode
        self.norm = norm
        self.m = len(self.training)
        self.logfact = np.concatenate(
            ([0.0], np.cumsum(np.log(np.arange(1, universe.n + 1))))
        )
        self._build_arrays()
        self._stats_cache: dict[tuple[int, ...], _SubsetStats] = {}

    # -- construction ------------------------------------------------------

    def _build_arrays(self) -> None:
        n = self.universe.n
        kmax = max(r.k for r in self.training)
        m = self.m
        self._items = np.full((m, kmax), n, dtype=np.int64)  # n = pad sentinel
        self._grp = np.zeros((m, kmax))
        self._g = np.zeros((m, kmax))
        self._scnt = np.zeros((m, kmax))
        self._valid = np.zeros((m, kmax), dtype=bool)
        self._k = np.zeros(m, dtype=np.int64)
        self._gsum = np.zeros(m)
        for row, r in enumerate(self.training):
            k = r.k
            self._k[row] = k
            col = 0
            below = 0
            for gi, group in enumerate(r.groups):
                size = len(group)
                above = k - below - size
                tau = below + 1
                c = (tau + (size - 1) / 2.0) / (k + 1)
                for item in group:
                    self._items[row, col] = item
                    self._grp[row, col] = gi
                    self._g[row, col] = 2.0 * c - 1.0
                    self._scnt[row, col] = below - above
                    self._valid[row, col] = True
                    col += 1
                below += size
            self._gsum[row] = self._g[row, : col].sum()

    # -- subset statistics ---------------------------------------------------

    def _subset_stats(self, items: tuple[int, ...]) -> _SubsetStats:
        cached = self._stats_cache.get(items)
        if cached is not None:
            return cached
        n = self.universe.n
        s = len(items)
        m = self.m
        sub_of = np.full(n + 1, -1, dtype=np.int64)
        sub_of[list(items)] = np.arange(s)

        fbar = np.zeros((s, s))
        wbar = np.zeros(s)
        chunk = max(1, int(4e6 / max(s * s, 1)))
        for start in range(0, m, chunk):
            stop = min(m, start + chunk)
            rows = stop - start
            items_c = self._items[start:stop]
            sidx = sub_of[items_c]
            inmask = (sidx >= 0) & self._valid[start:stop]

            present = np.zeros((rows, s), dtype=bool)
            grp_d = np.zeros((rows, s))
            g_d = np.zeros((rows, s))
            scnt_d = np.zeros((rows, s))
            rr, cc = np.nonzero(inmask)
            dest = sidx[rr, cc]
            present[rr, dest] = True
            grp_d[rr, dest] = self._grp[start:stop][rr, cc]
            g_d[rr, dest] = self._g[start:stop][rr, cc]
            scnt_d[rr, dest] = self._scnt[start:stop][rr, cc]

            both = present[:, :, None] & present[:, None, :]
            # f(x, y) = -1 when x sits in an earlier (preferred) group than y
            sign = np.sign(grp_d[:, :, None] - grp_d[:, None, :])
            xonly = present[:, :, None] & ~present[:, None, :]
            yonly = ~present[:, :, None] & present[:, None, :]
            f = np.where(both, sign, 0.0)
            ss_in = f.sum(axis=2)  # sum over subset partners, both-ranked part
            f = f + np.where(xonly, g_d[:, :, None], 0.0)
            f = f - np.where(yonly, g_d[:, None, :], 0.0)
            fbar += f.sum(axis=0)

            k_rows = self._k[start:stop].astype(float)
            r_in = present.sum(axis=1).astype(float)
            r_out = k_rows - r_in
            unranked_out = n - s - r_out
            g_in = g_d.sum(axis=1)
            w_ranked = scnt_d - ss_in + unranked_out[:, None] * g_d
            w_unranked = -(self._gsum[start:stop] - g_in)
            w = np.where(present, w_ranked, w_unranked[:, None])
            wbar += w.sum(axis=0)

        fbar /= m
        wbar /= m
        np.fill_diagonal(fbar, 0.0)
        stats = _SubsetStats(items, fbar, wbar)
        if len(self._stats_cache) >= 16:
            self._stats_cache.pop(next(iter(self._stats_cache)))
        self._stats_cache[items] = stats
        return stats

    # -- event scoring ---------------------------------------------------

    def _log_set_fraction(self, r: TiedRanking) -> float:
        """log(|R| / n!) without materializing factorials."""
        total = -self.logfact[r.k]
        for g in r.groups:
            total += self.logfact[len(g)]
        return float(total)

    def _event_value_modified(self, r: TiedRanking) -> float:
        n = self.universe.n
        quarter = n * (n - 1) / 4.0
        if r.is_unconstrained():
            return (1.0 - quarter / self.h) / self.norm.normC
        items = tuple(sorted(r.ranked_items()))
        stats = self._subset_stats(items)
        s = len(items)

        grp_r = np.zeros(s)
        g_r = np.zeros(s)
        k = r.k
        for x, item in enumerate(items):
            tau, phi = r.ranked_position(item)
            grp_r[x] = r.group_index(item)
            g_r[x] = 2.0 * (tau + (phi - 1) / 2.0) / (k + 1) - 1.0
        # f_r(x, y) = -1 when x sits in an earlier group of the event
        f_r = np.sign(grp_r[:, None] - grp_r[None, :])
        np.fill_diagonal(f_r, 0.0)
        inner = 0.5 * float(np.sum(stats.fbar * f_r))
        inner += float(np.dot(g_r, stats.wbar))
        e_mean = quarter - 0.5 * inner
        return math.exp(self._log_set_fraction(r)) * (
            1.0 - e_mean / self.h
        ) / self.norm.normC

    def event_prob(self, r: TiedRanking) -> EventProbability:
        """Estimated probability of the event r (Kendall closed form in
        modified mode; direct enumeration in exact-support mode)."""
        if r.universe != self.universe:
            raise EstimatorError("event universe differs from model universe")
        if self.mode == "modified":
            value = self._event_value_modified(r)
        else:
            if self.universe.n > ENUMERATION_BOUND:
                raise EstimatorError(
                    "exact-support mode requires n <= "
                    f"{ENUMERATION_BOUND} (enumeration)"
                )
            from . import oracle

            value = oracle.brute_event_prob(self.training, self.h, self.mode, r)
        negative = value < 0
        log_value = math.log(value) if value > 0 else -math.inf
        return EventProbability(value, log_value, negative)

    def subset_stats(self, items: Sequence[int]) -> _SubsetStats:
        """Training pair statistics for an item subset (cached).

        Lets callers score many events over the same subset without
        re-touching the training arrays per event."""
        return self._subset_stats(tuple(items))

    def chain_prob(self, stats: _SubsetStats, chain: Sequence[int]) -> float:
        """Probability of the strict chain event chain[0] < chain[1] < ...
        (other items unranked), evaluated from precomputed subset stats.

        Equivalent to event_prob of the chain ranking; only valid in
        modified mode and for chains within stats.items."""
        if self.mode != "modified":
            raise EstimatorError("chain fast path requires modified mode")
        n = self.universe.n
        quarter = n * (n - 1) / 4.0
        idx = {item: x for x, item in enumerate(stats.items)}
        pos = [idx[item] for item in chain]
        q = len(chain)
        g_r = [2.0 * (a + 1) / (q + 1) - 1.0 for a in range(q)]
        rowsum = stats.fbar[pos].sum(axis=1)
        inner = 0.0
        for a in range(q):
            xa = pos[a]
            in_chain = 0.0
            for b in range(q):
                if b == a:
                    continue
                val = stats.fbar[xa, pos[b]]
                in_chain += val
                if b > a:
                    inner -= val  # f_r = -1 for ordered chain pairs
            inner += g_r[a] * (rowsum[a] - in_chain)  # subset items unranked in event
            inner += g_r[a] * stats.wbar[xa]  # items outside the subset
        e_mean = quarter - 0.5 * inner
        return math.exp(-float(self.logfact[q])) * (
            1.0 - e_mean / self.h
        ) / self.norm.normC

    def conditional_prob(self, r: TiedRanking, s: TiedRanking) -> float:
        """p(r)/p(s) for a refinement r of s."""
        if not r.implies(s):
            raise EstimatorError("conditional requires that r refine s")
        denom = self.event_prob(s).value
        if denom <= 0:
            raise EstimatorError(f"conditioning event has probability {denom}")
        return self.event_prob(r).value / denom

    def conjunction_prob(self, constraints: Sequence[tuple[int, int]]) -> float:
        """Probability that all ordered pair constraints hold, via the sum
        over the total orders (chains) of the involved items."""
        involved = sorted({i for c in constraints for i in c})
        if len(involved) > 6:
            raise EstimatorError("conjunction limited to 6 distinct items")
        for i, j in constraints:
            if i == j:
                raise EstimatorError("constraint pairs need distinct items")
        if _has_cycle(involved, constraints):
            raise EstimatorError("contradictory constraints")
        cons = set(constraints)
        values = []
        for order in itertools.permutations(involved):
            pos = {item: p for p, item in enumerate(order)}
            if all(pos[i] < pos[j] for i, j in cons):
                values.append(
                    self.event_prob(chain_ranking(self.universe, order)).value
                )
        return math.fsum(values)

    # -- persistence -------------------------------------------------------

    def to_archive(self) -> dict:
        return {
            "n": self.universe.n,
            "labels": list(self.universe.labels) if self.universe.labels else None,
            "h": self.h,
            "mode": self.mode,
            "rankings": [
                {
                    "groups": format_ranking(r),
                    "levels": list(r.level_labels) if r.level_labels else None,
                }
                for r in self.training
            ],
        }


def fit(
    rankings: Sequence[TiedRanking],
    h: Optional[float] = None,
    mode: str = "modified",
    table: Optional[MahonianTable] = None,
) -> KernelModel:
    """Build the memory-based model (no training-time optimization)."""
    if not rankings:
        raise EstimatorError("empty training set")
    universe = rankings[0].universe
    for r in rankings:
        if r.universe != universe:
            raise EstimatorError("training rankings must share a universe")
    n = universe.n
    if h is None:
        h = default_bandwidth(n)
    if mode == "exact-support" and table is None and n <= ENUMERATION_BOUND:
        table = mahonian_distribution(n)
    norm = triangular_normalization(n, h, mode, table=table)
    return KernelModel(universe, rankings, h, mode, norm)


def save_model(model: KernelModel, path) -> None:
    with open(path, "w") as fh:
        json.dump(model.to_archive(), fh, indent=1)


def load_model(path) -> KernelModel:
    """Re-fit from the archive; nothing besides the data is persisted."""
    with open(path) as fh:
        archive = json.load(fh)
    universe = ItemUniverse(
        archive["n"],
        tuple(archive["labels"]) if archive.get("labels") else None,
    )
    rankings = [
        parse_ranking(
            entry["groups"], universe,
            level_labels=entry["levels"] if entry.get("levels") else None,
        )
        for entry in archive["rankings"]
    ]
    return fit(rankings, h=archive["h"], mode=archive["mode"])


def _has_cycle(nodes, edges) -> bool:
    adj: dict[int, list[int]] = {v: [] for v in nodes}
    for i, j in edges:
        adj[i].append(j)
    state = {v: 0 for v in nodes}

    def visit(v):
        state[v] = 1
        for w in adj[v]:
            if state[w] == 1 or (state[w] == 0 and visit(w)):
                return True
        state[v] = 2
        return False

    return any(state[v] == 0 and visit(v) for v in nodes)


def empirical_prob(rankings: Sequence[TiedRanking], r: TiedRanking) -> float:
    """Fraction of rankings that entail the event."""
    if not rankings:
        raise EstimatorError("empty ranking collection")
    return sum(s.implies(r) for s in rankings) / len(rankings)


# -- baselines and evaluation ---------------------------------------------


@dataclass(frozen=True)
class MallowsModel:
    center: Permutation
    concentration: float
    log_z: float
    table: MahonianTable

    def log_prob(self, perm: Permutation) -> float:
        from .combinatorics import kendall_tau

        return -self.concentration * kendall_tau(perm, self.center) - self.log_z


def mallows_fit(
    perms: Sequence[Permutation], max_concentration: float = 50.0
) -> MallowsModel:
    """Exhaustive-center maximum likelihood fit at small n.

    The center minimizing total distance is the MLE for any positive
    concentration; the concentration is then maximized by a bracketing
    scalar optimizer on the profile likelihood.
    """
    from scipy.optimize import minimize_scalar
    from scipy.special import logsumexp

    from . import oracle

    if not perms:
        raise EstimatorError("empty data")
    n = perms[0].n
    if n > 6:
        raise EstimatorError("exhaustive Mallows fit limited to n <= 6")
    pt = oracle.perm_table(n)
    data_idx = np.array([pt.index[p.order] for p in perms])
    totals = pt.dist[:, data_idx].sum(axis=1)
    center_idx = int(np.argmin(totals))  # argmin ties break lexicographically
    center = pt.perms[center_idx]
    mean_dist = totals[center_idx] / len(perms)

    table = mahonian_distribution(n)
    log_counts = np.log(table.mass) + math.lgamma(n + 1)
    t = np.arange(table.max_distance + 1, dtype=float)

    def neg_loglik(c: float) -> float:
        return c * mean_dist + logsumexp(log_counts - c * t)

    res = minimize_scalar(
        neg_loglik, bounds=(0.0, max_concentration), method="bounded",
        options={"xatol": 1e-6},
    )
    c = float(res.x)
    return MallowsModel(center, c, float(logsumexp(log_counts - c * t)), table)


@dataclass(frozen=True)
class LogLikResult:
    mean: float
    n_used: int
    n_floored: int


def test_loglikelihood(
    scorer: Callable[[TiedRanking], float],
    test_rankings: Sequence[TiedRanking],
    items: Sequence[int],
    floor: float = LIKELIHOOD_FLOOR,
) -> LogLikResult:
    """Mean log probability assigned to test rankings projected onto the
    item subset; users whose projection is not a full strict order of the
    subset are dropped."""
    sub_universe = None
    logs = []
    floored = 0
    for r in test_rankings:
        proj = project_ranking(r, list(items), universe=sub_universe)
        if proj is None:
            continue
        sub_universe = proj.universe
        if proj.k != len(items) or any(len(g) != 1 for g in proj.groups):
            continue
        p = scorer(proj)
        if p < floor:
            p = floor
            floored += 1
        logs.append(math.log(p))
    if not logs:
        raise EstimatorError("no usable test rankings")
    return LogLikResult(math.fsum(logs) / len(logs), len(logs), floored)


def select_bandwidth(
    rankings: Sequence[TiedRanking],
    candidates: Sequence[float],
    mode: str,
    items: Sequence[int],
    seed: int = 0,
    val_fraction: float = 0.25,
) -> float:
    """Held-out-likelihood bandwidth selection over a candidate grid."""
    if not candidates:
        raise EstimatorError("no bandwidth candidates")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(rankings))
    n_val = max(1, int(len(rankings) * val_fraction))
    val = [rankings[i] for i in order[:n_val]]
    train = [rankings[i] for i in order[n_val:]]
    if not train:
        raise EstimatorError("not enough data to split for selection")
    best_h, best_ll = None, -math.inf
    for h in candidates:
        try:
            model = fit(train, h=h, mode=mode)
            ll = test_loglikelihood(
                lambda ev: model.event_prob(
                    _lift_event(ev, model.universe, items)
                ).value,
                val,
                items,
            ).mean
        except (EstimatorError, ValueError):
            continue
        if ll > best_ll:
            best_h, best_ll = h, ll
    if best_h is None:
        raise EstimatorError("no valid bandwidth candidate")
    return best_h


def _lift_event(
    proj: TiedRanking, universe: ItemUniverse, items: Sequence[int]
) -> TiedRanking:
    """Map a projected sub-universe event back to the model universe."""
    groups = tuple(tuple(items[i] for i in g) for g in proj.groups)
    return TiedRanking(universe, groups)
