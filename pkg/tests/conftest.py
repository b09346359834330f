"""Shared fixtures: small universes and a synthetic ratings corpus.

The ratings fixture mimics the classic tab-separated movie-ratings layout
(user, item, rating 1-5, timestamp) so the ingest and CLI paths can be
exercised end to end without network access. Ratings are drawn from a
two-profile latent model so the estimators have real structure to find.
"""

import numpy as np
import pytest

from rankdens.rankings import ItemUniverse


N_SYNTH_USERS = 2200
N_SYNTH_ITEMS = 80


def write_ratings_file(path, n_users=N_SYNTH_USERS, n_items=N_SYNTH_ITEMS, seed=424242):
    rng = np.random.default_rng(seed)
    # two taste profiles over item quality, plus per-user noise
    base = rng.uniform(1.2, 4.8, size=(2, n_items))
    lines = []
    ts = 880000000
    for user in range(1, n_users + 1):
        profile = base[rng.integers(2)]
        n_rated = int(rng.integers(15, 46))
        items = rng.permutation(n_items)[:n_rated] + 1
        for item in items:
            rating = int(np.clip(round(profile[item - 1] + rng.normal(0, 0.9)), 1, 5))
            ts += int(rng.integers(1, 50))
            lines.append(f"{user}\t{item}\t{rating}\t{ts}")
    # a handful of duplicate entries; last occurrence should win
    dup_rng = np.random.default_rng(seed + 1)
    for _ in range(10):
        idx = int(dup_rng.integers(len(lines)))
        user, item, rating, t = lines[idx].split("\t")
        new_rating = 1 + (int(rating) % 5)
        lines.append(f"{user}\t{item}\t{new_rating}\t{int(t) + 1}")
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture(scope="session")
def ratings_file(tmp_path_factory):
    return write_ratings_file(tmp_path_factory.mktemp("data") / "u.data")


@pytest.fixture
def u4():
    return ItemUniverse(4)


@pytest.fixture
def u5():
    return ItemUniverse(5)
