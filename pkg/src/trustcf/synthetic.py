"""Synthetic group-structured dataset generator.

Users fall into preference groups that share per-item rating tendencies,
and explicit trust statements point (mostly) at same-group users, so trust
carries real signal about rating agreement. Used by the test suite and by
scripts/make_synthetic_dataset.py; real benchmarks use on-disk datasets.
"""

from __future__ import annotations

import random

from .data import DEFAULT_BOUNDS, ExplicitTrust, IdIndex, RatingMatrix


def _snap_half(x: float, lo: float, hi: float) -> float:
    return min(hi, max(lo, round(x * 2.0) / 2.0))


def synth_dataset(seed: int, n_users: int = 50, n_items: int = 40,
                  n_groups: int = 5, ratings_per_user: int = 12,
                  trust_per_user: int = 3, noise: float = 0.7,
                  bounds=DEFAULT_BOUNDS) -> tuple[RatingMatrix, ExplicitTrust]:
    """Generate an aligned (ratings, trust) pair on a half-point scale."""
    if n_groups > n_users:
        raise ValueError("more groups than users")
    rng = random.Random(seed)
    lo, hi = bounds
    group_of = [u * n_groups // n_users for u in range(n_users)]
    members: dict[int, list[int]] = {}
    for u, g in enumerate(group_of):
        members.setdefault(g, []).append(u)
    taste = [[rng.uniform(lo + 0.5, hi - 0.5) for _ in range(n_items)]
             for _ in range(n_groups)]

    users = IdIndex()
    items = IdIndex()
    width = len(str(n_users - 1))
    iwidth = len(str(n_items - 1))
    entries = []
    for u in range(n_users):
        du = users.intern(f"u{u:0{width}d}")
        rated = rng.sample(range(n_items), min(ratings_per_user, n_items))
        for i in sorted(rated):
            di = items.intern(f"m{i:0{iwidth}d}")
            r = _snap_half(taste[group_of[u]][i] + rng.gauss(0.0, noise), lo, hi)
            entries.append((du, di, r))
    matrix = RatingMatrix(users, items, entries, bounds)

    pairs = []
    for u in range(n_users):
        peers = [v for v in members[group_of[u]] if v != u]
        for v in sorted(rng.sample(peers, min(trust_per_user, len(peers)))):
            pairs.append((u, v))
    trust = ExplicitTrust(users, pairs)
    return matrix, trust
