"""Sparse rating / explicit-trust data model and plain-text dataset ingestion.

Datasets are triple files: ratings are "user item rating" and trust
statements are "trustor trustee 1", either whitespace- or comma-separated.
All loaded structures are immutable after construction and safe to share
across worker processes.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

from .errors import IntegrityError, ParseError, RatingRangeError, UndefinedMeanError

DEFAULT_BOUNDS = (0.5, 4.0)


class IdIndex:
    """Bijection between external id strings and dense 0-based integers.

    Dense ids are assigned in first-seen order and stay contiguous, so a
    matrix and any of its training subsets can share one index.
    """

    def __init__(self):
        self._dense: dict[str, int] = {}
        self._external: list[str] = []

    def __len__(self) -> int:
        return len(self._external)

    def __contains__(self, ext: str) -> bool:
        return ext in self._dense

    def intern(self, ext: str) -> int:
        """Return the dense id for ``ext``, assigning the next id if new."""
        idx = self._dense.get(ext)
        if idx is None:
            idx = len(self._external)
            self._dense[ext] = idx
            self._external.append(ext)
        return idx

    def dense(self, ext: str) -> int:
        try:
            return self._dense[ext]
        except KeyError:
            raise KeyError(f"unknown external id {ext!r}") from None

    def external(self, idx: int) -> str:
        return self._external[idx]

    def ids(self) -> range:
        return range(len(self._external))


class RatingMatrix:
    """Sparse user-item rating matrix with per-user and global means.

    ``entries`` keeps load order and is the unit that train/test splits
    index into. Means use exact (compensated) summation.
    """

    def __init__(self, users: IdIndex, items: IdIndex,
                 entries: list[tuple[int, int, float]],
                 bounds: tuple[float, float] = DEFAULT_BOUNDS):
        lo, hi = bounds
        if not lo < hi:
            raise ValueError(f"invalid rating bounds {bounds}")
        self.users = users
        self.items = items
        self.bounds = (float(lo), float(hi))
        self.entries = list(entries)
        self.by_user: dict[int, dict[int, float]] = {}
        self.by_item: dict[int, dict[int, float]] = {}
        for u, i, r in self.entries:
            if not lo <= r <= hi:
                raise RatingRangeError(
                    f"rating {r} for user {users.external(u)} outside [{lo}, {hi}]")
            row = self.by_user.setdefault(u, {})
            if i in row:
                raise IntegrityError(
                    f"duplicate rating for user {users.external(u)}, "
                    f"item {items.external(i)}")
            row[i] = r
            self.by_item.setdefault(i, {})[u] = r
        self._means = {u: math.fsum(row.values()) / len(row)
                       for u, row in self.by_user.items()}
        if self.entries:
            self.global_mean = math.fsum(r for _, _, r in self.entries) / len(self.entries)
        else:
            self.global_mean = None

    @classmethod
    def from_entries(cls, triples, bounds=DEFAULT_BOUNDS,
                     users: IdIndex | None = None,
                     items: IdIndex | None = None) -> "RatingMatrix":
        """Build a matrix from (external-user, external-item, rating) triples."""
        users = users if users is not None else IdIndex()
        items = items if items is not None else IdIndex()
        entries = [(users.intern(str(u)), items.intern(str(i)), float(r))
                   for u, i, r in triples]
        return cls(users, items, entries, bounds)

    def subset(self, entry_indices) -> "RatingMatrix":
        """New matrix over a subset of entries, sharing the id indices."""
        keep = sorted(entry_indices)
        return RatingMatrix(self.users, self.items,
                            [self.entries[k] for k in keep], self.bounds)

    @property
    def n_ratings(self) -> int:
        return len(self.entries)

    @property
    def n_rating_users(self) -> int:
        """Users with at least one rating (the index may hold trust-only users)."""
        return len(self.by_user)

    @property
    def n_items(self) -> int:
        return len(self.items)

    def rating(self, u: int, i: int) -> float | None:
        return self.by_user.get(u, {}).get(i)

    def ratings_of(self, u: int) -> dict[int, float]:
        return self.by_user.get(u, {})

    def raters(self, i: int) -> dict[int, float]:
        return self.by_item.get(i, {})

    def user_mean(self, u: int) -> float:
        try:
            return self._means[u]
        except KeyError:
            raise UndefinedMeanError(
                f"user {self.users.external(u)} has no ratings") from None

    def clamp(self, value: float) -> float:
        lo, hi = self.bounds
        return min(hi, max(lo, value))


def user_mean(m: RatingMatrix, u: int) -> float:
    """Arithmetic mean of u's stored ratings; raises UndefinedMeanError if none."""
    return m.user_mean(u)


class ExplicitTrust:
    """Directed binary trust statements over the shared user index.

    ``pairs`` holds (trustor, trustee) dense-id pairs; every statement
    carries value 1. Self-pairs and duplicates are rejected at build time.
    """

    def __init__(self, users: IdIndex, pairs):
        self.users = users
        self.pairs: set[tuple[int, int]] = set()
        self._trustees: dict[int, set[int]] = {}
        for u, v in pairs:
            if u == v:
                raise IntegrityError(
                    f"self-trust statement for user {users.external(u)}")
            if (u, v) in self.pairs:
                raise IntegrityError(
                    f"duplicate trust statement {users.external(u)} -> "
                    f"{users.external(v)}")
            self.pairs.add((u, v))
            self._trustees.setdefault(u, set()).add(v)

    @classmethod
    def from_pairs(cls, ext_pairs, users: IdIndex | None = None) -> "ExplicitTrust":
        users = users if users is not None else IdIndex()
        dense = [(users.intern(str(a)), users.intern(str(b))) for a, b in ext_pairs]
        return cls(users, dense)

    def __len__(self) -> int:
        return len(self.pairs)

    def trustees(self, u: int) -> set[int]:
        """S(u): the set of users u explicitly trusts."""
        return self._trustees.get(u, set())

    def source_hash(self) -> str:
        """SHA-256 over the sorted external-id statement list (provenance)."""
        h = hashlib.sha256()
        for u, v in sorted((self.users.external(a), self.users.external(b))
                           for a, b in self.pairs):
            h.update(u.encode())
            h.update(b"\x00")
            h.update(v.encode())
            h.update(b"\n")
        return h.hexdigest()


def _iter_triples(path):
    """Yield (lineno, tokens) for each non-empty, non-comment line."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            tokens = [t.strip() for t in line.split(",")] if "," in line else line.split()
            if len(tokens) != 3:
                raise ParseError(path, lineno, f"expected 3 fields, got {len(tokens)}")
            yield lineno, tokens


def load_ratings(path, bounds=DEFAULT_BOUNDS,
                 users: IdIndex | None = None,
                 items: IdIndex | None = None) -> RatingMatrix:
    """Load "user item rating" triples into a RatingMatrix.

    Dense ids are assigned in first-seen order. Malformed lines, ratings
    outside ``bounds`` and duplicate (user, item) pairs are errors.
    """
    users = users if users is not None else IdIndex()
    items = items if items is not None else IdIndex()
    lo, hi = bounds
    entries = []
    seen: set[tuple[int, int]] = set()
    for lineno, (u_ext, i_ext, r_tok) in _iter_triples(path):
        try:
            r = float(r_tok)
        except ValueError:
            raise ParseError(path, lineno, f"bad rating value {r_tok!r}") from None
        if not math.isfinite(r) or not lo <= r <= hi:
            raise RatingRangeError(
                f"{path}:{lineno}: rating {r_tok} outside declared bounds [{lo}, {hi}]")
        u = users.intern(u_ext)
        i = items.intern(i_ext)
        if (u, i) in seen:
            raise IntegrityError(
                f"{path}:{lineno}: duplicate rating for user {u_ext}, item {i_ext}")
        seen.add((u, i))
        entries.append((u, i, r))
    return RatingMatrix(users, items, entries, bounds)


def load_trust(path, users: IdIndex) -> ExplicitTrust:
    """Load "trustor trustee 1" triples against (and extending) ``users``.

    Users unseen in the rating data are admitted into the index: they can
    serve as propagation-path intermediaries even though they never vote.
    """
    pairs = []
    seen: set[tuple[int, int]] = set()
    for lineno, (a_ext, b_ext, v_tok) in _iter_triples(path):
        try:
            v = float(v_tok)
        except ValueError:
            raise ParseError(path, lineno, f"bad trust value {v_tok!r}") from None
        if v != 1.0:
            raise IntegrityError(
                f"{path}:{lineno}: trust value must be 1, got {v_tok}")
        a = users.intern(a_ext)
        b = users.intern(b_ext)
        if a == b:
            raise IntegrityError(f"{path}:{lineno}: self-trust statement for {a_ext}")
        if (a, b) in seen:
            raise IntegrityError(
                f"{path}:{lineno}: duplicate trust statement {a_ext} -> {b_ext}")
        seen.add((a, b))
        pairs.append((a, b))
    return ExplicitTrust(users, pairs)


def save_ratings(m: RatingMatrix, path) -> None:
    """Write the matrix back as whitespace triples (lossless round-trip)."""
    with open(path, "w", encoding="utf-8") as fh:
        for u, i, r in m.entries:
            fh.write(f"{m.users.external(u)} {m.items.external(i)} {r!r}\n")


def save_trust(t: ExplicitTrust, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for u, v in sorted(t.pairs):
            fh.write(f"{t.users.external(u)} {t.users.external(v)} 1\n")


@dataclass(frozen=True)
class DatasetSummary:
    n_rating_users: int
    n_users_total: int
    n_items: int
    n_ratings: int
    n_trust: int


def summarize(m: RatingMatrix, t: ExplicitTrust | None) -> DatasetSummary:
    return DatasetSummary(
        n_rating_users=m.n_rating_users,
        n_users_total=len(m.users),
        n_items=m.n_items,
        n_ratings=m.n_ratings,
        n_trust=len(t) if t is not None else 0,
    )


def check_expected_counts(summary: DatasetSummary,
                          users: int | None = None,
                          items: int | None = None,
                          ratings: int | None = None,
                          trust: int | None = None) -> None:
    """Fail loudly when the loaded dataset drifts from its declared shape.

    ``users`` is compared against the rating-user count (users that only
    appear in the trust data are indexed but not counted here).
    """
    problems = []
    if users is not None and summary.n_rating_users != users:
        problems.append(f"rating users: expected {users}, got {summary.n_rating_users}")
    if items is not None and summary.n_items != items:
        problems.append(f"items: expected {items}, got {summary.n_items}")
    if ratings is not None and summary.n_ratings != ratings:
        problems.append(f"ratings: expected {ratings}, got {summary.n_ratings}")
    if trust is not None and summary.n_trust != trust:
        problems.append(f"trust statements: expected {trust}, got {summary.n_trust}")
    if problems:
        raise IntegrityError(
            "dataset does not match its declared shape (version drift?): "
            + "; ".join(problems))
