"""Pearson user-user similarity over co-rated items and top-K voter selection.

Similarities are computed on demand and memoized per model instance; no
dense N x N matrix is ever materialized. A model instance is bound to one
(training) matrix, so per-round evaluation builds one model per round.
Caches are plain dicts: share a model across threads only for reads, or
give each worker its own instance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .data import RatingMatrix

MEAN_GLOBAL = "global"    # center on the user's mean over all their ratings
MEAN_CORATED = "corated"  # center on the mean over the co-rated items only


@dataclass(frozen=True)
class SimilarityConfig:
    mean_mode: str = MEAN_GLOBAL
    min_overlap: int = 2        # |I| below this -> similarity undefined
    positive_only: bool = False  # drop sim <= 0 neighbors (ablation switch)

    def __post_init__(self):
        if self.mean_mode not in (MEAN_GLOBAL, MEAN_CORATED):
            raise ValueError(f"unknown mean_mode {self.mean_mode!r}")
        if self.min_overlap < 1:
            raise ValueError("min_overlap must be >= 1")


DEFAULT_SIMILARITY = SimilarityConfig()


def pearson(m: RatingMatrix, u: int, v: int,
            config: SimilarityConfig = DEFAULT_SIMILARITY) -> float | None:
    """Pearson correlation between users u and v over their co-rated items.

    Returns None (undefined) when fewer than ``min_overlap`` items are
    co-rated or either centered-variance term is zero. Defined values are
    clamped to [-1, 1] to absorb last-ulp excess.
    """
    ru = m.ratings_of(u)
    rv = m.ratings_of(v)
    if len(rv) < len(ru):
        ru, rv = rv, ru
    common = [i for i in ru if i in rv]
    if len(common) < config.min_overlap:
        return None
    if config.mean_mode == MEAN_GLOBAL:
        mu = m.user_mean(u)
        mv = m.user_mean(v)
    else:
        mu = math.fsum(m.ratings_of(u)[i] for i in common) / len(common)
        mv = math.fsum(m.ratings_of(v)[i] for i in common) / len(common)
    # ru/rv may have been swapped; index the originals explicitly
    xu = m.ratings_of(u)
    xv = m.ratings_of(v)
    num = math.fsum((xu[i] - mu) * (xv[i] - mv) for i in common)
    du = math.fsum((xu[i] - mu) ** 2 for i in common)
    dv = math.fsum((xv[i] - mv) ** 2 for i in common)
    if du == 0.0 or dv == 0.0:
        return None
    value = num / (math.sqrt(du) * math.sqrt(dv))
    return min(1.0, max(-1.0, value))


class SimilarityModel:
    """Memoizing similarity queries plus neighbor-candidate ranking."""

    def __init__(self, m: RatingMatrix, config: SimilarityConfig | None = None):
        self.matrix = m
        self.config = config if config is not None else DEFAULT_SIMILARITY
        self._cache: dict[tuple[int, int], float | None] = {}

    def sim(self, u: int, v: int) -> float | None:
        key = (u, v) if u < v else (v, u)
        try:
            return self._cache[key]
        except KeyError:
            value = pearson(self.matrix, u, v, self.config)
            self._cache[key] = value
            return value

    def candidates(self, u: int, i: int) -> list[tuple[int, float]]:
        """All raters of item i with a defined similarity to u, best first.

        Sorted by similarity descending, ties by ascending dense user id.
        Slicing the result to K gives the top-K voting users.
        """
        out = []
        for v in self.matrix.raters(i):
            if v == u:
                continue
            s = self.sim(u, v)
            if s is None:
                continue
            if self.config.positive_only and s <= 0.0:
                continue
            out.append((v, s))
        out.sort(key=lambda pair: (-pair[1], pair[0]))
        return out

    def neighbors(self, u: int, i: int, k: int) -> list[tuple[int, float]]:
        if k < 1:
            raise ValueError("k must be >= 1")
        return self.candidates(u, i)[:k]


def select_neighbors(model: SimilarityModel, u: int, i: int, k: int) -> list[tuple[int, float]]:
    """Top-K raters of item i most similar to u (may return fewer than K)."""
    return model.neighbors(u, i, k)
