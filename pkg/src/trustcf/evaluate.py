"""Repeated-split MAE evaluation of the comparison methods.

The protocol: partition the rating entries into train/test (80/20 by
default), fit similarity and means on the training side only, predict
every held-out rating, score mean absolute error, repeat for several
rounds and average. Trust assets are derived purely from the explicit
trust statements, so they are split-independent and shared across rounds.

Fallback predictions are scored like any other so every method is
measured on the identical test set.
"""

from __future__ import annotations

import csv
import math
import os
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

from .data import ExplicitTrust, RatingMatrix
from .errors import ConfigError, IntegrityError
from .predict import (
    FUSION_NONE,
    STATUS_PREDICTED,
    TRUST_EXPLICIT,
    TRUST_INFERRED,
    TRUST_INFERRED_NO_JACCARD,
    TRUST_NONE,
    MethodConfig,
    Prediction,
    method_config,
    predict_cf,
    predict_tacf,
)
from .similarity import SimilarityConfig, SimilarityModel
from .trust import (
    GRAPH_EXPLICIT,
    GRAPH_FULL,
    TrustStore,
    build_trust_graph,
    infer_all_from,
)

SPLIT_RESAMPLE = "resample"  # independent uniform test sample per round
SPLIT_KFOLD = "kfold"        # disjoint folds covering the data once


@dataclass(frozen=True)
class SplitPlan:
    """Deterministic train/test partitions of the rating entries."""
    seed: int
    rounds: int
    train_fraction: float
    mode: str
    test_sets: tuple[tuple[int, ...], ...]  # sorted entry indices per round


def make_splits(m: RatingMatrix, seed: int, rounds: int = 5,
                fraction: float = 0.8, mode: str = SPLIT_RESAMPLE) -> SplitPlan:
    """Partition rating entries; identical seed yields identical plans."""
    n = m.n_ratings
    if n < 2:
        raise IntegrityError("need at least 2 ratings to split")
    if not 0.0 < fraction < 1.0:
        raise ConfigError(f"train fraction {fraction} outside (0, 1)")
    if rounds < 1:
        raise ConfigError("rounds must be >= 1")
    rng = random.Random(seed)
    if mode == SPLIT_RESAMPLE:
        n_train = min(n - 1, max(1, round(fraction * n)))
        n_test = n - n_train
        test_sets = tuple(tuple(sorted(rng.sample(range(n), n_test)))
                          for _ in range(rounds))
    elif mode == SPLIT_KFOLD:
        if rounds > n:
            raise ConfigError(f"{rounds}-fold split needs at least {rounds} ratings")
        order = list(range(n))
        rng.shuffle(order)
        test_sets = tuple(tuple(sorted(order[r::rounds])) for r in range(rounds))
    else:
        raise ConfigError(f"unknown split mode {mode!r}")
    return SplitPlan(seed, rounds, fraction, mode, test_sets)


class TrustAssets:
    """Trust graphs and memoized inference shared by all evaluation cells.

    Built from explicit trust statements only; ratings never enter, so the
    same assets serve every split without leakage.
    """

    def __init__(self, trust: ExplicitTrust | None):
        self.trust = trust
        if trust is not None:
            self.explicit_pairs = frozenset(trust.pairs)
            self.full_graph = build_trust_graph(trust, include_overlap=True)
            self.explicit_graph = build_trust_graph(trust, include_overlap=False)
            self.full_store = TrustStore.for_graph(trust, GRAPH_FULL)
            self.explicit_store = TrustStore.for_graph(trust, GRAPH_EXPLICIT)

    def adopt_store(self, store: TrustStore) -> None:
        """Reuse a precomputed store after checking its provenance hash."""
        if self.trust is None:
            raise ConfigError("no trust data loaded; nothing to match the store against")
        if store.source_hash != self.trust.source_hash():
            raise IntegrityError(
                "trust store is stale: its source hash does not match the "
                "loaded trust data")
        if store.graph_kind == GRAPH_FULL:
            self.full_store = store
        elif store.graph_kind == GRAPH_EXPLICIT:
            self.explicit_store = store
        else:
            raise ConfigError(f"unknown store graph kind {store.graph_kind!r}")

    def trust_map(self, u: int, targets, source: str,
                  formula: str | None) -> dict[int, float]:
        """t-hat(u, v) for each target v under the configured trust source."""
        if self.trust is None:
            raise ConfigError("method requires trust data but none was loaded")
        if source == TRUST_EXPLICIT:
            return {v: 1.0 if (u, v) in self.explicit_pairs else 0.0
                    for v in targets}
        if source == TRUST_INFERRED:
            est = infer_all_from(self.full_store, self.full_graph, u, targets, formula)
        elif source == TRUST_INFERRED_NO_JACCARD:
            est = infer_all_from(self.explicit_store, self.explicit_graph,
                                 u, targets, formula)
        else:
            raise ConfigError(f"unknown trust source {source!r}")
        return {v: e.value for v, e in est.items()}


@dataclass(frozen=True)
class RoundRow:
    method: str
    k: int
    alpha: float | None  # None for methods that take no blend weight
    round: int
    mae: float
    n_predicted: int
    n_fallback: int


@dataclass(frozen=True)
class SummaryRow:
    method: str
    k: int
    alpha: float | None
    mae: float  # unweighted mean of the round MAEs
    rounds: int


@dataclass
class EvalReport:
    rows: list[RoundRow]

    def summary(self) -> list[SummaryRow]:
        groups: dict[tuple, list[float]] = {}
        order: list[tuple] = []
        for row in self.rows:
            key = (row.method, row.k, row.alpha)
            if key not in groups:
                groups[key] = []
                order.append(key)
            groups[key].append(row.mae)
        return [SummaryRow(method, k, alpha,
                           math.fsum(groups[(method, k, alpha)]) / len(groups[(method, k, alpha)]),
                           len(groups[(method, k, alpha)]))
                for method, k, alpha in order]


def _row_alpha(cfg: MethodConfig) -> float | None:
    return cfg.alpha if cfg.uses_alpha else None


def _score_round(m: RatingMatrix, assets: TrustAssets,
                 cells: list[tuple[MethodConfig, int]],
                 plan: SplitPlan, rnd: int,
                 sim_config: SimilarityConfig | None,
                 predictor=None) -> list[RoundRow]:
    """Score every (method, K) cell on one round's held-out ratings.

    Candidate voter lists and trust maps are computed once per test point
    and shared across cells; predictions are cached per effective K, since
    any K at least as large as the candidate count gives the same result.
    """
    test = plan.test_sets[rnd]
    test_set = frozenset(test)
    train = m.subset(k for k in range(m.n_ratings) if k not in test_set)
    model = SimilarityModel(train, sim_config)
    max_k = max(k for _, k in cells)

    errors: list[list[float]] = [[] for _ in cells]
    n_pred = [0] * len(cells)
    n_fall = [0] * len(cells)
    for idx in test:
        u, i, actual = m.entries[idx]
        top = model.candidates(u, i)[:max_k]
        target_ids = [v for v, _ in top]
        trust_maps: dict[tuple, dict[int, float]] = {}
        pred_cache: dict[tuple, Prediction] = {}
        for c, (cfg, k) in enumerate(cells):
            if predictor is not None:
                p = predictor(train, u, i)
            else:
                k_eff = min(k, len(top))
                key = (cfg.name, _row_alpha(cfg), k_eff)
                p = pred_cache.get(key)
                if p is None:
                    nbrs = top[:k_eff]
                    if cfg.fusion == FUSION_NONE:
                        p = predict_cf(train, nbrs, u, i)
                    else:
                        tkey = (cfg.trust_source, cfg.trust_formula)
                        tmap = trust_maps.get(tkey)
                        if tmap is None:
                            tmap = assets.trust_map(u, target_ids,
                                                    cfg.trust_source, cfg.trust_formula)
                            trust_maps[tkey] = tmap
                        p = predict_tacf(train, nbrs, tmap, cfg, u, i)
                    pred_cache[key] = p
            errors[c].append(abs(p.value - actual))
            if p.status == STATUS_PREDICTED:
                n_pred[c] += 1
            else:
                n_fall[c] += 1
    return [RoundRow(cfg.name, k, _row_alpha(cfg), rnd,
                     math.fsum(errors[c]) / len(test), n_pred[c], n_fall[c])
            for c, (cfg, k) in enumerate(cells)]


def evaluate(m: RatingMatrix, assets: TrustAssets, cfg: MethodConfig, k: int,
             plan: SplitPlan, sim_config: SimilarityConfig | None = None,
             predictor=None) -> list[RoundRow]:
    """One method at one K across all rounds of the plan.

    ``predictor`` replaces the method's prediction with a stub taking
    (train-matrix, user, item) -> Prediction; used to validate the harness
    itself (e.g. a perfect predictor must score MAE 0).
    """
    if k < 1:
        raise ConfigError("K must be >= 1")
    if cfg.trust_source != TRUST_NONE and assets.trust is None and predictor is None:
        raise ConfigError(f"method {cfg.name} requires trust data")
    return [row for rnd in range(plan.rounds)
            for row in _score_round(m, assets, [(cfg, k)], plan, rnd,
                                    sim_config, predictor)]


def _build_cells(methods, ks, alphas) -> list[tuple[MethodConfig, int]]:
    if not methods or not ks:
        raise ConfigError("need at least one method and one K")
    configs: list[MethodConfig] = []
    for method in methods:
        cfg = method if isinstance(method, MethodConfig) else method_config(method)
        if cfg.uses_alpha and alphas:
            configs.extend(replace(cfg, alpha=a) for a in alphas)
        else:
            configs.append(cfg)
    for k in ks:
        if k < 1:
            raise ConfigError("K must be >= 1")
    return [(cfg, k) for cfg in configs for k in ks]


def _round_task(payload):
    m, assets, cells, plan, rnd, sim_config = payload
    return _score_round(m, assets, cells, plan, rnd, sim_config)


def sweep(m: RatingMatrix, assets: TrustAssets, methods, ks, plan: SplitPlan,
          alphas=None, sim_config: SimilarityConfig | None = None,
          jobs: int = 1) -> EvalReport:
    """Full (method x K [x alpha]) cross-product over the plan's rounds.

    ``alphas`` expands only the linear-fusion methods; others run once.
    ``jobs`` > 1 scores rounds in parallel worker processes; results are
    identical to the serial path.
    """
    cells = _build_cells(methods, ks, alphas)
    for cfg, _ in cells:
        if cfg.trust_source != TRUST_NONE and assets.trust is None:
            raise ConfigError(f"method {cfg.name} requires trust data")
    if jobs < 1:
        raise ConfigError("jobs must be >= 1")
    if jobs == 1 or plan.rounds == 1:
        per_round = [_score_round(m, assets, cells, plan, rnd, sim_config)
                     for rnd in range(plan.rounds)]
    else:
        payloads = [(m, assets, cells, plan, rnd, sim_config)
                    for rnd in range(plan.rounds)]
        with ProcessPoolExecutor(max_workers=min(jobs, plan.rounds)) as pool:
            per_round = list(pool.map(_round_task, payloads))
    # cell-major ordering regardless of how rounds were scheduled
    rows = [per_round[rnd][c]
            for c in range(len(cells)) for rnd in range(plan.rounds)]
    return EvalReport(rows)


def _atomic_writer(path):
    tmp = f"{path}.tmp"

    class _Ctx:
        def __enter__(self):
            self.fh = open(tmp, "w", encoding="utf-8", newline="")
            return self.fh

        def __exit__(self, exc_type, exc, tb):
            self.fh.close()
            if exc_type is None:
                os.replace(tmp, path)
            else:
                os.unlink(tmp)
            return False

    return _Ctx()


def _fmt(x) -> str:
    return "" if x is None else repr(x) if isinstance(x, float) else str(x)


def write_report_csv(report: EvalReport, path) -> None:
    """Per-round rows: method, K, alpha, round, mae, n_predicted, n_fallback."""
    with _atomic_writer(path) as fh:
        w = csv.writer(fh)
        w.writerow(["method", "K", "alpha", "round", "mae", "n_predicted", "n_fallback"])
        for r in report.rows:
            w.writerow([r.method, r.k, _fmt(r.alpha), r.round, _fmt(r.mae),
                        r.n_predicted, r.n_fallback])


def write_summary_csv(report: EvalReport, path) -> None:
    """Round-averaged rows: method, K, alpha, mae, rounds."""
    with _atomic_writer(path) as fh:
        w = csv.writer(fh)
        w.writerow(["method", "K", "alpha", "mae", "rounds"])
        for r in report.summary():
            w.writerow([r.method, r.k, _fmt(r.alpha), _fmt(r.mae), r.rounds])
