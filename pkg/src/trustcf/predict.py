"""Rating prediction: similarity-weighted CF and trust-fused variants.

Eight comparison methods are configured declaratively: plain CF, two
explicit-trust fusions, a shortest-path baseline without attenuation, and
four variants fusing inferred trust (incremental or linear fusion crossed
with attenuated or plain path scoring).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .data import RatingMatrix
from .errors import ConfigError, NoUsableWeights, UndefinedMeanError
from .trust import ATTENUATED, PLAIN

FUSION_NONE = "none"
FUSION_IW = "iw"  # multiplicative: weight similarity by trust, renormalize
FUSION_LW = "lw"  # convex blend of normalized similarity and normalized trust

TRUST_NONE = "none"
TRUST_EXPLICIT = "explicit"                    # raw statements, missing = 0
TRUST_INFERRED = "inferred"                    # full graph: overlap + propagation
TRUST_INFERRED_NO_JACCARD = "inferred_no_jaccard"  # explicit-only graph paths

STATUS_PREDICTED = "predicted"
STATUS_FALLBACK_USER = "fallback-user-mean"
STATUS_FALLBACK_GLOBAL = "fallback-global-mean"


@dataclass(frozen=True)
class MethodConfig:
    name: str
    fusion: str
    trust_source: str
    trust_formula: str | None = None
    alpha: float = 0.3  # linear-fusion weight on similarity; ignored by IW

    def __post_init__(self):
        if self.fusion not in (FUSION_NONE, FUSION_IW, FUSION_LW):
            raise ConfigError(f"unknown fusion {self.fusion!r}")
        if self.trust_source not in (TRUST_NONE, TRUST_EXPLICIT, TRUST_INFERRED,
                                     TRUST_INFERRED_NO_JACCARD):
            raise ConfigError(f"unknown trust source {self.trust_source!r}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha {self.alpha} outside [0, 1]")

    @property
    def uses_alpha(self) -> bool:
        return self.fusion == FUSION_LW


METHOD_TABLE = {
    "CF": MethodConfig("CF", FUSION_NONE, TRUST_NONE),
    "E-TaCF-I": MethodConfig("E-TaCF-I", FUSION_IW, TRUST_EXPLICIT),
    "E-TaCF-II": MethodConfig("E-TaCF-II", FUSION_LW, TRUST_EXPLICIT),
    "D-TaCF": MethodConfig("D-TaCF", FUSION_LW, TRUST_INFERRED_NO_JACCARD, PLAIN),
    "iTrace-I": MethodConfig("iTrace-I", FUSION_IW, TRUST_INFERRED, ATTENUATED),
    "iTrace-II": MethodConfig("iTrace-II", FUSION_IW, TRUST_INFERRED, PLAIN),
    "iTrace-III": MethodConfig("iTrace-III", FUSION_LW, TRUST_INFERRED, ATTENUATED),
    "iTrace-IV": MethodConfig("iTrace-IV", FUSION_LW, TRUST_INFERRED, PLAIN),
}

ALL_METHODS = tuple(METHOD_TABLE)


def method_config(name: str, alpha: float | None = None) -> MethodConfig:
    """Look up a comparison method by name, optionally overriding alpha."""
    try:
        cfg = METHOD_TABLE[name]
    except KeyError:
        raise ConfigError(
            f"unknown method {name!r}; known: {', '.join(METHOD_TABLE)}") from None
    if alpha is not None and cfg.uses_alpha:
        cfg = replace(cfg, alpha=alpha)
    return cfg


@dataclass(frozen=True)
class Prediction:
    value: float        # clamped to the rating scale
    status: str
    n_neighbors: int
    note: str = ""      # audit detail, e.g. degenerate-denominator handling


def fuse_iw(weights: list[tuple[float, float]]) -> list[float]:
    """Incremental weighting: sim*trust renormalized over the neighbor set.

    Raises NoUsableWeights when the normalizing sum is exactly zero.
    """
    if not weights:
        raise ValueError("empty weight list")
    total = math.fsum(s * t for s, t in weights)
    if total == 0.0:
        raise NoUsableWeights("incremental fusion: sum of sim*trust is 0")
    return [s * t / total for s, t in weights]


def fuse_lw(weights: list[tuple[float, float]], alpha: float) -> list[float]:
    """Linear weighting: alpha * normalized sim + (1-alpha) * normalized trust.

    A term whose denominator is zero is dropped and its coefficient handed
    to the surviving term; if both denominators are zero there is nothing
    to weight and NoUsableWeights is raised.
    """
    if not weights:
        raise ValueError("empty weight list")
    if not 0.0 <= alpha <= 1.0:
        raise ConfigError(f"alpha {alpha} outside [0, 1]")
    sim_total = math.fsum(s for s, _ in weights)
    trust_total = math.fsum(t for _, t in weights)
    if sim_total == 0.0 and trust_total == 0.0:
        raise NoUsableWeights("linear fusion: both normalizing sums are 0")
    if sim_total == 0.0:
        return [t / trust_total for _, t in weights]
    if trust_total == 0.0:
        return [s / sim_total for s, _ in weights]
    return [alpha * s / sim_total + (1.0 - alpha) * t / trust_total
            for s, t in weights]


def _base_mean(m: RatingMatrix, u: int) -> tuple[float, str]:
    """The target user's centering mean, falling back to the global mean."""
    try:
        return m.user_mean(u), STATUS_PREDICTED
    except UndefinedMeanError:
        if m.global_mean is None:
            raise UndefinedMeanError("empty matrix has no global mean") from None
        return m.global_mean, STATUS_FALLBACK_GLOBAL


def predict_cf(m: RatingMatrix, nbrs: list[tuple[int, float]],
               u: int, i: int) -> Prediction:
    """Classic neighborhood prediction: mean plus sim-weighted rating deviations."""
    base, status = _base_mean(m, u)
    if status is not STATUS_PREDICTED:
        return Prediction(m.clamp(base), status, 0)
    denom = math.fsum(abs(s) for _, s in nbrs)
    if not nbrs or denom == 0.0:
        return Prediction(m.clamp(base), STATUS_FALLBACK_USER, 0)
    num = math.fsum(s * (m.rating(v, i) - m.user_mean(v)) for v, s in nbrs)
    return Prediction(m.clamp(base + num / denom), STATUS_PREDICTED, len(nbrs))


def _fused_weights(nbrs, trust, cfg) -> tuple[list[float], str]:
    pairs = [(s, trust.get(v, 0.0)) for v, s in nbrs]
    if cfg.fusion == FUSION_IW:
        return fuse_iw(pairs), ""
    note = ""
    if math.fsum(t for _, t in pairs) == 0.0:
        note = "lw-sim-only"
    elif math.fsum(s for s, _ in pairs) == 0.0:
        note = "lw-trust-only"
    return fuse_lw(pairs, cfg.alpha), note


def predict_tacf(m: RatingMatrix, nbrs: list[tuple[int, float]],
                 trust: dict[int, float], cfg: MethodConfig,
                 u: int, i: int) -> Prediction:
    """Trust-fused prediction with the CF / user-mean / global-mean fallback chain."""
    if cfg.fusion not in (FUSION_IW, FUSION_LW):
        raise ConfigError(f"method {cfg.name} has no trust fusion")
    base, status = _base_mean(m, u)
    if status is not STATUS_PREDICTED:
        return Prediction(m.clamp(base), status, 0)
    if nbrs:
        try:
            fused, note = _fused_weights(nbrs, trust, cfg)
            denom = math.fsum(abs(f) for f in fused)
            if denom > 0.0:
                num = math.fsum(f * (m.rating(v, i) - m.user_mean(v))
                                for f, (v, _) in zip(fused, nbrs))
                return Prediction(m.clamp(base + num / denom),
                                  STATUS_PREDICTED, len(nbrs), note)
        except NoUsableWeights:
            pass
    fallback = predict_cf(m, nbrs, u, i)
    if fallback.status is STATUS_PREDICTED:
        return replace(fallback, note="cf-fallback")
    return fallback


def explain_prediction(m: RatingMatrix, nbrs, trust, cfg, u: int, i: int):
    """Prediction plus per-neighbor (sim, trust, fused-weight) audit rows.

    Fused weights are None when the prediction fell back past the fusion
    stage. Uses the same fusion code as predict_tacf, so the audit is the
    computation, not a reconstruction of it.
    """
    if cfg.fusion == FUSION_NONE:
        pred = predict_cf(m, nbrs, u, i)
        denom = math.fsum(abs(s) for _, s in nbrs)
        rows = [(v, s, None, s / denom if denom else None) for v, s in nbrs]
        return pred, rows
    pred = predict_tacf(m, nbrs, trust, cfg, u, i)
    fused: list[float | None] = [None] * len(nbrs)
    if pred.status is STATUS_PREDICTED and pred.note != "cf-fallback":
        try:
            fused = list(_fused_weights(nbrs, trust, cfg)[0])
        except NoUsableWeights:
            pass
    rows = [(v, s, trust.get(v, 0.0), f)
            for (v, s), f in zip(nbrs, fused)]
    return pred, rows
