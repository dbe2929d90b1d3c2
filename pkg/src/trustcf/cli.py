"""Command-line entry point: trust precompute, evaluation sweeps, ad-hoc predictions.

Configuration comes from an optional key=value manifest file with flag
overrides (flags win). All randomness flows from the single configured
seed. Exit codes: 0 success, 2 configuration error, 3 I/O error,
4 data-integrity error.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from dataclasses import dataclass

from . import evaluate as ev
from .data import (
    DEFAULT_BOUNDS,
    check_expected_counts,
    load_ratings,
    load_trust,
    summarize,
)
from .errors import ConfigError, TrustCFError
from .predict import ALL_METHODS, TRUST_NONE, method_config
from .similarity import SimilarityModel
from .trust import ATTENUATED, FORMULAS, GRAPH_EXPLICIT, GRAPH_FULL, TrustStore

DEFAULT_K_LIST = (5, 10, 15, 20, 25, 30, 35, 40, 45)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_INTEGRITY = 4


@dataclass
class RunConfig:
    ratings: str | None = None
    trust: str | None = None
    rating_min: float = DEFAULT_BOUNDS[0]
    rating_max: float = DEFAULT_BOUNDS[1]
    methods: tuple[str, ...] = ALL_METHODS
    k_list: tuple[int, ...] = DEFAULT_K_LIST
    alpha: float = 0.3
    alpha_sweep: tuple[float, ...] | None = None
    seed: int = 0
    rounds: int = 5
    train_fraction: float = 0.8
    split_mode: str = ev.SPLIT_RESAMPLE
    trust_store: str | None = None
    out: str = "out"
    jobs: int = 1
    expected_users: int | None = None
    expected_items: int | None = None
    expected_ratings: int | None = None
    expected_trust: int | None = None

    def validate(self) -> None:
        import os
        if not self.ratings:
            raise ConfigError("a ratings file is required (--ratings or manifest)")
        if not os.path.exists(self.ratings):
            raise ConfigError(f"ratings file not found: {self.ratings}")
        if self.trust is not None and not os.path.exists(self.trust):
            raise ConfigError(f"trust file not found: {self.trust}")
        if not self.rating_min < self.rating_max:
            raise ConfigError(
                f"rating bounds [{self.rating_min}, {self.rating_max}] are empty")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError(f"train fraction {self.train_fraction} outside (0, 1)")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha {self.alpha} outside [0, 1]")
        for a in self.alpha_sweep or ():
            if not 0.0 <= a <= 1.0:
                raise ConfigError(f"alpha-sweep value {a} outside [0, 1]")
        if self.rounds < 1:
            raise ConfigError("rounds must be >= 1")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if any(k < 1 for k in self.k_list) or not self.k_list:
            raise ConfigError("k-list must contain positive integers")
        if self.split_mode not in (ev.SPLIT_RESAMPLE, ev.SPLIT_KFOLD):
            raise ConfigError(f"unknown split mode {self.split_mode!r}")
        for name in self.methods:
            method_config(name)  # raises ConfigError on unknown names
        needs_trust = any(method_config(n).trust_source != TRUST_NONE
                          for n in self.methods)
        if needs_trust and self.trust is None:
            raise ConfigError("configured methods need trust data (--trust)")

    def bounds(self) -> tuple[float, float]:
        return (self.rating_min, self.rating_max)


_LIST_FIELDS = {"methods", "k_list", "alpha_sweep"}
_INT_FIELDS = {"seed", "rounds", "jobs",
               "expected_users", "expected_items", "expected_ratings", "expected_trust"}
_FLOAT_FIELDS = {"rating_min", "rating_max", "alpha", "train_fraction"}


def _parse_manifest_value(name: str, raw: str):
    if name in _LIST_FIELDS:
        parts = tuple(p.strip() for p in raw.split(",") if p.strip())
        if name == "methods":
            return parts
        return tuple(int(p) for p in parts) if name == "k_list" \
            else tuple(float(p) for p in parts)
    if name in _INT_FIELDS:
        return int(raw)
    if name in _FLOAT_FIELDS:
        return float(raw)
    return raw


def parse_manifest(text: str) -> RunConfig:
    """Parse "key = value" manifest text into a RunConfig."""
    known = {f.name for f in dataclasses.fields(RunConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"manifest line {lineno}: expected key = value")
        key, _, raw = line.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key not in known:
            raise ConfigError(f"manifest line {lineno}: unknown key {key!r}")
        try:
            values[key] = _parse_manifest_value(key, raw)
        except ValueError:
            raise ConfigError(
                f"manifest line {lineno}: bad value {raw!r} for {key}") from None
    return RunConfig(**values)


def manifest_text(cfg: RunConfig) -> str:
    """Serialize a RunConfig so that parse_manifest round-trips it exactly."""
    lines = []
    for f in dataclasses.fields(RunConfig):
        value = getattr(cfg, f.name)
        if value is None:
            continue
        if f.name in _LIST_FIELDS:
            value = ",".join(repr(v) if isinstance(v, float) else str(v)
                             for v in value)
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"


def _resolve_config(args) -> RunConfig:
    if getattr(args, "manifest", None):
        with open(args.manifest, encoding="utf-8") as fh:
            cfg = parse_manifest(fh.read())
    else:
        cfg = RunConfig()
    overrides = {
        "ratings": args.ratings,
        "trust": args.trust,
        "rating_min": args.rating_min,
        "rating_max": args.rating_max,
        "seed": args.seed,
        "trust_store": getattr(args, "trust_store", None),
        "out": getattr(args, "out", None),
    }
    if hasattr(args, "methods"):
        overrides.update(
            methods=_split_list(args.methods, str),
            k_list=_split_list(args.k_list, int),
            alpha=args.alpha,
            alpha_sweep=_split_list(args.alpha_sweep, float),
            rounds=args.rounds,
            train_fraction=args.train_fraction,
            split_mode=args.split_mode,
            jobs=args.jobs,
        )
    for key, value in overrides.items():
        if value is not None:
            setattr(cfg, key, value)
    return cfg


def _split_list(raw, cast):
    if raw is None:
        return None
    try:
        return tuple(cast(p.strip()) for p in str(raw).split(",") if p.strip())
    except ValueError:
        raise ConfigError(f"bad list value {raw!r}") from None


def _load_dataset(cfg: RunConfig):
    m = load_ratings(cfg.ratings, bounds=cfg.bounds())
    t = load_trust(cfg.trust, m.users) if cfg.trust else None
    check_expected_counts(summarize(m, t),
                          users=cfg.expected_users,
                          items=cfg.expected_items,
                          ratings=cfg.expected_ratings,
                          trust=cfg.expected_trust)
    return m, t


def _build_assets(cfg: RunConfig, m, t, require_store: bool) -> ev.TrustAssets:
    assets = ev.TrustAssets(t)
    if cfg.trust_store and t is not None:
        if require_store:
            store = TrustStore.load(cfg.trust_store, m.users,
                                    expected_hash=t.source_hash())
            assets.adopt_store(store)
    return assets


def cmd_precompute_trust(args) -> int:
    cfg = _resolve_config(args)
    cfg.validate()
    if not cfg.trust:
        raise ConfigError("precompute-trust needs a trust file (--trust)")
    if not cfg.trust_store:
        raise ConfigError("precompute-trust needs an output path (--trust-store)")
    m, t = _load_dataset(cfg)
    assets = ev.TrustAssets(t)
    graph, store = ((assets.full_graph, assets.full_store)
                    if args.trust_graph == GRAPH_FULL
                    else (assets.explicit_graph, assets.explicit_store))
    for u in m.users.ids():
        store.ensure_source(graph, u)
    store.save(cfg.trust_store, m.users, formula=args.trust_formula)
    by_category: dict[str, int] = {}
    for category, _, _, _ in store.entries.values():
        by_category[category] = by_category.get(category, 0) + 1
    print(f"trust store written: {cfg.trust_store}")
    print(f"graph: {args.trust_graph}  formula: {args.trust_formula}  "
          f"edges: {graph.n_edges}")
    print(f"nonzero pairs: {len(store.entries)}  "
          + "  ".join(f"{c}: {n}" for c, n in sorted(by_category.items())))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    import os
    cfg = _resolve_config(args)
    cfg.validate()
    m, t = _load_dataset(cfg)
    assets = _build_assets(cfg, m, t, require_store=True)
    plan = ev.make_splits(m, cfg.seed, cfg.rounds, cfg.train_fraction, cfg.split_mode)
    if "D-TaCF" in cfg.methods:
        print("note: D-TaCF is a best-effort reconstruction of an external "
              "baseline (see README)", file=sys.stderr)
    report = ev.sweep(m, assets, cfg.methods, cfg.k_list, plan,
                      alphas=cfg.alpha_sweep
                      or ([cfg.alpha] if cfg.alpha != 0.3 else None),
                      jobs=cfg.jobs)
    os.makedirs(cfg.out, exist_ok=True)
    report_path = os.path.join(cfg.out, "report.csv")
    summary_path = os.path.join(cfg.out, "summary.csv")
    ev.write_report_csv(report, report_path)
    ev.write_summary_csv(report, summary_path)
    print(f"split mode: {plan.mode}  rounds: {plan.rounds}  seed: {plan.seed}")
    print(f"wrote {report_path}")
    print(f"wrote {summary_path}")
    return EXIT_OK


def cmd_predict(args) -> int:
    cfg = _resolve_config(args)
    cfg.validate()
    m, t = _load_dataset(cfg)
    mcfg = method_config(args.method, alpha=cfg.alpha)
    if mcfg.trust_source != TRUST_NONE and t is None:
        raise ConfigError(f"method {mcfg.name} requires trust data (--trust)")
    try:
        u = m.users.dense(args.user)
        i = m.items.dense(args.item)
    except KeyError as exc:
        raise ConfigError(str(exc)) from None
    assets = _build_assets(cfg, m, t, require_store=True)
    model = SimilarityModel(m)
    nbrs = model.neighbors(u, i, args.k)
    trust_map = (assets.trust_map(u, [v for v, _ in nbrs],
                                  mcfg.trust_source, mcfg.trust_formula)
                 if mcfg.trust_source != TRUST_NONE else {})
    from .predict import explain_prediction
    pred, rows = explain_prediction(m, nbrs, trust_map, mcfg, u, i)
    print(f"user {args.user}  item {args.item}  method {mcfg.name}")
    print(f"prediction: {pred.value!r}  status: {pred.status}  "
          f"neighbors: {pred.n_neighbors}  note: {pred.note or '-'}")
    print("neighbor\tsim\ttrust\tweight")
    for v, s, tval, f in rows:
        print(f"{m.users.external(v)}\t{s!r}\t"
              f"{'-' if tval is None else repr(tval)}\t"
              f"{'-' if f is None else repr(f)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trustcf",
        description="Trust-aware collaborative filtering: trust inference, "
                    "rating prediction, and MAE benchmarking.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--manifest", help="key = value config file; flags override it")
        p.add_argument("--ratings", help="ratings triple file")
        p.add_argument("--trust", help="trust statement triple file")
        p.add_argument("--rating-min", dest="rating_min", type=float)
        p.add_argument("--rating-max", dest="rating_max", type=float)
        p.add_argument("--seed", type=int)
        p.add_argument("--trust-store", dest="trust_store",
                       help="path of a precomputed trust table")

    p_pre = sub.add_parser("precompute-trust",
                           help="run trust inference offline and persist the table")
    add_common(p_pre)
    p_pre.add_argument("--trust-graph", choices=(GRAPH_FULL, GRAPH_EXPLICIT),
                       default=GRAPH_FULL)
    p_pre.add_argument("--trust-formula", choices=FORMULAS, default=ATTENUATED)
    p_pre.set_defaults(func=cmd_precompute_trust)

    p_eval = sub.add_parser("evaluate", help="run the MAE benchmark sweep")
    add_common(p_eval)
    p_eval.add_argument("--methods", help="comma-separated method names")
    p_eval.add_argument("--k-list", dest="k_list", help="comma-separated K values")
    p_eval.add_argument("--alpha", type=float)
    p_eval.add_argument("--alpha-sweep", dest="alpha_sweep",
                        help="comma-separated alphas for the linear-fusion methods")
    p_eval.add_argument("--rounds", type=int)
    p_eval.add_argument("--train-fraction", dest="train_fraction", type=float)
    p_eval.add_argument("--split-mode", dest="split_mode",
                        choices=(ev.SPLIT_RESAMPLE, ev.SPLIT_KFOLD))
    p_eval.add_argument("--jobs", type=int)
    p_eval.add_argument("--out", help="output directory for report CSVs")
    p_eval.set_defaults(func=cmd_evaluate)

    p_pred = sub.add_parser("predict", help="predict one rating with audit detail")
    add_common(p_pred)
    p_pred.add_argument("--user", required=True, help="external user id")
    p_pred.add_argument("--item", required=True, help="external item id")
    p_pred.add_argument("--method", required=True)
    p_pred.add_argument("--k", type=int, default=20)
    p_pred.add_argument("--alpha", type=float)
    p_pred.set_defaults(func=cmd_predict)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except TrustCFError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_INTEGRITY


if __name__ == "__main__":
    raise SystemExit(main())
