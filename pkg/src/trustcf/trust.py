"""Implicit trust inference over a sparse explicit trust network.

The estimator distinguishes four kinds of (u, v) pairs: an explicit
statement (trust 1), a shared-trustee overlap (Jaccard score), a
propagation path (shortest path on the reciprocal-weight graph, with an
optional hop-count attenuation penalty), and unreachable (trust 0).

Everything here depends only on the explicit trust statements, never on
ratings, so inference can be precomputed offline and reused across
train/test splits.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from itertools import combinations

from .data import ExplicitTrust, IdIndex
from .errors import ConfigError, IntegrityError

ATTENUATED = "attenuated"  # 1 / (hops * length)
PLAIN = "plain"            # 1 / length
FORMULAS = (ATTENUATED, PLAIN)

CAT_EXPLICIT = "explicit"
CAT_COMMON_TRUSTEE = "common-trustee"
CAT_PROPAGATED = "propagated"
CAT_UNREACHABLE = "unreachable"

GRAPH_FULL = "full"          # explicit edges + Jaccard overlap edges
GRAPH_EXPLICIT = "explicit"  # explicit edges only


def jaccard_trust(trust: ExplicitTrust, u: int, v: int) -> float:
    """|S(u) & S(v)| / |S(u) | S(v)|; 0 when the union is empty."""
    su = trust.trustees(u)
    sv = trust.trustees(v)
    union = len(su | sv)
    if union == 0:
        return 0.0
    return len(su & sv) / union


class TrustGraph:
    """Weighted directed graph of base trust scores, weights in (0, 1].

    Explicit statements contribute weight-1 edges; pairs with shared
    trustees contribute symmetric Jaccard edges wherever no explicit edge
    already covers that direction. Immutable after construction.
    """

    def __init__(self, adjacency: dict[int, dict[int, float]],
                 explicit=frozenset()):
        self.adj = {u: dict(nbrs) for u, nbrs in adjacency.items()}
        self.explicit = frozenset(explicit)
        for u, nbrs in self.adj.items():
            for v, w in nbrs.items():
                if u == v:
                    raise IntegrityError(f"self-edge on node {u}")
                if not 0.0 < w <= 1.0:
                    raise IntegrityError(f"edge weight {w} for ({u}, {v}) not in (0, 1]")
        for u, v in self.explicit:
            if self.adj.get(u, {}).get(v) != 1.0:
                raise IntegrityError(f"explicit edge ({u}, {v}) must have weight 1")

    @classmethod
    def from_explicit(cls, trust: ExplicitTrust, include_overlap: bool = True) -> "TrustGraph":
        adj: dict[int, dict[int, float]] = {}
        for u, v in trust.pairs:
            adj.setdefault(u, {})[v] = 1.0
        if include_overlap:
            # Pairs with a shared trustee are exactly the co-trustor pairs
            # of some user; enumerate those instead of all N^2 pairs.
            trustors: dict[int, list[int]] = {}
            for u, v in sorted(trust.pairs):
                trustors.setdefault(v, []).append(u)
            candidate_pairs = set()
            for co in trustors.values():
                candidate_pairs.update(combinations(sorted(co), 2))
            for i, j in sorted(candidate_pairs):
                w = jaccard_trust(trust, i, j)
                if (i, j) not in trust.pairs:
                    adj.setdefault(i, {})[j] = w
                if (j, i) not in trust.pairs:
                    adj.setdefault(j, {})[i] = w
        return cls(adj, frozenset(trust.pairs))

    def weight(self, u: int, v: int) -> float | None:
        return self.adj.get(u, {}).get(v)

    def edges(self):
        for u in sorted(self.adj):
            for v in sorted(self.adj[u]):
                yield u, v, self.adj[u][v]

    @property
    def n_edges(self) -> int:
        return sum(len(nbrs) for nbrs in self.adj.values())


def build_trust_graph(trust: ExplicitTrust, include_overlap: bool = True) -> TrustGraph:
    """Base trust graph: explicit edges at weight 1 plus Jaccard overlap edges."""
    return TrustGraph.from_explicit(trust, include_overlap)


class ReciprocalGraph:
    """View of a TrustGraph with edge length 1/weight (absent = infinite).

    High trust means a short edge, so minimum-length paths follow the most
    trusted chains. Every length is >= 1 because weights are <= 1.
    """

    def __init__(self, graph: TrustGraph):
        self.graph = graph
        self.lengths: dict[int, list[tuple[int, float]]] = {
            u: sorted((v, 1.0 / w) for v, w in nbrs.items())
            for u, nbrs in graph.adj.items()
        }

    @property
    def n_edges(self) -> int:
        return sum(len(nbrs) for nbrs in self.lengths.values())


def _dijkstra(rg: ReciprocalGraph, source: int,
              target: int | None = None) -> dict[int, tuple[float, int, tuple[int, ...]]]:
    """Single-source shortest paths under the (length, hops, node-seq) order.

    Ties on total length prefer fewer hops, then the lexicographically
    smallest node sequence, making the result total and deterministic.
    Lengths are all >= 1, so plain label-setting with lazy deletion is exact.
    """
    done: dict[int, tuple[float, int, tuple[int, ...]]] = {}
    heap: list[tuple[float, int, tuple[int, ...]]] = [(0.0, 0, (source,))]
    while heap:
        dist, hops, path = heapq.heappop(heap)
        node = path[-1]
        if node in done:
            continue
        done[node] = (dist, hops, path)
        if node == target:
            break
        for nbr, length in rg.lengths.get(node, ()):
            if nbr not in done:
                heapq.heappush(heap, (dist + length, hops + 1, path + (nbr,)))
    return done


def shortest_trust_path(rg: ReciprocalGraph, u: int, v: int
                        ) -> tuple[float, int, tuple[int, ...]] | None:
    """Minimal-length u->v path in the reciprocal graph, or None if unreachable.

    Returns (total length, hop count, node sequence).
    """
    if u == v:
        raise ValueError("source and target must differ")
    found = _dijkstra(rg, u, target=v).get(v)
    if found is None:
        return None
    dist, hops, path = found
    return dist, hops, path


def trust_value(formula: str, length: float, hops: int, direct_weight: float | None) -> float:
    """Trust score of a shortest path; single-hop paths score their edge weight.

    The single-hop case is mathematically 1/length under either formula
    (length = 1/weight) but is returned as the stored weight so explicit
    and overlap scores reproduce exactly.
    """
    if hops == 1:
        assert direct_weight is not None
        return direct_weight
    if formula == ATTENUATED:
        return 1.0 / (hops * length)
    if formula == PLAIN:
        return 1.0 / length
    raise ConfigError(f"unknown trust formula {formula!r}")


@dataclass(frozen=True)
class TrustEstimate:
    """Inferred trust of one user on another, with its derivation tag."""
    value: float
    category: str
    length: float | None  # shortest-path length, None when unreachable
    hops: int | None      # edges on that path, None when unreachable

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise IntegrityError(f"trust value {self.value} outside [0, 1]")


_UNREACHABLE = TrustEstimate(0.0, CAT_UNREACHABLE, None, None)


class TrustStore:
    """Memoized single-source trust tables with provenance tracking.

    Entries are (category, length, hops, direct-weight) per reachable
    (u, v) pair; a source in ``complete`` has its whole row cached, so
    cache misses for complete sources mean unreachable. Entry writes are
    idempotent per pair, so concurrent readers never observe torn state.
    """

    def __init__(self, source_hash: str = "", graph_kind: str = GRAPH_FULL):
        self.source_hash = source_hash
        self.graph_kind = graph_kind
        self.entries: dict[tuple[int, int], tuple[str, float, int, float | None]] = {}
        self.complete: set[int] = set()
        self._rg: ReciprocalGraph | None = None
        self._rg_src: TrustGraph | None = None

    @classmethod
    def for_graph(cls, trust: ExplicitTrust, graph_kind: str = GRAPH_FULL) -> "TrustStore":
        return cls(trust.source_hash(), graph_kind)

    def _reciprocal(self, g: TrustGraph) -> ReciprocalGraph:
        if self._rg_src is not g:
            if self._rg_src is not None and self.entries:
                raise IntegrityError("trust store reused with a different graph")
            self._rg_src = g
            self._rg = ReciprocalGraph(g)
        return self._rg

    def ensure_source(self, g: TrustGraph, u: int) -> None:
        """Run (once) the single-source shortest-path pass from u."""
        if u in self.complete:
            return
        rg = self._reciprocal(g)
        for v, (dist, hops, path) in _dijkstra(rg, u).items():
            if v == u:
                continue
            if (u, v) in g.explicit:
                category = CAT_EXPLICIT
            elif hops == 1:
                category = CAT_COMMON_TRUSTEE
            else:
                category = CAT_PROPAGATED
            direct = g.adj[u][v] if hops == 1 else None
            self.entries[(u, v)] = (category, dist, hops, direct)
        self.complete.add(u)

    def lookup(self, u: int, v: int):
        """Cached entry, or None for a known-unreachable pair; KeyError on cold source."""
        entry = self.entries.get((u, v))
        if entry is None and u not in self.complete:
            raise KeyError(u)
        return entry

    def save(self, path, users: IdIndex, formula: str = ATTENUATED) -> None:
        """Write a lossless text table: u, v, value, category, length, hops."""
        if formula not in FORMULAS:
            raise ConfigError(f"unknown trust formula {formula!r}")
        rows = []
        for (u, v), (category, length, hops, direct) in self.entries.items():
            rows.append((users.external(u), users.external(v),
                         trust_value(formula, length, hops, direct),
                         category, length, hops))
        rows.sort()
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("# trustcf trust store v1\n")
            fh.write(f"# source_hash: {self.source_hash}\n")
            fh.write(f"# graph: {self.graph_kind}\n")
            fh.write(f"# formula: {formula}\n")
            fh.write("# complete_sources: "
                     + ",".join(users.external(u) for u in sorted(self.complete)) + "\n")
            for u_ext, v_ext, value, category, length, hops in rows:
                fh.write(f"{u_ext}\t{v_ext}\t{value!r}\t{category}\t{length!r}\t{hops}\n")

    @classmethod
    def load(cls, path, users: IdIndex, expected_hash: str | None = None) -> "TrustStore":
        """Reload a saved store; refuses a store whose provenance hash differs."""
        header: dict[str, str] = {}
        store = None
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if line.startswith("#"):
                    body = line[1:].strip()
                    if ":" in body:
                        key, _, value = body.partition(":")
                        header[key.strip()] = value.strip()
                    continue
                if store is None:
                    store = cls._from_header(header, users, expected_hash)
                if not line:
                    continue
                u_ext, v_ext, value, category, length, hops = line.split("\t")
                u = users.intern(u_ext)
                v = users.intern(v_ext)
                hops_i = int(hops)
                direct = float(value) if hops_i == 1 else None
                store.entries[(u, v)] = (category, float(length), hops_i, direct)
        if store is None:
            store = cls._from_header(header, users, expected_hash)
        return store

    @classmethod
    def _from_header(cls, header, users, expected_hash):
        source_hash = header.get("source_hash", "")
        if expected_hash is not None and source_hash != expected_hash:
            raise IntegrityError(
                "trust store is stale: source hash "
                f"{source_hash or '<missing>'} does not match current trust data "
                f"{expected_hash}")
        store = cls(source_hash, header.get("graph", GRAPH_FULL))
        listed = header.get("complete_sources", "")
        if listed:
            store.complete = {users.intern(ext) for ext in listed.split(",")}
        return store


def infer_trust(store: TrustStore, g: TrustGraph, u: int, v: int,
                formula: str = ATTENUATED) -> TrustEstimate:
    """Estimate u's trust in v from the graph, memoized through ``store``."""
    if u == v:
        raise ValueError("source and target must differ")
    if formula not in FORMULAS:
        raise ConfigError(f"unknown trust formula {formula!r}")
    store.ensure_source(g, u)
    entry = store.lookup(u, v)
    if entry is None:
        return _UNREACHABLE
    category, length, hops, direct = entry
    return TrustEstimate(trust_value(formula, length, hops, direct),
                         category, length, hops)


def infer_all_from(store: TrustStore, g: TrustGraph, u: int, targets,
                   formula: str = ATTENUATED) -> dict[int, TrustEstimate]:
    """Batch inference from one source; one shortest-path pass serves all targets."""
    store.ensure_source(g, u)
    return {v: infer_trust(store, g, u, v, formula) for v in targets}
