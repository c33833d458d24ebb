"""Call-graph data model, document ingestion, and the sensitive-API registry.

The registry is an ordered list of fully-qualified API method names.  Its
order is what pins every downstream layout: row i of a centrality profile
and pixels 4i..4i+3 of a feature image always refer to registry entry i,
so the registry is immutable and content-hashed.

Graph documents are JSON (see ``load_graph``); graphs are stored directed
and analysed through :func:`undirected_view`.
"""

from __future__ import annotations

import hashlib
import importlib.resources
import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import InputFormatError

USER = "user_function"
SENSITIVE_API = "sensitive_api"
OTHER_API = "other_api"

#: signature prefixes treated as the crypto/reflection subset (used by the
#: encryption-obfuscation simulator to pick which APIs surface in the graph)
CRYPTO_PREFIXES = (
    "javax.crypto.",
    "java.security.",
    "java.lang.reflect.",
    "java.lang.Class.forName",
)


@dataclass(frozen=True)
class ApiRegistry:
    """Ordered, content-hashed list of sensitive API signatures."""

    entries: tuple[str, ...]
    content_hash: str

    @property
    def size(self) -> int:
        return len(self.entries)

    def index_of(self, signature: str) -> int | None:
        """Exact, case-sensitive lookup.  None when absent."""
        return self._index.get(signature)

    @cached_property
    def _index(self) -> dict[str, int]:
        return {sig: i for i, sig in enumerate(self.entries)}

    def crypto_indices(self) -> tuple[int, ...]:
        """Registry indices of the designated crypto/reflection API subset."""
        return tuple(
            i for i, sig in enumerate(self.entries)
            if sig.startswith(CRYPTO_PREFIXES)
        )


def _hash_entries(entries: tuple[str, ...]) -> str:
    return hashlib.sha256("\n".join(entries).encode("utf-8")).hexdigest()


def make_registry(entries) -> ApiRegistry:
    """Build a registry from an iterable of signatures (order preserved)."""
    entries = tuple(entries)
    if not entries:
        raise InputFormatError("registry needs at least one signature")
    seen = set()
    for sig in entries:
        if sig in seen:
            raise InputFormatError(f"duplicate signature in registry: {sig!r}")
        seen.add(sig)
    return ApiRegistry(entries=entries, content_hash=_hash_entries(entries))


def load_registry(document: bytes) -> ApiRegistry:
    """Parse a registry document: one signature per line, '#' comments ignored.

    Raises InputFormatError on an empty registry or a duplicated signature
    (reporting the offending line number).
    """
    try:
        text = document.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise InputFormatError(f"registry is not UTF-8: {exc}") from exc
    entries: list[str] = []
    seen: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line in seen:
            raise InputFormatError(
                f"duplicate signature at line {lineno} (first seen at line "
                f"{seen[line]}): {line!r}"
            )
        seen[line] = lineno
        entries.append(line)
    if not entries:
        raise InputFormatError("registry document contains no signatures")
    return ApiRegistry(entries=tuple(entries), content_hash=_hash_entries(tuple(entries)))


def default_registry() -> ApiRegistry:
    """The bundled desk-scale registry (64 signatures)."""
    data = importlib.resources.files("graphfam.data").joinpath("default_registry.txt")
    return load_registry(data.read_bytes())


@dataclass(frozen=True)
class Node:
    """A call-graph node: a user function or an API call.

    ``api_index`` is set iff the node's signature is in the registry the
    graph was loaded against.
    """

    kind: str
    signature: str | None = None
    api_index: int | None = None


class CallGraph:
    """Directed call graph, immutable after construction.

    ``nodes`` maps node id -> Node; ``edges`` is a frozenset of (src, dst)
    id pairs (duplicates collapse; self-loops allowed).  ``registry_hash``
    records the registry the sensitive tags were resolved against.
    """

    __slots__ = ("nodes", "edges", "registry_hash")

    def __init__(self, nodes: dict[str, Node], edges, registry_hash: str):
        for src, dst in edges:
            if src not in nodes:
                raise InputFormatError(f"edge references undeclared node id {src!r}")
            if dst not in nodes:
                raise InputFormatError(f"edge references undeclared node id {dst!r}")
        seen_api: dict[int, str] = {}
        for nid, node in nodes.items():
            if node.api_index is not None:
                if node.api_index in seen_api:
                    raise InputFormatError(
                        f"registry index {node.api_index} appears on two nodes: "
                        f"{seen_api[node.api_index]!r} and {nid!r}"
                    )
                seen_api[node.api_index] = nid
        self.nodes = dict(nodes)
        self.edges = frozenset(tuple(e) for e in edges)
        self.registry_hash = registry_hash

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def sensitive_nodes(self) -> dict[int, str]:
        """api_index -> node id for every sensitive API present."""
        return {
            node.api_index: nid
            for nid, node in self.nodes.items()
            if node.api_index is not None
        }

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, CallGraph)
            and self.nodes == other.nodes
            and self.edges == other.edges
            and self.registry_hash == other.registry_hash
        )


def _classify_api(signature: str, registry: ApiRegistry) -> Node:
    idx = registry.index_of(signature)
    if idx is None:
        return Node(kind=OTHER_API, signature=signature)
    return Node(kind=SENSITIVE_API, signature=signature, api_index=idx)


def load_graph(document: bytes, registry: ApiRegistry) -> CallGraph:
    """Parse a call-graph document (JSON, schema version 1).

    Schema::

        {"version": 1,
         "nodes": [{"id": "...", "kind": "user"} |
                   {"id": "...", "kind": "api", "signature": "..."}],
         "edges": [["src", "dst"], ...]}

    API nodes whose signature matches a registry entry (exact, case
    sensitive) are tagged with the registry index.  Duplicate edges are
    collapsed; duplicate node ids and edges to undeclared ids are errors.
    """
    try:
        doc = json.loads(document.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise InputFormatError(f"malformed call-graph document: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("version") != 1:
        raise InputFormatError("call-graph document must carry version: 1")
    raw_nodes = doc.get("nodes")
    raw_edges = doc.get("edges")
    if not isinstance(raw_nodes, list) or not isinstance(raw_edges, list):
        raise InputFormatError("call-graph document needs 'nodes' and 'edges' arrays")

    nodes: dict[str, Node] = {}
    for entry in raw_nodes:
        if not isinstance(entry, dict) or "id" not in entry or "kind" not in entry:
            raise InputFormatError(f"bad node entry: {entry!r}")
        nid = entry["id"]
        if not isinstance(nid, str):
            raise InputFormatError(f"node id must be a string, got {nid!r}")
        if nid in nodes:
            raise InputFormatError(f"duplicate node id {nid!r}")
        kind = entry["kind"]
        if kind == "user":
            if "signature" in entry:
                raise InputFormatError(f"user node {nid!r} must not carry a signature")
            nodes[nid] = Node(kind=USER)
        elif kind == "api":
            sig = entry.get("signature")
            if not isinstance(sig, str):
                raise InputFormatError(f"api node {nid!r} needs a string signature")
            nodes[nid] = _classify_api(sig, registry)
        else:
            raise InputFormatError(f"unknown node kind {kind!r} on {nid!r}")

    edges = set()
    for pair in raw_edges:
        if not isinstance(pair, list) or len(pair) != 2:
            raise InputFormatError(f"bad edge entry: {pair!r}")
        src, dst = pair
        if src not in nodes:
            raise InputFormatError(f"edge references undeclared node id {src!r}")
        if dst not in nodes:
            raise InputFormatError(f"edge references undeclared node id {dst!r}")
        edges.add((src, dst))

    return CallGraph(nodes=nodes, edges=edges, registry_hash=registry.content_hash)


def serialize_graph(g: CallGraph) -> bytes:
    """Canonical (sorted) document bytes; load_graph round-trips exactly."""
    nodes = []
    for nid in sorted(g.nodes):
        node = g.nodes[nid]
        if node.kind == USER:
            nodes.append({"id": nid, "kind": "user"})
        else:
            nodes.append({"id": nid, "kind": "api", "signature": node.signature})
    edges = [[src, dst] for src, dst in sorted(g.edges)]
    doc = {"version": 1, "nodes": nodes, "edges": edges}
    return json.dumps(doc, indent=1, sort_keys=True).encode("utf-8")


def build_graph(user_ids, api_signatures, edges, registry: ApiRegistry) -> CallGraph:
    """Programmatic constructor used by the synthesizer and tests.

    ``api_signatures`` maps node id -> signature; sensitive tagging follows
    the registry exactly like document loading does.
    """
    nodes: dict[str, Node] = {}
    for nid in user_ids:
        if nid in nodes:
            raise InputFormatError(f"duplicate node id {nid!r}")
        nodes[nid] = Node(kind=USER)
    for nid, sig in api_signatures.items():
        if nid in nodes:
            raise InputFormatError(f"duplicate node id {nid!r}")
        nodes[nid] = _classify_api(sig, registry)
    return CallGraph(nodes=nodes, edges=set(edges), registry_hash=registry.content_hash)


class UndirectedView:
    """Symmetric adjacency over a CallGraph in CSR form.

    Node order is the graph's insertion order; all numeric consumers are
    written to be independent of that order (integer sums / fsum), which is
    what makes profiles invariant under node relabeling.  Self-loops are
    kept once: they count as walks (katz) but are excluded from neighbor
    sets for degree and BFS purposes where they are inert.
    """

    __slots__ = ("ids", "index", "n", "indptr", "indices", "degrees", "walk_degrees")

    def __init__(self, g: CallGraph):
        self.ids = list(g.nodes)
        self.index = {nid: i for i, nid in enumerate(self.ids)}
        self.n = len(self.ids)
        neighbor_sets: list[set[int]] = [set() for _ in range(self.n)]
        self_loops = [False] * self.n
        for src, dst in g.edges:
            u, v = self.index[src], self.index[dst]
            if u == v:
                self_loops[u] = True
            else:
                neighbor_sets[u].add(v)
                neighbor_sets[v].add(u)
        counts = np.array([len(s) for s in neighbor_sets], dtype=np.int64)
        # walk adjacency includes the self-loop entry once
        walk_counts = counts + np.array(self_loops, dtype=np.int64)
        self.indptr = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(walk_counts, out=self.indptr[1:])
        self.indices = np.zeros(int(self.indptr[-1]), dtype=np.int64)
        for i, s in enumerate(neighbor_sets):
            nbrs = sorted(s)
            if self_loops[i]:
                nbrs.append(i)
            self.indices[self.indptr[i]:self.indptr[i + 1]] = nbrs
        self.degrees = counts          # simple degree: distinct neighbors != self
        self.walk_degrees = walk_counts  # row sums of the walk adjacency

    def neighbors(self, i: int) -> np.ndarray:
        """Walk neighbors of node i (may include i itself for a self-loop)."""
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def neighbor_ids(self, nid: str) -> set[str]:
        i = self.index[nid]
        return {self.ids[j] for j in self.neighbors(i)}

    def adjacency_pairs(self) -> set[tuple[str, str]]:
        """Symmetric id-pair set, mostly for tests and idempotence checks."""
        pairs = set()
        for i in range(self.n):
            for j in self.neighbors(i):
                pairs.add((self.ids[i], self.ids[j]))
                pairs.add((self.ids[j], self.ids[i]))
        return pairs


def undirected_view(g: CallGraph) -> UndirectedView:
    """Symmetric adjacency structure for centrality computation."""
    return UndirectedView(g)
