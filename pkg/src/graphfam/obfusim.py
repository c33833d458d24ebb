"""Call-graph transforms that simulate bytecode obfuscators.

Each transform is a pure, seeded graph -> graph function; none of them
ever removes a sensitive-API node.  Obfuscators that only touch
intra-method control flow (nop, goto, reorder, field/method renames) are
identity at call-graph granularity and carry a tag so benchmark tables can
still report one row per obfuscator.

CLI transform spec grammar (stages applied left to right)::

    spec      = stage ("+" stage)*
    stage     = "rename" | "callind:RATE" | "junk:K:DEGREE" | "encsim:M"
              | "id:TAG" | alias
    alias     = "classrename" | "fieldrename" | "methodrename"
              | "constenc" | "assetenc" | "libenc" | "resenc"
              | "arith:K:DEGREE" | "goto" | "nop" | "reorder"

e.g. ``rename+callind:0.5+junk:20:2``.
"""

from __future__ import annotations

from dataclasses import dataclass

from .callgraph import SENSITIVE_API, USER, ApiRegistry, CallGraph, Node
from .errors import InputFormatError
from .rng import SplitMix64, mix64


def _fresh_ids(prefix: str, count: int, taken, rng: SplitMix64) -> list[str]:
    """Deterministic unique ids that cannot collide with existing ones."""
    out = []
    while len(out) < count:
        cand = f"{prefix}{rng.next_u64():016x}"
        if cand not in taken:
            taken.add(cand)
            out.append(cand)
    return out


def rename(g: CallGraph, seed: int) -> CallGraph:
    """Replace every user-function id via a seeded bijection.

    API nodes are untouched; the result is isomorphic to the input, so
    feature images are bit-identical (rename obfuscators are free wins).
    """
    rng = SplitMix64(mix64(seed, 0x52454E41))
    user_ids = sorted(nid for nid, n in g.nodes.items() if n.kind == USER)
    taken = set(g.nodes)
    fresh = _fresh_ids("fn_", len(user_ids), taken, rng)
    order = list(range(len(user_ids)))
    rng.shuffle(order)
    mapping = {old: fresh[order[i]] for i, old in enumerate(user_ids)}
    nodes = {mapping.get(nid, nid): node for nid, node in g.nodes.items()}
    edges = {(mapping.get(u, u), mapping.get(v, v)) for u, v in g.edges}
    return CallGraph(nodes=nodes, edges=edges, registry_hash=g.registry_hash)


def call_indirection(g: CallGraph, rate: float, seed: int) -> CallGraph:
    """Replace each edge (u,v), independently with probability ``rate``,
    by (u,w),(w,v) through a fresh user-function wrapper w."""
    if not 0.0 <= rate <= 1.0:
        raise ValueError("rate must be in [0, 1]")
    rng = SplitMix64(mix64(seed, 0x43414C4C))
    nodes = dict(g.nodes)
    edges = set()
    taken = set(g.nodes)
    for u, v in sorted(g.edges):
        if rng.random() < rate:
            (w,) = _fresh_ids("tramp_", 1, taken, rng)
            nodes[w] = Node(kind=USER)
            edges.add((u, w))
            edges.add((w, v))
        else:
            edges.add((u, v))
    return CallGraph(nodes=nodes, edges=edges, registry_hash=g.registry_hash)


def junk_code(g: CallGraph, k: int, attach_degree: int, seed: int) -> CallGraph:
    """Add ``k`` junk user functions, each wired with ``attach_degree`` edges
    to/from uniformly chosen non-sensitive nodes.

    Junk code never calls sensitive APIs, so sensitive-node degrees are
    unchanged; profiles move only through the N-dependent denominators.
    """
    if k < 0 or attach_degree < 0:
        raise ValueError("k and attach_degree must be >= 0")
    if k == 0:
        return g
    rng = SplitMix64(mix64(seed, 0x4A554E4B))
    eligible = sorted(nid for nid, n in g.nodes.items() if n.kind != SENSITIVE_API)
    if not eligible:
        raise InputFormatError("junk_code needs at least one non-sensitive node")
    nodes = dict(g.nodes)
    edges = set(g.edges)
    taken = set(g.nodes)
    for j in _fresh_ids("junk_", k, taken, rng):
        nodes[j] = Node(kind=USER)
        for _ in range(attach_degree):
            target = rng.choice(eligible)
            if rng.below(2):
                edges.add((j, target))
            else:
                edges.add((target, j))
        eligible.append(j)
    return CallGraph(nodes=nodes, edges=edges, registry_hash=g.registry_hash)


def encryption_sim(g: CallGraph, registry: ApiRegistry, m: int, seed: int) -> CallGraph:
    """Model string/asset encryption: decryption routines surface as calls
    into up to ``m`` designated crypto/reflection APIs.

    Adds the API node when absent and one edge from a seeded-random user
    function to it.  Idempotent in the node set for the same target APIs.
    """
    if m < 0:
        raise ValueError("m must be >= 0")
    if m == 0:
        return g
    crypto = registry.crypto_indices()
    if not crypto:
        raise InputFormatError("registry designates no crypto/reflection APIs")
    rng = SplitMix64(mix64(seed, 0x454E4352))
    users = sorted(nid for nid, n in g.nodes.items() if n.kind == USER)
    if not users:
        raise InputFormatError("encryption_sim needs at least one user node")
    nodes = dict(g.nodes)
    edges = set(g.edges)
    present = {n.api_index: nid for nid, n in g.nodes.items() if n.api_index is not None}
    picks = list(crypto)
    rng.shuffle(picks)
    for api_idx in picks[:m]:
        sig = registry.entries[api_idx]
        if api_idx in present:
            target = present[api_idx]
        else:
            target = f"api_{sig}"
            if target in nodes:  # id collision with an unrelated node
                (target,) = _fresh_ids("api_", 1, set(nodes), rng)
            nodes[target] = Node(kind=SENSITIVE_API, signature=sig, api_index=api_idx)
            present[api_idx] = target
        edges.add((rng.choice(users), target))
    return CallGraph(nodes=nodes, edges=edges, registry_hash=g.registry_hash)


@dataclass(frozen=True)
class Transform:
    """One stage of an obfuscation pipeline.

    kind: rename | call_indirection | junk_code | encryption_sim | identity
    """

    kind: str
    tag: str = ""
    rate: float = 0.0
    k: int = 0
    attach_degree: int = 0
    m: int = 0

    def apply(self, g: CallGraph, registry: ApiRegistry, seed: int) -> CallGraph:
        if self.kind == "rename":
            return rename(g, seed)
        if self.kind == "call_indirection":
            return call_indirection(g, self.rate, seed)
        if self.kind == "junk_code":
            return junk_code(g, self.k, self.attach_degree, seed)
        if self.kind == "encryption_sim":
            return encryption_sim(g, registry, self.m, seed)
        if self.kind == "identity":
            return g
        raise ValueError(f"unknown transform kind {self.kind!r}")

    @property
    def name(self) -> str:
        return self.tag or self.kind


def compose(transforms) -> "Pipeline":
    return Pipeline(tuple(transforms))


@dataclass(frozen=True)
class Pipeline:
    """Ordered transforms; per-stage seeds derive from the composite seed."""

    stages: tuple[Transform, ...]

    def apply(self, g: CallGraph, registry: ApiRegistry, seed: int) -> CallGraph:
        out = g
        for i, stage in enumerate(self.stages):
            out = stage.apply(out, registry, mix64(seed, i, 0x53544147))
        return out

    @property
    def name(self) -> str:
        return "+".join(s.name for s in self.stages) if self.stages else "identity"


_ALIASES = {
    "classrename": lambda args: Transform(kind="rename", tag="ClassRename"),
    "fieldrename": lambda args: Transform(kind="identity", tag="FieldRename"),
    "methodrename": lambda args: Transform(kind="identity", tag="MethodRename"),
    "constenc": lambda args: Transform(kind="encryption_sim", tag="ConstStringEncryption",
                                       m=int(args[0]) if args else 3),
    "assetenc": lambda args: Transform(kind="encryption_sim", tag="AssetEncryption",
                                       m=int(args[0]) if args else 1),
    "libenc": lambda args: Transform(kind="encryption_sim", tag="LibEncryption",
                                     m=int(args[0]) if args else 1),
    "resenc": lambda args: Transform(kind="encryption_sim", tag="ResStringEncryption",
                                     m=int(args[0]) if args else 2),
    "arith": lambda args: Transform(kind="junk_code", tag="ArithmeticBranch",
                                    k=int(args[0]) if args else 10,
                                    attach_degree=int(args[1]) if len(args) > 1 else 2),
    "goto": lambda args: Transform(kind="identity", tag="Goto"),
    "nop": lambda args: Transform(kind="identity", tag="Nop"),
    "reorder": lambda args: Transform(kind="identity", tag="Reorder"),
}


def parse_transform(spec: str) -> Pipeline:
    """Parse the CLI transform spec grammar (see module docstring)."""
    stages = []
    if not spec.strip():
        return Pipeline(())
    for part in spec.split("+"):
        fields = part.strip().split(":")
        name, args = fields[0].lower(), fields[1:]
        try:
            if name == "rename":
                stages.append(Transform(kind="rename", tag="rename"))
            elif name == "callind":
                stages.append(Transform(kind="call_indirection", tag=f"callind:{args[0]}",
                                        rate=float(args[0])))
            elif name == "junk":
                stages.append(Transform(kind="junk_code", tag=part.strip(),
                                        k=int(args[0]), attach_degree=int(args[1])))
            elif name == "encsim":
                stages.append(Transform(kind="encryption_sim", tag=part.strip(),
                                        m=int(args[0])))
            elif name == "id":
                stages.append(Transform(kind="identity", tag=args[0] if args else "identity"))
            elif name in _ALIASES:
                stages.append(_ALIASES[name](args))
            else:
                raise InputFormatError(f"unknown transform {name!r} in spec {spec!r}")
        except (IndexError, ValueError) as exc:
            raise InputFormatError(f"bad transform stage {part!r}: {exc}") from exc
    return Pipeline(tuple(stages))


def paper_suite(indirection_rate: float = 1.0, junk_k: int = 10,
                junk_degree: int = 2) -> list[tuple[str, Pipeline]]:
    """The 12-obfuscator benchmark rows plus the all-at-once row."""
    singles = [
        ("ClassRename", "classrename"),
        ("FieldRename", "fieldrename"),
        ("MethodRename", "methodrename"),
        ("ConstStringEncryption", "constenc"),
        ("AssetEncryption", "assetenc"),
        ("LibEncryption", "libenc"),
        ("ResStringEncryption", "resenc"),
        ("ArithmeticBranch", f"arith:{junk_k}:{junk_degree}"),
        ("CallIndirection", f"callind:{indirection_rate}"),
        ("Goto", "goto"),
        ("Nop", "nop"),
        ("Reorder", "reorder"),
    ]
    rows = [(name, parse_transform(spec)) for name, spec in singles]
    combined = parse_transform("+".join(spec for _, spec in singles))
    rows.append(("All12", combined))
    return rows
