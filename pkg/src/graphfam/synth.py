"""Synthetic call-graph families for desk-scale benchmarking.

Real labeled corpora are not redistributable, so benchmarks run on
generated families: each family owns a core of signature APIs plus a
preferential-attachment scaffold whose wiring parameters differ per
family, and every variant is a fresh polymorphic draw.  Generation runs
entirely on the portable SplitMix64 stream, so a (config, seed) pair
reproduces the same dataset bit-for-bit on any platform.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .callgraph import ApiRegistry, CallGraph, Node
from .centrality import KatzParams, profile
from .dataset import LabeledDataset
from .errors import InputFormatError
from .imagegen import layout_for, to_image
from .rng import SplitMix64, mix64


@dataclass(frozen=True)
class FamilySpec:
    """Generative recipe for one family.

    Each family has a deterministic template graph (scaffold plus
    signature-API wiring); variants are polymorphic mutations of it.
    ``api_intensity`` gives the caller count per signature API: it is what
    keeps families apart when their cores overlap (same APIs, used with
    different intensity), mirroring how real families share sensitive APIs
    but wire them differently.
    """

    family: str
    signature_apis: tuple[int, ...]
    api_intensity: tuple[int, ...]
    size_range: tuple[int, int]
    extra_edge_factor: float
    depth_exponent: float
    attach_max: int
    template_seed: int


@dataclass(frozen=True)
class SynthConfig:
    families: int = 10
    variants: int = 200
    seed: int = 0
    core_size: int = 6
    overlap_budget: int = 0
    noise_api_rate: float = 0.05
    size_range: tuple[int, int] = (40, 90)
    growth_range: tuple[int, int] = (5, 30)  # per-variant scaffold mutation

    def __post_init__(self):
        if self.families < 2:
            raise ValueError("need at least 2 families")
        if self.variants < 1:
            raise ValueError("need at least 1 variant per family")


def gen_family_specs(cfg: SynthConfig, registry: ApiRegistry) -> list[FamilySpec]:
    """Deterministic family recipes with pairwise core overlap <= budget.

    Cores are consecutive windows over a seeded shuffle of the registry;
    adjacent families share exactly ``overlap_budget`` APIs.
    """
    step = cfg.core_size - cfg.overlap_budget
    if step < 0:
        raise InputFormatError("overlap budget cannot exceed the core size")
    needed = cfg.core_size + (cfg.families - 1) * step
    if needed > registry.size:
        raise InputFormatError(
            f"registry too small: {cfg.families} families with core {cfg.core_size} "
            f"and overlap {cfg.overlap_budget} need {needed} APIs, registry has "
            f"{registry.size}"
        )
    rng = SplitMix64(mix64(cfg.seed, 0x46414D53))
    pool = list(range(registry.size))
    rng.shuffle(pool)
    specs = []
    seen_codes: set[tuple] = set()

    def far_enough(core, code):
        # families sharing a core must differ in >= 2 intensity slots
        for other_core, other_code in seen_codes:
            if other_core == core:
                diff = sum(a != b for a, b in zip(code, other_code))
                if diff < 2:
                    return False
        return True

    for f in range(cfg.families):
        start = f * step
        core = tuple(sorted(pool[start:start + cfg.core_size]))
        # intensity code: levels 1/4/7 with jitter < 2 never overlap, so
        # families sharing APIs stay distinguishable by usage intensity
        intensity = tuple(1 + 3 * rng.below(3) for _ in core)
        for _ in range(1000):
            if far_enough(core, intensity):
                break
            intensity = tuple(1 + 3 * rng.below(3) for _ in core)
        seen_codes.add((core, intensity))
        lo = cfg.size_range[0] + rng.below(11)
        hi = cfg.size_range[1] + rng.below(21)
        specs.append(
            FamilySpec(
                family=f"family{f:02d}",
                signature_apis=core,
                api_intensity=intensity,
                size_range=(lo, hi),
                extra_edge_factor=0.15 + 0.35 * rng.random(),
                depth_exponent=1.0 + 3.0 * rng.random(),
                attach_max=2,
                template_seed=rng.next_u64(),
            )
        )
    return specs


def gen_variant(spec: FamilySpec, rng: SplitMix64, registry: ApiRegistry,
                noise_api_rate: float = 0.0,
                growth_range: tuple[int, int] = (5, 30)) -> CallGraph:
    """One polymorphic variant of the family template.

    The template (preferential-attachment scaffold + signature APIs wired
    at intensity-coded caller counts) is rebuilt deterministically from
    the family's template seed; the variant stream then mutates it: extra
    scaffold growth, a few rewired edges, occasional extra API callers and
    sprinkled noise APIs.
    """
    trng = SplitMix64(spec.template_seed)
    n_users = trng.randint(*spec.size_range)
    nodes: dict[str, Node] = {}
    edges: set[tuple[str, str]] = set()
    uid = [f"u{i:05d}" for i in range(n_users)]
    for nid in uid:
        nodes[nid] = Node(kind="user_function")

    # preferential attachment: sample targets from the running endpoint list
    endpoints = [0]
    for i in range(1, n_users):
        t = endpoints[trng.below(len(endpoints))]
        edges.add((uid[i], uid[t]))
        endpoints.extend((i, t))
    for _ in range(int(round(spec.extra_edge_factor * n_users))):
        a = endpoints[trng.below(len(endpoints))]
        b = trng.below(n_users)
        if a != b:
            edges.add((uid[a], uid[b]))
            endpoints.extend((a, b))

    def biased_user(stream: SplitMix64) -> str:
        # depth_exponent > 1 biases callers toward early (hub-like) nodes
        return uid[int(n_users * (stream.random() ** spec.depth_exponent))]

    def add_api(api_idx: int, callers: int, stream: SplitMix64) -> None:
        nid = f"s{api_idx:04d}"
        if nid not in nodes:
            nodes[nid] = Node(
                kind="sensitive_api",
                signature=registry.entries[api_idx],
                api_index=api_idx,
            )
        for _ in range(callers):
            edges.add((biased_user(stream), nid))

    for api_idx, base in zip(spec.signature_apis, spec.api_intensity):
        add_api(api_idx, base + trng.below(spec.attach_max), trng)

    # per-variant mutations (polymorphism): scaffold growth, rewiring,
    # occasional extra API callers, noise APIs
    growth = rng.randint(*growth_range)
    for j in range(growth):
        vid = f"v{j:05d}"
        nodes[vid] = Node(kind="user_function")
        edges.add((vid, uid[endpoints[rng.below(len(endpoints))]]))
        if rng.below(3) == 0:
            edges.add((uid[rng.below(n_users)], vid))
    for _ in range(rng.below(8)):
        a, b = rng.below(n_users), rng.below(n_users)
        if a != b:
            edges.add((uid[a], uid[b]))
    for api_idx in spec.signature_apis:
        if rng.below(10) < 3:
            add_api(api_idx, 1, rng)
    if noise_api_rate > 0:
        core = set(spec.signature_apis)
        for api_idx in range(registry.size):
            if api_idx not in core and rng.random() < noise_api_rate:
                add_api(api_idx, 1, rng)

    return CallGraph(nodes=nodes, edges=edges, registry_hash=registry.content_hash)


def item_seed(master_seed: int, family_index: int, variant_index: int) -> int:
    """Per-item seed; parallel and serial generation agree by construction."""
    return mix64(master_seed, family_index, variant_index, 0x4954454D)


@dataclass
class SynthResult:
    dataset: LabeledDataset
    specs: list[FamilySpec]
    manifest: dict


def gen_dataset(cfg: SynthConfig, registry: ApiRegistry,
                katz: KatzParams = KatzParams()) -> SynthResult:
    """F x V labeled feature images (graphs retained for augmentation)."""
    specs = gen_family_specs(cfg, registry)
    layout = layout_for(registry.size)
    n = cfg.families * cfg.variants
    images = np.zeros((n, layout.side, layout.side))
    labels = np.zeros(n, dtype=np.int64)
    graphs: list[CallGraph] = []
    items = []
    pos = 0
    for f, spec in enumerate(specs):
        for v in range(cfg.variants):
            seed = item_seed(cfg.seed, f, v)
            g = gen_variant(spec, SplitMix64(seed), registry,
                            cfg.noise_api_rate, cfg.growth_range)
            img = to_image(profile(g, registry, katz), layout)
            images[pos] = img.pixels
            labels[pos] = f
            graphs.append(g)
            items.append({"family": spec.family, "variant": v, "seed": seed})
            pos += 1
    ds = LabeledDataset(
        images=images,
        labels=labels,
        label_names=tuple(s.family for s in specs),
        layout=layout,
        registry_hash=registry.content_hash,
        graphs=graphs,
    )
    manifest = {
        "config": asdict(cfg),
        "registry_hash": registry.content_hash,
        "specs": [asdict(s) for s in specs],
        "items": items,
    }
    return SynthResult(dataset=ds, specs=specs, manifest=manifest)
