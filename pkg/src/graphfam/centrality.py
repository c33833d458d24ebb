"""Four centrality measures over the undirected view, and the S x 4 profile.

Column order is fixed: (degree, katz, closeness, harmonic).

Every computation here is written so the result is *bit-identical* under
any relabeling of user-function node ids.  Degree, closeness and harmonic
reduce to integer counts; katz runs in fixed-point integers so that the
matrix-vector sums are exact regardless of node order; the few remaining
float reductions go through ``math.fsum`` (correctly rounded, therefore
order independent).  Rename obfuscation robustness rests on this.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass

import numpy as np

from .callgraph import ApiRegistry, CallGraph, UndirectedView, undirected_view
from .errors import HashMismatchError, InputFormatError, NumericError

COLUMNS = ("degree", "katz", "closeness", "harmonic")

_CACHE_MAGIC = b"GFCP"
_CACHE_VERSION = 1


@dataclass(frozen=True)
class KatzParams:
    """Attenuation and convergence settings for katz centrality.

    ``alpha`` is replaced by ``0.85 / lambda_bound`` whenever
    ``alpha * lambda_bound >= 0.95``, where ``lambda_bound`` is the exact
    Gershgorin row-sum bound on the spectral radius (max walk degree).  The
    bound is integral and relabeling-invariant, and it dominates the true
    spectral radius, so the attenuated series always converges.
    """

    alpha: float = 0.1
    tolerance: float = 1e-9
    max_iterations: int = 1000

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")


@dataclass(frozen=True)
class CentralityProfile:
    """S x 4 matrix of centralities in [0, 1], bound to a registry."""

    values: np.ndarray
    registry_hash: str

    def __post_init__(self):
        self.values.setflags(write=False)

    @property
    def size(self) -> int:
        return self.values.shape[0]

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(self.registry_hash.encode("ascii"))
        h.update(np.ascontiguousarray(self.values, dtype="<f8").tobytes())
        return h.hexdigest()


def _effective_alpha(alpha: float, lam_bound: int) -> float:
    if lam_bound > 0 and alpha * lam_bound >= 0.95:
        return 0.85 / lam_bound
    return alpha


def _katz_normalized(view: UndirectedView, params: KatzParams) -> np.ndarray:
    """Unit-euclidean-norm katz scores for every node (zeros stay zeros).

    Solves s = alpha * A * (1 + s) by fixed-point iteration in scaled
    integers.  All intermediate sums are integers below 2**53, so they are
    exact in float64 and independent of summation order.
    """
    n = view.n
    if n == 0:
        return np.zeros(0)
    lam_bound = int(view.walk_degrees.max())
    if lam_bound == 0:
        return np.zeros(n)  # no walks of length >= 1
    alpha = _effective_alpha(params.alpha, lam_bound)

    # fixed-point scale: keep row sums exactly representable in float64
    s_bound = 19 * (math.isqrt(n - 1) + 1) + 1  # sup-norm bound on raw scores
    bits = 53 - (lam_bound + 1).bit_length() - s_bound.bit_length()
    bits = max(20, min(44, bits))
    scale = float(1 << bits)

    rows = np.repeat(np.arange(n, dtype=np.int64), view.walk_degrees)
    cols = view.indices
    threshold = max(params.tolerance * scale, 1.0)

    s = np.zeros(n)
    residual = math.inf
    for _ in range(params.max_iterations):
        t = np.bincount(rows, weights=(scale + s)[cols], minlength=n)
        nxt = np.rint(alpha * t)
        residual = float(np.max(np.abs(nxt - s))) if n else 0.0
        s = nxt
        if residual <= threshold:
            break
    else:
        raise NumericError(
            f"katz iteration did not converge after {params.max_iterations} "
            f"steps (residual {residual / scale:.3e})"
        )

    raw = s / scale
    norm = math.sqrt(math.fsum(float(v) * float(v) for v in raw))
    if norm == 0.0:
        return raw
    return raw / norm


def _bfs_stats(view: UndirectedView, sources) -> list[tuple[int, int, float]]:
    """Per source: (#reached excluding self, sum of distances, sum of 1/d).

    Level-synchronous BFS; per-level counts make the harmonic sum a small
    canonical fsum, so results do not depend on node order.
    """
    indptr, indices = view.indptr, view.indices
    out = []
    for s in sources:
        unseen = np.ones(view.n, dtype=bool)
        unseen[s] = False
        frontier = np.array([s], dtype=np.int64)
        level = 0
        reach = 0
        sumd = 0
        inv_terms: list[float] = []
        while frontier.size:
            starts = indptr[frontier]
            lens = indptr[frontier + 1] - starts
            total = int(lens.sum())
            if total == 0:
                break
            cum = np.cumsum(lens)
            seg_start = np.repeat(cum - lens, lens)
            idx = np.repeat(starts, lens) + (np.arange(total, dtype=np.int64) - seg_start)
            cand = indices[idx]
            cand = cand[unseen[cand]]
            if cand.size == 0:
                break
            nxt = np.unique(cand)
            unseen[nxt] = False
            level += 1
            cnt = int(nxt.size)
            reach += cnt
            sumd += cnt * level
            inv_terms.append(cnt / level)
            frontier = nxt
        out.append((reach, sumd, math.fsum(inv_terms)))
    return out


def _closeness_value(reach: int, sumd: int, n: int) -> float:
    # reachable-set variant; reduces to (N-1)/sum(d) on connected graphs
    if reach == 0 or n <= 1:
        return 0.0
    return (reach / (n - 1)) * (reach / sumd)


def _harmonic_value(hsum: float, n: int) -> float:
    if n <= 1:
        return 0.0
    return hsum / (n - 1)


def degree_centrality(g: CallGraph) -> dict[str, float]:
    """deg(i) / (N-1) on the undirected simple view (0 when N <= 1)."""
    view = undirected_view(g)
    if view.n <= 1:
        return {nid: 0.0 for nid in view.ids}
    vals = view.degrees / (view.n - 1)
    return {nid: float(vals[i]) for i, nid in enumerate(view.ids)}


def katz_centrality(g: CallGraph, params: KatzParams = KatzParams()) -> dict[str, float]:
    """Attenuated-walk influence, scaled to unit euclidean norm."""
    view = undirected_view(g)
    vals = _katz_normalized(view, params)
    return {nid: float(vals[i]) for i, nid in enumerate(view.ids)}


def closeness_centrality(g: CallGraph) -> dict[str, float]:
    """Reachable-set closeness: (|R|/(N-1)) * (|R| / sum of distances)."""
    view = undirected_view(g)
    stats = _bfs_stats(view, range(view.n))
    return {
        nid: _closeness_value(reach, sumd, view.n)
        for nid, (reach, sumd, _) in zip(view.ids, stats)
    }


def harmonic_centrality(g: CallGraph) -> dict[str, float]:
    """(sum of 1/d over reachable nodes) / (N-1)."""
    view = undirected_view(g)
    stats = _bfs_stats(view, range(view.n))
    return {
        nid: _harmonic_value(hsum, view.n)
        for nid, (_, _, hsum) in zip(view.ids, stats)
    }


def profile(
    g: CallGraph,
    registry: ApiRegistry,
    params: KatzParams = KatzParams(),
) -> CentralityProfile:
    """S x 4 profile: row i holds the centralities of registry API i.

    Absent APIs give all-zero rows.  The graph must have been loaded
    against the same registry (content hash equality).
    """
    if g.registry_hash != registry.content_hash:
        raise HashMismatchError(
            "graph was loaded against a different registry "
            f"({g.registry_hash[:12]}... vs {registry.content_hash[:12]}...)"
        )
    values = np.zeros((registry.size, 4))
    sens = g.sensitive_nodes()
    if sens:
        view = undirected_view(g)
        n = view.n
        katz = _katz_normalized(view, params)
        api_indices = sorted(sens)
        node_idx = [view.index[sens[i]] for i in api_indices]
        stats = _bfs_stats(view, node_idx)
        for api_i, vi, (reach, sumd, hsum) in zip(api_indices, node_idx, stats):
            deg = float(view.degrees[vi]) / (n - 1) if n > 1 else 0.0
            values[api_i, 0] = deg
            values[api_i, 1] = float(katz[vi])
            values[api_i, 2] = _closeness_value(reach, sumd, n)
            values[api_i, 3] = _harmonic_value(hsum, n)
    return CentralityProfile(values=values, registry_hash=registry.content_hash)


def save_profile(p: CentralityProfile, path) -> None:
    """Binary cache: {magic, version, S, registry hash} + S x 4 float64 LE."""
    header = _CACHE_MAGIC + struct.pack("<BxxxI", _CACHE_VERSION, p.size)
    header += bytes.fromhex(p.registry_hash)
    payload = np.ascontiguousarray(p.values, dtype="<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(header + payload)


def load_profile(path, registry: ApiRegistry | None = None) -> CentralityProfile:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 44 or blob[:4] != _CACHE_MAGIC:
        raise InputFormatError(f"{path}: not a profile cache file")
    version, size = struct.unpack_from("<BxxxI", blob, 4)
    if version != _CACHE_VERSION:
        raise InputFormatError(f"{path}: unsupported profile cache version {version}")
    registry_hash = blob[12:44].hex()
    expected = 44 + size * 4 * 8
    if len(blob) != expected:
        raise InputFormatError(f"{path}: truncated profile cache")
    values = np.frombuffer(blob[44:], dtype="<f8").reshape(size, 4).copy()
    if registry is not None and registry.content_hash != registry_hash:
        raise HashMismatchError(f"{path}: profile was built against a different registry")
    return CentralityProfile(values=values, registry_hash=registry_hash)
