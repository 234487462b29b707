"""Constraint graphs: immutable simple undirected graphs, generators,
degree-uniformity measurement, stationary distribution, conductance and the
second eigenvalue of the walk operator, plus graph file I/O.

Vertices are 0..n-1.  Edges are stored canonically as (u, v) with u < v in
lexicographic order; the edge id is the position in that order, giving a
fixed bijection onto 0..|E|-1 used everywhere an "edge item" appears.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DegenerateGraphError,
    GenerationFailureError,
    InvalidParameterError,
    NonMixingGraphError,
    NumericFailureError,
    SizeExceededError,
)
from .rng import master_rng

__all__ = [
    "Graph",
    "UniformityReport",
    "Distribution",
    "complete_graph",
    "cycle_graph",
    "erdos_renyi_graph",
    "random_regular_graph",
    "degree_uniformity",
    "stationary_distribution",
    "conductance_exact",
    "second_eigenvalue",
    "read_graph",
    "write_graph",
    "graph_to_json",
    "graph_from_json",
]

# Dense linear algebra (transition powers, eigenvalue iteration) is cut off
# at this vertex count; larger graphs must use sampled quantities instead.
DENSE_N_LIMIT = 4096

# Exact conductance enumerates 2^n subsets; hard cap per contract.
CONDUCTANCE_N_LIMIT = 24


# ---------------------------------------------------------------------------
# core type
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph with canonical edge order.

    Construct through :meth:`from_edges` or a generator; the constructor
    trusts its arguments.
    """

    n: int
    edge_list: tuple[tuple[int, int], ...]

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Sequence[int]]) -> "Graph":
        if n < 1:
            raise InvalidParameterError(f"need at least one vertex, got n={n}")
        seen: set[tuple[int, int]] = set()
        for uv in edges:
            if len(uv) != 2:
                raise InvalidParameterError(f"edge {uv!r} is not a pair")
            u, v = int(uv[0]), int(uv[1])
            if not (0 <= u < n and 0 <= v < n):
                raise InvalidParameterError(f"edge ({u},{v}) out of range for n={n}")
            if u == v:
                raise InvalidParameterError(f"self-loop at vertex {u}")
            key = (u, v) if u < v else (v, u)
            if key in seen:
                raise InvalidParameterError(f"duplicate edge ({key[0]},{key[1]})")
            seen.add(key)
        return cls(n=n, edge_list=tuple(sorted(seen)))

    # -- derived structure (cached; Graph is immutable) --

    @property
    def edge_count(self) -> int:
        return len(self.edge_list)

    @cached_property
    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=np.int64)
        for u, v in self.edge_list:
            deg[u] += 1
            deg[v] += 1
        return deg

    @cached_property
    def edge_index(self) -> dict[tuple[int, int], int]:
        """Canonical (u,v) with u<v -> edge id."""
        return {uv: i for i, uv in enumerate(self.edge_list)}

    @cached_property
    def adjacency(self) -> tuple[tuple[int, ...], ...]:
        nbrs: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in self.edge_list:
            nbrs[u].append(v)
            nbrs[v].append(u)
        return tuple(tuple(sorted(x)) for x in nbrs)

    @cached_property
    def csr(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(adj_flat, adj_ptr, eid_flat): flat neighbor lists for fast walks.

        eid_flat[k] is the edge id of the step adj_ptr[u] + k from u, so a
        walk step resolves its edge id with no dict lookup.
        """
        ptr = np.zeros(self.n + 1, dtype=np.int64)
        ptr[1:] = np.cumsum([len(a) for a in self.adjacency])
        flat = np.empty(max(ptr[-1], 1), dtype=np.int64)
        eid = np.empty_like(flat)
        for u, nbrs in enumerate(self.adjacency):
            for k, v in enumerate(nbrs):
                flat[ptr[u] + k] = v
                key = (u, v) if u < v else (v, u)
                eid[ptr[u] + k] = self.edge_index[key]
        return flat, ptr, eid

    @cached_property
    def connected(self) -> bool:
        if self.n == 1:
            return True
        seen = np.zeros(self.n, dtype=bool)
        stack = [0]
        seen[0] = True
        adj = self.adjacency
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if not seen[v]:
                    seen[v] = True
                    stack.append(v)
        return bool(seen.all())

    @cached_property
    def bipartite(self) -> bool:
        color = np.full(self.n, -1, dtype=np.int8)
        adj = self.adjacency
        for s in range(self.n):
            if color[s] >= 0:
                continue
            color[s] = 0
            stack = [s]
            while stack:
                u = stack.pop()
                for v in adj[u]:
                    if color[v] < 0:
                        color[v] = 1 - color[u]
                        stack.append(v)
                    elif color[v] == color[u]:
                        return False
        return True

    def edge_id(self, u: int, v: int) -> int:
        key = (u, v) if u < v else (v, u)
        try:
            return self.edge_index[key]
        except KeyError:
            raise InvalidParameterError(f"({u},{v}) is not an edge") from None


# ---------------------------------------------------------------------------
# reports / distributions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class UniformityReport:
    """Degree bounds: degrees lie in [min_degree, ratio * min_degree]."""

    min_degree: int
    max_degree: int
    ratio: float

    def is_uniform_for(self, min_degree: int, ratio: float) -> bool:
        """Does every degree lie in [min_degree, ratio * min_degree]?"""
        return self.min_degree >= min_degree and self.max_degree <= ratio * min_degree


class Distribution:
    """Probability vector over vertices or edges; sums to 1 within 1e-12."""

    __slots__ = ("probs",)

    def __init__(self, probs: np.ndarray):
        probs = np.asarray(probs, dtype=np.float64)
        if probs.ndim != 1 or probs.size == 0:
            raise InvalidParameterError("distribution must be a nonempty vector")
        if (probs < 0).any():
            raise InvalidParameterError("negative probability")
        if abs(float(probs.sum()) - 1.0) > 1e-12:
            raise NumericFailureError(
                f"probabilities sum to {probs.sum()!r}, off by more than 1e-12"
            )
        self.probs = probs

    def __len__(self) -> int:
        return self.probs.size

    def __getitem__(self, i: int) -> float:
        return float(self.probs[i])


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------


def complete_graph(n: int) -> Graph:
    if n < 2:
        raise InvalidParameterError(f"complete graph needs n >= 2, got {n}")
    edges = [(u, v) for u in range(n) for v in range(u + 1, n)]
    return Graph(n=n, edge_list=tuple(edges))


def cycle_graph(n: int) -> Graph:
    if n < 3:
        raise InvalidParameterError(f"cycle needs n >= 3, got {n}")
    edges = sorted(tuple(sorted((i, (i + 1) % n))) for i in range(n))
    return Graph(n=n, edge_list=tuple(edges))


def erdos_renyi_graph(n: int, p: float, seed: int) -> Graph:
    """G(n, p): each of the C(n,2) pairs is an edge independently.

    Same (n, p, seed) -> identical graph; pairs are drawn in lexicographic
    order from the master stream of ``seed``.
    """
    if n < 2:
        raise InvalidParameterError(f"need n >= 2, got {n}")
    if not (0.0 < p <= 1.0):
        raise InvalidParameterError(f"edge probability must be in (0, 1], got {p}")
    rng = master_rng(seed)
    draws = rng.random(n * (n - 1) // 2)
    edges = []
    k = 0
    for u in range(n - 1):
        row = draws[k : k + (n - 1 - u)]
        for j in np.flatnonzero(row < p):
            edges.append((u, u + 1 + int(j)))
        k += n - 1 - u
    return Graph(n=n, edge_list=tuple(edges))


def random_regular_graph(n: int, degree: int, seed: int, restarts: int = 1000) -> Graph:
    """Random simple ``degree``-regular graph by stub matching.

    Pairs stubs uniformly at random, rejecting self-loops and duplicate
    edges locally; a stuck tail (no acceptable pair left) restarts the whole
    matching.  Output is near-uniform conditioned on success.
    """
    if not (0 < degree < n):
        raise InvalidParameterError(f"need 0 < degree < n, got degree={degree}, n={n}")
    if (n * degree) % 2:
        raise InvalidParameterError(f"n*degree must be even, got {n}*{degree}")
    rng = master_rng(seed)
    for _ in range(restarts):
        stubs = np.repeat(np.arange(n), degree)
        rng.shuffle(stubs)
        stubs = list(stubs)
        edges: set[tuple[int, int]] = set()
        failures = 0
        while stubs and failures < 1000:
            i = int(rng.integers(len(stubs)))
            a = stubs[i]
            stubs[i] = stubs[-1]
            stubs.pop()
            j = int(rng.integers(len(stubs)))
            b = stubs[j]
            key = (a, b) if a < b else (b, a)
            if a == b or key in edges:
                stubs.append(a)  # put both back, reshuffle effect via rng
                failures += 1
                continue
            stubs[j] = stubs[-1]
            stubs.pop()
            edges.add(key)
            failures = 0
        if not stubs:
            return Graph(n=n, edge_list=tuple(sorted(edges)))
    raise GenerationFailureError(
        f"no simple {degree}-regular graph on {n} vertices in {restarts} restarts"
    )


# ---------------------------------------------------------------------------
# measurements
# ---------------------------------------------------------------------------


def degree_uniformity(g: Graph) -> UniformityReport:
    deg = g.degrees
    lo = int(deg.min()) if g.n else 0
    if lo == 0:
        raise DegenerateGraphError("graph has an isolated vertex")
    hi = int(deg.max())
    return UniformityReport(min_degree=lo, max_degree=hi, ratio=hi / lo)


def stationary_distribution(g: Graph, lazy: bool = False) -> Distribution:
    """Walk limit: probability of v proportional to its degree.

    Requires a connected graph, and a non-bipartite one unless ``lazy``
    (the lazy walk converges on bipartite graphs and has the same limit).
    """
    if not g.connected:
        raise NonMixingGraphError("graph is disconnected")
    if g.bipartite and not lazy:
        raise NonMixingGraphError("graph is bipartite; use lazy=True")
    deg = g.degrees.astype(np.float64)
    return Distribution(deg / (2.0 * g.edge_count))


def conductance_exact(g: Graph, limit: int = CONDUCTANCE_N_LIMIT) -> float:
    """Exact conductance by subset enumeration.

    Minimizes cut(S)/vol(S) over nonempty S with vol(S) <= |E| (vol = sum of
    degrees).  At a tie vol(S) = |E| both S and its complement qualify and
    both are scanned.  Hard-capped at ``limit`` vertices.
    """
    if not g.connected:
        raise InvalidParameterError("conductance needs a connected graph")
    if g.n > limit:
        raise SizeExceededError(
            f"exact conductance enumerates 2^{g.n} subsets; cap is n <= {limit}",
            n=g.n,
            limit=limit,
        )
    if g.n < 2 or g.edge_count == 0:
        raise DegenerateGraphError("conductance undefined without edges")
    n, m = g.n, g.edge_count
    deg = g.degrees.astype(np.int64)
    best = np.inf
    chunk = 1 << min(n, 20)
    total = 1 << n
    for lo in range(0, total, chunk):
        masks = np.arange(lo, min(lo + chunk, total), dtype=np.uint32)
        bits = [((masks >> b) & 1).astype(np.uint8) for b in range(n)]
        vol = np.zeros(masks.size, dtype=np.int64)
        for b in range(n):
            vol += deg[b] * bits[b]
        cut = np.zeros(masks.size, dtype=np.int32)
        for u, v in g.edge_list:
            cut += bits[u] ^ bits[v]
        ok = (vol > 0) & (vol <= m)
        if ok.any():
            ratios = cut[ok] / vol[ok]
            best = min(best, float(ratios.min()))
    return best


def second_eigenvalue(
    g: Graph, tol: float = 1e-9, max_iter: int = 200_000
) -> float:
    """Second-largest |eigenvalue| of the walk operator.

    Power iteration on the squared, deflated symmetrized operator
    N = D^{-1/2} A D^{-1/2}: squaring merges +/- pairs so bipartite spectra
    converge; deflation removes the top eigenvector sqrt(deg).
    """
    if not g.connected:
        raise InvalidParameterError("second_eigenvalue needs a connected graph")
    if g.n > DENSE_N_LIMIT:
        raise SizeExceededError(
            f"dense eigenvalue iteration capped at n <= {DENSE_N_LIMIT}", n=g.n
        )
    if g.n < 2:
        raise DegenerateGraphError("need at least two vertices")
    n = g.n
    deg = g.degrees.astype(np.float64)
    inv_sqrt = 1.0 / np.sqrt(deg)
    N = np.zeros((n, n), dtype=np.float64)
    for u, v in g.edge_list:
        w = inv_sqrt[u] * inv_sqrt[v]
        N[u, v] = w
        N[v, u] = w
    v1 = np.sqrt(deg)
    v1 /= np.linalg.norm(v1)

    rng = master_rng(0x5EED)  # fixed internal seed: deterministic output
    x = rng.standard_normal(n)
    x -= v1 * (v1 @ x)
    norm = np.linalg.norm(x)
    if norm == 0.0:
        raise NumericFailureError("degenerate start vector")
    x /= norm
    theta = 0.0
    for _ in range(max_iter):
        z = N @ (N @ x)
        z -= v1 * (v1 @ x)
        theta = float(x @ z)
        resid = float(np.linalg.norm(z - theta * x))
        nz = np.linalg.norm(z)
        if nz == 0.0:
            return 0.0  # operator annihilates the complement: all other eigenvalues 0
        x = z / nz
        if resid <= tol:
            return float(np.sqrt(max(theta, 0.0)))
    raise NumericFailureError(
        f"power iteration did not reach residual {tol} in {max_iter} steps"
    )


# ---------------------------------------------------------------------------
# file I/O
# ---------------------------------------------------------------------------


def graph_to_json(g: Graph) -> dict:
    return {"n": g.n, "edges": [[u, v] for u, v in g.edge_list]}


def graph_from_json(doc: dict) -> Graph:
    if not isinstance(doc, dict) or "n" not in doc or "edges" not in doc:
        raise InvalidParameterError('graph JSON needs keys "n" and "edges"')
    if not isinstance(doc["n"], int):
        raise InvalidParameterError('"n" must be an integer')
    if not isinstance(doc["edges"], list):
        raise InvalidParameterError('"edges" must be a list of pairs')
    return Graph.from_edges(doc["n"], doc["edges"])


def write_graph(g: Graph, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(graph_to_json(g), fh, sort_keys=True)
        fh.write("\n")


def read_graph(path: str) -> Graph:
    """Read a graph file: JSON, or whitespace edge-list text ("u v" lines).

    For the text form n is inferred as max vertex id + 1.
    """
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidParameterError(f"bad graph JSON: {exc}") from None
        return graph_from_json(doc)
    edges = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise InvalidParameterError(f"line {lineno}: expected 'u v', got {line!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise InvalidParameterError(f"line {lineno}: non-integer vertex") from None
        edges.append((u, v))
    if not edges:
        raise InvalidParameterError("edge-list text contains no edges")
    n = max(max(u, v) for u, v in edges) + 1
    return Graph.from_edges(n, edges)
