"""Random walks and Monte Carlo visit statistics.

Randomness contract (bit-reproducible):

* trial/row ``i`` of any batch uses the stream ``trial_rng(seed, i)``;
* a fixed-length walk consumes one ``integers`` draw if its start is random,
  then exactly one ``random(steps)`` block;
* a sink walk consumes one ``integers`` draw if its start is random, then
  ``random(64)`` blocks as needed.

A single walk replayed with the same stream is bit-identical to the batch
row, and dropping rows never perturbs other rows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGraphError, InvalidParameterError
from .graphs import Graph, degree_uniformity
from .mixing import mixing_time
from .rng import trial_rng

__all__ = [
    "StartRule",
    "Walk",
    "Estimate",
    "random_walk",
    "walk_to_sink",
    "validate_walk",
    "hit_probability",
    "hit_avoid_probability",
    "hit_before_sink_probability",
    "VisitTailReport",
    "EarlyVisitReport",
    "InfluenceReport",
    "visit_count_tail_check",
    "early_visit_check",
    "influence_check",
]

_CHUNK_ELEMS = 4_000_000  # cap on trials*steps array size per batch chunk


# ---------------------------------------------------------------------------
# start rules
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StartRule:
    """Where walks begin.

    kinds: "uniform" (uniform over all vertices), "round-robin" (designated
    list cycled by row index), "designated-uniform" (uniform over the
    designated list), "fixed" (one vertex).
    """

    kind: str
    designated: tuple[int, ...] = ()
    vertex: int | None = None

    @classmethod
    def uniform(cls) -> "StartRule":
        return cls(kind="uniform")

    @classmethod
    def round_robin(cls, designated) -> "StartRule":
        des = tuple(int(v) for v in designated)
        if not des:
            raise InvalidParameterError("round-robin needs a nonempty designated list")
        return cls(kind="round-robin", designated=des)

    @classmethod
    def designated_uniform(cls, designated) -> "StartRule":
        des = tuple(int(v) for v in designated)
        if not des:
            raise InvalidParameterError("need a nonempty designated list")
        return cls(kind="designated-uniform", designated=des)

    @classmethod
    def fixed(cls, vertex: int) -> "StartRule":
        return cls(kind="fixed", vertex=int(vertex))

    def validate(self, g: Graph) -> None:
        if self.kind not in ("uniform", "round-robin", "designated-uniform", "fixed"):
            raise InvalidParameterError(f"unknown start rule {self.kind!r}")
        for v in self.designated:
            if not 0 <= v < g.n:
                raise InvalidParameterError(f"designated vertex {v} out of range")
        if self.kind == "fixed" and not (
            self.vertex is not None and 0 <= self.vertex < g.n
        ):
            raise InvalidParameterError(f"fixed start {self.vertex} out of range")

    @property
    def consumes_rng(self) -> bool:
        return self.kind in ("uniform", "designated-uniform")

    def resolve(self, index: int, rng: np.random.Generator, n: int) -> int:
        if self.kind == "uniform":
            return int(rng.integers(n))
        if self.kind == "round-robin":
            return self.designated[index % len(self.designated)]
        if self.kind == "designated-uniform":
            return self.designated[int(rng.integers(len(self.designated)))]
        return int(self.vertex)  # fixed


def _as_start_rule(start) -> StartRule:
    if isinstance(start, StartRule):
        return start
    if start is None:
        return StartRule.uniform()
    return StartRule.fixed(int(start))


# ---------------------------------------------------------------------------
# walk records
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Walk:
    """One walk trace.

    ``vertices`` records every position (lazy stays repeat the vertex);
    ``edges`` records the edge id of every moving step, so for non-lazy
    walks len(edges) = len(vertices) - 1.
    """

    vertices: tuple[int, ...]
    edges: tuple[int, ...]
    terminated_by: str  # "length-reached" | "sink-reached" | "cap-exceeded"


def validate_walk(g: Graph, walk: Walk, lazy: bool = False) -> None:
    """Raise unless the trace is a walk on g (used by tests and replays)."""
    vs = walk.vertices
    if not vs:
        raise InvalidParameterError("empty walk")
    moves = []
    for a, b in zip(vs, vs[1:]):
        if a == b:
            if not lazy:
                raise InvalidParameterError("repeated vertex in non-lazy walk")
            continue
        moves.append(g.edge_id(a, b))  # raises if not adjacent
    if list(walk.edges) != moves:
        raise InvalidParameterError("edge ids do not match the vertex trace")


# ---------------------------------------------------------------------------
# engines
# ---------------------------------------------------------------------------


def _steps_from_uniform(u, deg):
    """Neighbor index from uniform draw(s); clamp guards the u ~ 1.0 edge."""
    idx = (u * deg).astype(np.int64) if isinstance(u, np.ndarray) else int(u * deg)
    if isinstance(idx, np.ndarray):
        return np.minimum(idx, deg - 1)
    return min(idx, deg - 1)


def _require_walkable(g: Graph) -> None:
    if g.n == 0 or (g.degrees == 0).any():
        raise DegenerateGraphError("walk undefined: graph has an isolated vertex")


def fixed_walk_batch(
    g: Graph,
    rule: StartRule,
    steps: int,
    trials: int,
    seed: int,
    lazy: bool = False,
    index_base: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """All positions/edge ids for ``trials`` fixed-length walks in lockstep.

    Returns (verts (trials, steps+1) int32, eids (trials, steps) int32);
    eid -1 marks a lazy stay.  Row i uses trial_rng(seed, index_base + i).
    """
    _require_walkable(g)
    rule.validate(g)
    if steps < 0 or trials < 0:
        raise InvalidParameterError("steps and trials must be nonnegative")
    flat, ptr, eidf = g.csr
    deg = g.degrees
    U = np.empty((trials, steps), dtype=np.float64)
    starts = np.empty(trials, dtype=np.int64)
    for i in range(trials):
        rng = trial_rng(seed, index_base + i)
        starts[i] = rule.resolve(index_base + i, rng, g.n)
        if steps:
            U[i] = rng.random(steps)
    verts = np.empty((trials, steps + 1), dtype=np.int32)
    eids = np.full((trials, steps), -1, dtype=np.int32)
    cur = starts
    verts[:, 0] = cur
    for j in range(steps):
        u = U[:, j]
        d = deg[cur]
        if lazy:
            move = u >= 0.5
            idx = _steps_from_uniform(np.where(move, 2.0 * u - 1.0, 0.0), d)
        else:
            move = None
            idx = _steps_from_uniform(u, d)
        pos = ptr[cur] + idx
        nxt = flat[pos]
        eid = eidf[pos]
        if lazy:
            nxt = np.where(move, nxt, cur)
            eid = np.where(move, eid, -1)
        verts[:, j + 1] = nxt
        eids[:, j] = eid
        cur = nxt
    return verts, eids


def random_walk(
    g: Graph,
    start,
    steps: int,
    rng: np.random.Generator,
    lazy: bool = False,
    index: int = 0,
) -> Walk:
    """One fixed-length walk; replays batch row ``index`` when given that
    row's stream."""
    _require_walkable(g)
    rule = _as_start_rule(start)
    rule.validate(g)
    if steps < 0:
        raise InvalidParameterError("steps must be nonnegative")
    v = rule.resolve(index, rng, g.n)
    u_block = rng.random(steps)
    nbrs_eids = _py_adj(g)
    verts = [v]
    eids: list[int] = []
    for j in range(steps):
        u = float(u_block[j])
        nbrs, eid_row = nbrs_eids[v]
        d = len(nbrs)
        if lazy:
            if u < 0.5:
                verts.append(v)
                continue
            k = min(int((2.0 * u - 1.0) * d), d - 1)
        else:
            k = min(int(u * d), d - 1)
        eids.append(eid_row[k])
        v = nbrs[k]
        verts.append(v)
    return Walk(vertices=tuple(verts), edges=tuple(eids), terminated_by="length-reached")


def _py_adj(g: Graph):
    """Per-vertex (neighbors, edge ids) as plain tuples for scalar loops."""
    cached = g.__dict__.get("_py_adj")
    if cached is None:
        flat, ptr, eidf = g.csr
        cached = tuple(
            (tuple(int(x) for x in flat[ptr[v]:ptr[v + 1]]),
             tuple(int(x) for x in eidf[ptr[v]:ptr[v + 1]]))
            for v in range(g.n)
        )
        g.__dict__["_py_adj"] = cached
    return cached


def _sink_walk_steps(
    g: Graph,
    v0: int,
    sink: int,
    cap: int,
    rng: np.random.Generator,
    lazy: bool = False,
) -> tuple[list[int], list[int], str]:
    """Scalar walk until ``sink`` or ``cap`` steps; see module draw contract."""
    verts = [v0]
    eids: list[int] = []
    if v0 == sink:
        return verts, eids, "sink-reached"
    nbrs_eids = _py_adj(g)
    v = v0
    buf = rng.random(64)
    k = 0
    steps = 0
    while True:
        if steps >= cap:
            return verts, eids, "cap-exceeded"
        if k == 64:
            buf = rng.random(64)
            k = 0
        u = float(buf[k])
        k += 1
        steps += 1
        nbrs, eid_row = nbrs_eids[v]
        d = len(nbrs)
        if lazy:
            if u < 0.5:
                verts.append(v)
                continue
            idx = min(int((2.0 * u - 1.0) * d), d - 1)
        else:
            idx = min(int(u * d), d - 1)
        eids.append(eid_row[idx])
        v = nbrs[idx]
        verts.append(v)
        if v == sink:
            return verts, eids, "sink-reached"


def walk_to_sink(
    g: Graph,
    start,
    sink: int,
    rng: np.random.Generator,
    cap: int | None = None,
    lazy: bool = False,
    index: int = 0,
) -> Walk:
    """Walk until first arrival at ``sink`` (or the step cap, default n^3)."""
    _require_walkable(g)
    if not 0 <= sink < g.n:
        raise InvalidParameterError(f"sink {sink} out of range")
    rule = _as_start_rule(start)
    rule.validate(g)
    if cap is None:
        cap = g.n ** 3
    if cap < 0:
        raise InvalidParameterError("cap must be nonnegative")
    v0 = rule.resolve(index, rng, g.n)
    verts, eids, term = _sink_walk_steps(g, v0, sink, cap, rng, lazy=lazy)
    return Walk(vertices=tuple(verts), edges=tuple(eids), terminated_by=term)


# ---------------------------------------------------------------------------
# estimators
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Estimate:
    """Monte Carlo fraction with a 95% normal-approximation half width."""

    value: float
    trials: int
    half_width: float
    cap_exceeded: int = 0


def _estimate(hits: int, trials: int, cap_exceeded: int = 0) -> Estimate:
    p = hits / trials
    hw = 1.96 * np.sqrt(p * (1.0 - p) / trials)
    return Estimate(value=p, trials=trials, half_width=float(hw),
                    cap_exceeded=cap_exceeded)


def _check_items(g: Graph, kind: str, items) -> None:
    limit = g.n if kind == "vertex" else g.edge_count
    for x in items:
        if not 0 <= x < limit:
            raise InvalidParameterError(f"{kind} id {x} out of range")


def _batch_chunks(trials: int, steps: int):
    chunk = max(1, min(50_000, _CHUNK_ELEMS // max(steps + 1, 1)))
    done = 0
    while done < trials:
        take = min(chunk, trials - done)
        yield done, take
        done += take


def hit_probability(
    g: Graph,
    item: int,
    kind: str,
    steps: int,
    trials: int,
    seed: int,
    start=None,
    lazy: bool = False,
) -> Estimate:
    """Fraction of fixed-length walks that visit ``item`` (vertex or edge)."""
    if kind not in ("vertex", "edge"):
        raise InvalidParameterError(f"kind must be vertex or edge, got {kind!r}")
    _check_items(g, kind, [item])
    if trials < 1:
        raise InvalidParameterError("need at least one trial")
    rule = _as_start_rule(start)
    hits = 0
    for base, take in _batch_chunks(trials, steps):
        verts, eids = fixed_walk_batch(g, rule, steps, take, seed, lazy=lazy,
                                       index_base=base)
        arr = verts if kind == "vertex" else eids
        hits += int((arr == item).any(axis=1).sum())
    return _estimate(hits, trials)


def hit_avoid_probability(
    g: Graph,
    item: int,
    avoid,
    kind: str,
    steps: int,
    trials: int,
    seed: int,
    start=None,
    lazy: bool = False,
) -> Estimate:
    """Fraction of walks that visit ``item`` and dodge every item in
    ``avoid``.  Same seed couples trials with :func:`hit_probability`, so
    the value is <= that estimate trial by trial."""
    if kind not in ("vertex", "edge"):
        raise InvalidParameterError(f"kind must be vertex or edge, got {kind!r}")
    avoid = tuple(sorted(set(int(a) for a in avoid)))
    _check_items(g, kind, (item, *avoid))
    if item in avoid:
        raise InvalidParameterError("item cannot be in its own avoid set")
    if trials < 1:
        raise InvalidParameterError("need at least one trial")
    rule = _as_start_rule(start)
    hits = 0
    for base, take in _batch_chunks(trials, steps):
        verts, eids = fixed_walk_batch(g, rule, steps, take, seed, lazy=lazy,
                                       index_base=base)
        arr = verts if kind == "vertex" else eids
        good = (arr == item).any(axis=1)
        for a in avoid:
            good &= ~(arr == a).any(axis=1)
        hits += int(good.sum())
    return _estimate(hits, trials)


def hit_before_sink_probability(
    g: Graph,
    item: int,
    avoid,
    sink: int,
    kind: str,
    trials: int,
    seed: int,
    start=None,
    cap: int | None = None,
    lazy: bool = False,
) -> Estimate:
    """Fraction of sink walks that visit ``item`` and dodge ``avoid`` before
    first reaching ``sink``.  Cap-exceeded walks count as misses and are
    reported in the estimate."""
    if kind not in ("vertex", "edge"):
        raise InvalidParameterError(f"kind must be vertex or edge, got {kind!r}")
    avoid_set = set(int(a) for a in avoid)
    _check_items(g, kind, (item, *avoid_set))
    if item in avoid_set:
        raise InvalidParameterError("item cannot be in its own avoid set")
    if kind == "vertex" and (item == sink or sink in avoid_set):
        raise InvalidParameterError("sink cannot be the item or avoided")
    if not 0 <= sink < g.n:
        raise InvalidParameterError(f"sink {sink} out of range")
    if trials < 1:
        raise InvalidParameterError("need at least one trial")
    _require_walkable(g)
    rule = _as_start_rule(start)
    rule.validate(g)
    if cap is None:
        cap = g.n ** 3
    hits = 0
    capped = 0
    for i in range(trials):
        rng = trial_rng(seed, i)
        v0 = rule.resolve(i, rng, g.n)
        verts, eids, term = _sink_walk_steps(g, v0, sink, cap, rng, lazy=lazy)
        if term == "cap-exceeded":
            capped += 1
            continue
        trace = verts if kind == "vertex" else eids
        if item in trace and not avoid_set.intersection(trace):
            hits += 1
    return _estimate(hits, trials, cap_exceeded=capped)


# ---------------------------------------------------------------------------
# bound checks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VisitTailReport:
    k: int
    tail_probability: float   # P(visits > k)
    visit_probability: float  # P(visits >= 1)
    bound: float              # visit_probability / 4
    slack: float              # 3 * (both half widths)
    holds: bool
    trials: int


@dataclass(frozen=True)
class EarlyVisitReport:
    k: int
    probability: float  # P(v among first k positions)
    bound: float        # k / min_degree
    slack: float
    holds: bool
    trials: int


@dataclass(frozen=True)
class InfluenceReport:
    i: int
    j: int
    max_deviation: float
    bound: float  # 2 / (3 c n)
    pairs_checked: int
    pairs_skipped: int
    holds: bool
    trials: int


def visit_count_tail_check(
    g: Graph,
    v: int,
    steps: int,
    k: int,
    trials: int,
    seed: int,
    start=None,
    lazy: bool = False,
) -> VisitTailReport:
    """Check P(more than k visits to v) <= P(visit v)/4 with Monte Carlo
    slack.  ``k`` is the caller's multiple of the mixing time."""
    _check_items(g, "vertex", [v])
    rule = _as_start_rule(start)
    tail = 0
    any_visit = 0
    for base, take in _batch_chunks(trials, steps):
        verts, _ = fixed_walk_batch(g, rule, steps, take, seed, lazy=lazy,
                                    index_base=base)
        counts = (verts == v).sum(axis=1)
        tail += int((counts > k).sum())
        any_visit += int((counts > 0).sum())
    p_tail = tail / trials
    p_any = any_visit / trials
    hw = 1.96 * (np.sqrt(p_tail * (1 - p_tail) / trials)
                 + np.sqrt(p_any * (1 - p_any) / trials))
    slack = float(3.0 * hw / 1.96)  # 3 sigma on each side, combined
    bound = p_any / 4.0
    return VisitTailReport(k=k, tail_probability=p_tail, visit_probability=p_any,
                           bound=bound, slack=slack,
                           holds=p_tail <= bound + slack, trials=trials)


def early_visit_check(
    g: Graph,
    v: int,
    k: int,
    trials: int,
    seed: int,
    designated=(),
    lazy: bool = False,
) -> EarlyVisitReport:
    """Check P(v appears among the first k positions) <= k / min_degree.

    Counts positions 0..k-1.  Start rule mirrors the vertex designs:
    round-robin over ``designated`` when given, else uniform; ``v`` must not
    be designated."""
    _check_items(g, "vertex", [v])
    designated = tuple(designated)
    if v in designated:
        raise InvalidParameterError("v must not be a designated start")
    if k < 0:
        raise InvalidParameterError("k must be nonnegative")
    rule = (StartRule.round_robin(designated) if designated
            else StartRule.uniform())
    min_deg = int(g.degrees.min())
    if min_deg == 0:
        raise DegenerateGraphError("graph has an isolated vertex")
    steps = max(k - 1, 0)
    hits = 0
    if k > 0:
        for base, take in _batch_chunks(trials, steps):
            verts, _ = fixed_walk_batch(g, rule, steps, take, seed, lazy=lazy,
                                        index_base=base)
            hits += int((verts[:, :k] == v).any(axis=1).sum())
    p = hits / trials
    sigma = float(np.sqrt(p * (1 - p) / trials))
    bound = k / min_deg
    return EarlyVisitReport(k=k, probability=p, bound=bound, slack=3 * sigma,
                            holds=p <= bound + 3 * sigma, trials=trials)


def influence_check(
    g: Graph,
    i: int,
    j: int,
    trials: int,
    seed: int,
    t_mix: int | None = None,
    lazy: bool = False,
    min_count: int = 30,
) -> InfluenceReport:
    """Check |P(pos i = u | pos j = v) - P(pos i = u)| <= 2/(3 c n) for all
    pairs, given j - i at least the mixing time.

    Pairs whose conditioning count is below ``min_count`` are skipped (and
    counted); slack is 3 sigma on both estimates."""
    if not (0 <= i < j):
        raise InvalidParameterError("need 0 <= i < j")
    if t_mix is None:
        t_mix = mixing_time(g, lazy=lazy).steps
    if j - i < t_mix:
        raise InvalidParameterError(
            f"j - i = {j - i} is below the mixing time {t_mix}"
        )
    c = degree_uniformity(g).ratio
    n = g.n
    joint = np.zeros((n, n), dtype=np.int64)
    count_i = np.zeros(n, dtype=np.int64)
    for base, take in _batch_chunks(trials, j):
        verts, _ = fixed_walk_batch(g, StartRule.uniform(), j, take, seed,
                                    lazy=lazy, index_base=base)
        vi = verts[:, i].astype(np.int64)
        vj = verts[:, j].astype(np.int64)
        joint += np.bincount(vi * n + vj, minlength=n * n).reshape(n, n)
        count_i += np.bincount(vi, minlength=n)
    count_j = joint.sum(axis=0)
    bound = 2.0 / (3.0 * c * n)
    max_dev = 0.0
    checked = 0
    skipped = 0
    holds = True
    marg = count_i / trials
    sigma_marg = np.sqrt(marg * (1 - marg) / trials)
    for v in range(n):
        cnt = int(count_j[v])
        if cnt < min_count:
            skipped += n
            continue
        cond = joint[:, v] / cnt
        sigma_cond = np.sqrt(cond * (1 - cond) / cnt)
        dev = np.abs(cond - marg)
        checked += n
        max_dev = max(max_dev, float(dev.max()))
        if (dev > bound + 3.0 * (sigma_cond + sigma_marg)).any():
            holds = False
    return InfluenceReport(i=i, j=j, max_deviation=max_dev, bound=bound,
                           pairs_checked=checked, pairs_skipped=skipped,
                           holds=holds, trials=trials)
