"""Constraint set generation: grid-driven ML candidates, binary-searched
hard/soft diameter thresholds, radius-gated CL growth, and ratio-controlled
mixing for experiments.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from setclust.dataset import EmbeddedDataset
from setclust.geometry import GridPartition
from setclust.oracle import CLMembershipQuery, MLGroupQuery, consistency_repeat

ALPHA_PAIR = 5
ALPHA_SET = 10
DEFAULT_M_MAX = 10


@dataclass(frozen=True)
class MLSet:
    """Points encouraged (soft) or required (hard) to share one cluster."""

    members: tuple[int, ...]
    hard: bool = False
    diameter: float = 0.0
    level: int | None = None

    def __post_init__(self):
        if len(self.members) < 2:
            raise ValueError("an ML set needs at least 2 members")
        if len(set(self.members)) != len(self.members):
            raise ValueError("ML set members must be distinct")


@dataclass(frozen=True)
class CLSet:
    """Points to be placed in pairwise distinct clusters; size bounded by k."""

    members: tuple[int, ...]

    def __post_init__(self):
        if len(self.members) < 2:
            raise ValueError("a CL set needs at least 2 members")
        if len(set(self.members)) != len(self.members):
            raise ValueError("CL set members must be distinct")


@dataclass(frozen=True)
class ThresholdResult:
    """Max hard diameters per arity class (2-point sets vs size >= 3)."""

    psi_pair: float
    psi_set: float


@dataclass
class ConstraintCollection:
    ml_sets: list[MLSet] = field(default_factory=list)
    cl_sets: list[CLSet] = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    shortfall: bool = False

    def constrained_points(self) -> set[int]:
        points: set[int] = set()
        for s in self.ml_sets:
            points.update(s.members)
        for s in self.cl_sets:
            points.update(s.members)
        return points


def set_diameter(points: np.ndarray, members: tuple[int, ...]) -> float:
    sub = points[list(members)]
    diffs = sub[:, None, :] - sub[None, :, :]
    return float(np.sqrt((diffs**2).sum(axis=2)).max())


def _chunks(seq: list[int], size: int):
    for i in range(0, len(seq), size):
        yield seq[i:i + size]


def _locality_order(points: np.ndarray, cell: list[int]) -> list[int]:
    """Greedy nearest-neighbor chain so chunk boundaries respect locality.

    Starts from the lowest index and always appends the unvisited member
    closest to the last one (ties to the lowest index), keeping mutually
    close points inside the same chunk when a large cell is split.
    """
    if len(cell) <= 2:
        return sorted(cell)
    remaining = sorted(cell)
    order = [remaining.pop(0)]
    while remaining:
        last = points[order[-1]]
        dists = np.linalg.norm(points[remaining] - last, axis=1)
        nxt = int(np.argmin(dists))
        order.append(remaining.pop(nxt))
    return order


def generate_ml_sets(data: EmbeddedDataset, oracle, grid: GridPartition,
                     m_max: int = DEFAULT_M_MAX) -> list[MLSet]:
    """Query the oracle once per grid-cell chunk and keep multi-text groups.

    Cells larger than ``m_max`` are chunked; cells (and trailing chunks) of a
    single point are skipped, since a one-text query carries no information.
    Each resulting set records the grid level that produced it so the
    threshold search can group candidate diameters by level and arity.
    """
    if m_max < 2:
        raise ValueError("m_max >= 2 required")
    ml_sets: list[MLSet] = []
    for (level, _leader), cell in sorted(grid.cells.items()):
        if len(cell) < 2:
            continue
        for chunk in _chunks(_locality_order(data.points, cell), m_max):
            if len(chunk) < 2:
                continue
            query = MLGroupQuery(ids=tuple(chunk),
                                 texts=tuple(data.text(i) for i in chunk))
            response = oracle.query_ml_group(query)
            for group in response.groups:
                if len(group) < 2:
                    continue
                members = tuple(sorted(chunk[pos] for pos in group))
                ml_sets.append(MLSet(members=members, hard=False,
                                     diameter=set_diameter(data.points, members),
                                     level=level))
    return dedup_ml_sets(ml_sets)


ALPHA_MERGE = 3
MAX_MERGE_ROUNDS = 8


def _cut_segments(points: np.ndarray, order: list[int], tau: float):
    """Cut a locality-ordered chain into segments at distance jumps > tau.

    The cut keeps each segment spatially tight, so a segment is very
    unlikely to straddle two well-separated groups.
    """
    segments: list[list[int]] = []
    for idx in order:
        if (not segments
                or np.linalg.norm(points[idx] - points[segments[-1][-1]]) > tau):
            segments.append([idx])
        else:
            segments[-1].append(idx)
    return segments


def consolidate_ml_sets(data: EmbeddedDataset, oracle, ml_sets: list[MLSet],
                        cost_kc: float,
                        extra_points: list[int] | None = None,
                        m_max: int = DEFAULT_M_MAX,
                        alpha: int = ALPHA_MERGE,
                        max_rounds: int = MAX_MERGE_ROUNDS) -> list[MLSet]:
    """Merge ML sets whose representatives the oracle consistently groups.

    Each round takes one representative per set (the lowest member index),
    orders representatives by locality, and cuts the chain into segments at
    distance jumps above ``0.8 * cost_kc``. A segment longer than ``m_max`` is
    asked as a sequence of grouping queries that overlap by one text, so its
    merges chain through the shared representative; each of these queries is
    asked once. Pairs of chain-adjacent segments are bridged with two-text
    queries repeated ``alpha`` times, merging only on an identical verdict
    every time. A segment is kept spatially tight on purpose: a query
    containing two different multi-member topics would be glued into one
    group by a single noisy pairwise verdict, and because any such verdict
    produces the same glued partition, repetition cannot detect it. Tight
    segments make the true partition of every multi-text query a single
    group, and restrict cross-topic decisions to two-text bridges, where a
    wrong verdict must repeat identically ``alpha`` times to pass. Rounds
    repeat until no merge happens, up to ``max_rounds`` — an unbounded loop
    would keep re-rolling oracle noise until some spurious merge eventually
    passed. ``extra_points`` (typically points not covered by any candidate
    set) take part as one-point blocks; those still alone at the end are
    dropped. The merged sets are soft; hard/soft classification runs after.
    """
    current: list[MLSet | tuple[int, ...]] = list(ml_sets)
    current += [(int(i),) for i in (extra_points or [])]
    tau = 0.8 * cost_kc if cost_kc > 0 else float("inf")

    def members_of(item) -> tuple[int, ...]:
        return item if isinstance(item, tuple) else item.members

    for _round in range(max_rounds):
        if len(current) < 2:
            break
        reps = [min(members_of(s)) for s in current]
        rep_to_set = {rep: i for i, rep in enumerate(reps)}
        merged_any = False
        parent = list(range(len(current)))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        def ask(ids: tuple[int, ...], repeats: int):
            query = MLGroupQuery(ids=ids, texts=tuple(data.text(i) for i in ids))
            responses = [
                oracle.query_ml_group(query, repeat=rep,
                                      kind="ml" if rep == 0 else "consistency")
                for rep in range(repeats)
            ]
            canon = responses[0].canonical()
            if any(r.canonical() != canon for r in responses[1:]):
                return None
            return responses[0].groups

        def merge(ids: tuple[int, ...], groups) -> None:
            nonlocal merged_any
            for group in groups:
                if len(group) < 2:
                    continue
                owners = [rep_to_set[ids[pos]] for pos in group]
                for other in owners[1:]:
                    ra, rb = find(owners[0]), find(other)
                    if ra != rb:
                        parent[max(ra, rb)] = min(ra, rb)
                        merged_any = True

        segments = _cut_segments(data.points, _locality_order(data.points, reps),
                                 tau)
        for segment in segments:
            start = 0
            while start < len(segment) - 1:
                ids = tuple(segment[start:start + m_max])
                groups = ask(ids, repeats=1)
                if groups is not None:
                    merge(ids, groups)
                # overlap by one so merges chain through the shared text
                start += m_max - 1
        for left, right in zip(segments, segments[1:]):
            bridge = (left[-1], right[0])
            groups = ask(bridge, repeats=alpha)
            if groups is not None:
                merge(bridge, groups)
        if not merged_any:
            break
        unions: dict[int, list[int]] = {}
        for i in range(len(current)):
            unions.setdefault(find(i), []).append(i)
        rebuilt = []
        for root in sorted(unions):
            group_sets = unions[root]
            if len(group_sets) == 1:
                rebuilt.append(current[group_sets[0]])
                continue
            members = tuple(sorted({m for i in group_sets for m in members_of(current[i])}))
            rebuilt.append(MLSet(members=members, hard=False,
                                 diameter=set_diameter(data.points, members),
                                 level=None))
        current = rebuilt
    return dedup_ml_sets([s for s in current if not isinstance(s, tuple)])


def dedup_ml_sets(ml_sets: list[MLSet]) -> list[MLSet]:
    """Drop any ML set whose members are a subset of another's."""
    keep: list[MLSet] = []
    member_sets = [set(s.members) for s in ml_sets]
    for i, s in enumerate(ml_sets):
        dominated = any(
            j != i and member_sets[i] <= member_sets[j]
            and (member_sets[i] != member_sets[j] or j < i)
            for j in range(len(ml_sets))
        )
        if not dominated:
            keep.append(s)
    return keep


def _probe_passes(data: EmbeddedDataset, oracle, candidate: MLSet, alpha: int) -> bool:
    query = MLGroupQuery(ids=candidate.members,
                         texts=tuple(data.text(i) for i in candidate.members))
    return consistency_repeat(oracle, query, alpha)


MAX_THRESHOLD_PROBES = 16


def _search_class(data, oracle, candidates: list[MLSet], alpha: int) -> float:
    if not candidates:
        return 0.0
    by_diameter: dict[float, MLSet] = {}
    for cand in candidates:
        by_diameter.setdefault(cand.diameter, cand)
    psis = sorted(by_diameter)
    if len(psis) > MAX_THRESHOLD_PROBES:
        # subsample to evenly spaced quantiles so the repeated-query budget
        # stays bounded no matter how many candidate diameters exist
        idx = np.linspace(0, len(psis) - 1, MAX_THRESHOLD_PROBES).round().astype(int)
        psis = [psis[i] for i in sorted(set(int(i) for i in idx))]
    lo, hi = 0, len(psis) - 1
    best = -1
    # assumes consistency is monotone in the diameter
    while lo <= hi:
        mid = (lo + hi) // 2
        if _probe_passes(data, oracle, by_diameter[psis[mid]], alpha):
            best = mid
            lo = mid + 1
        else:
            hi = mid - 1
    return psis[best] if best >= 0 else 0.0


def compute_hard_thresholds(data: EmbeddedDataset, oracle, candidates: list[MLSet],
                            alpha_pair: int = ALPHA_PAIR,
                            alpha_set: int = ALPHA_SET) -> ThresholdResult:
    """Binary search the largest consistently-answered diameter per arity class.

    Candidates of each class are ordered by distinct diameter; a probe asks
    the oracle the same grouping ``alpha`` times and passes only when all
    repeats agree. A class with no candidates, or whose smallest diameter
    already fails, gets threshold 0.
    """
    pairs = [c for c in candidates if len(c.members) == 2]
    sets_ = [c for c in candidates if len(c.members) >= 3]
    return ThresholdResult(
        psi_pair=_search_class(data, oracle, pairs, alpha_pair),
        psi_set=_search_class(data, oracle, sets_, alpha_set),
    )


def classify_hard_soft(ml_sets: list[MLSet], thresholds: ThresholdResult) -> list[MLSet]:
    """Flag sets hard when their diameter is within their class threshold."""
    out = []
    for s in ml_sets:
        psi = thresholds.psi_pair if len(s.members) == 2 else thresholds.psi_set
        out.append(replace(s, hard=s.diameter <= psi))
    return out


def generate_cl_sets(data: EmbeddedDataset, oracle, cost_kc: float, k: int,
                     seed: int, max_sets: int | None = None) -> tuple[list[CLSet], int]:
    """Grow CL sets from uncovered points gated by the k-center radius.

    A set starts from a random uncovered point; candidates are sampled
    uniformly among uncovered points farther than ``cost_kc`` from every
    current member, appended when the oracle reports no topic match, and
    otherwise excluded from this set only. A set closes at size k or when no
    eligible point remains; singleton sets are discarded (their seed still
    counts as covered so generation terminates). ``max_sets`` caps the number
    of kept sets (None grows sets until every point is covered). Returns the
    kept sets and the number of rejected membership probes.
    """
    if k < 2:
        raise ValueError("k >= 2 required")
    rng = np.random.default_rng(seed)
    X = data.points
    uncovered = set(range(data.n))
    cl_sets: list[CLSet] = []
    rejections = 0
    while uncovered:
        if max_sets is not None and len(cl_sets) >= max_sets:
            break
        seed_point = int(rng.choice(sorted(uncovered)))
        members = [seed_point]
        skipped: set[int] = {seed_point}
        while len(members) < k:
            cand_idx = np.array(sorted(uncovered - skipped), dtype=np.int64)
            if cand_idx.size == 0:
                break
            gaps = np.linalg.norm(X[cand_idx][:, None, :] - X[members][None, :, :], axis=2)
            eligible = cand_idx[(gaps > cost_kc).all(axis=1)]
            if eligible.size == 0:
                break
            cand = int(rng.choice(eligible))
            query = CLMembershipQuery(
                set_ids=tuple(members),
                set_texts=tuple(data.text(m) for m in members),
                candidate_id=cand,
                candidate_text=data.text(cand),
            )
            verdict = oracle.query_cl_membership(query)
            if verdict.matched_index is None:
                members.append(cand)
            else:
                rejections += 1
            skipped.add(cand)
        uncovered.difference_update(members)
        if len(members) >= 2:
            cl_sets.append(CLSet(members=tuple(members)))
    return cl_sets, rejections


def mix_constraints(ml_sets: list[MLSet], cl_sets: list[CLSet], target_ratio: float,
                    n: int, seed: int) -> ConstraintCollection:
    """Select constraints until the constrained-instance ratio is reached.

    Repeatedly picks an unused CL set at random, then pulls in ML sets
    sharing a member with it one at a time, stopping as soon as the target
    is reached; once CL sets run out, tops up with random unused ML sets.
    The constrained-instance ratio is the fraction of distinct points
    appearing in at least one selected constraint. If all constraints are
    exhausted below the target, the collection is returned with
    ``shortfall`` set.
    """
    if not 0.0 <= target_ratio <= 1.0:
        raise ValueError("target_ratio must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    chosen_ml: list[MLSet] = []
    chosen_cl: list[CLSet] = []
    covered: set[int] = set()
    unused_cl = list(cl_sets)
    unused_ml = list(ml_sets)

    def ratio() -> float:
        return len(covered) / n

    while ratio() < target_ratio and unused_cl:
        pick = unused_cl.pop(int(rng.integers(len(unused_cl))))
        chosen_cl.append(pick)
        covered.update(pick.members)
        related = [s for s in unused_ml if set(s.members) & set(pick.members)]
        for s in related:
            if ratio() >= target_ratio:
                break
            unused_ml.remove(s)
            chosen_ml.append(s)
            covered.update(s.members)
    while ratio() < target_ratio and unused_ml:
        pick = unused_ml.pop(int(rng.integers(len(unused_ml))))
        chosen_ml.append(pick)
        covered.update(pick.members)
    return ConstraintCollection(
        ml_sets=chosen_ml,
        cl_sets=chosen_cl,
        meta={"target_ratio": target_ratio, "achieved_ratio": ratio()},
        shortfall=ratio() < target_ratio,
    )


def save_constraints(collection: ConstraintCollection, path: str | Path) -> None:
    doc = {
        "ml": [{"members": list(s.members), "hard": s.hard,
                "diameter": s.diameter, "level": s.level} for s in collection.ml_sets],
        "cl": [{"members": list(s.members)} for s in collection.cl_sets],
        "meta": collection.meta,
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_constraints(path: str | Path) -> ConstraintCollection:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    ml = [MLSet(members=tuple(e["members"]), hard=bool(e["hard"]),
                diameter=float(e.get("diameter", 0.0)), level=e.get("level"))
          for e in doc.get("ml", [])]
    cl = [CLSet(members=tuple(e["members"])) for e in doc.get("cl", [])]
    return ConstraintCollection(ml_sets=ml, cl_sets=cl, meta=doc.get("meta", {}))
