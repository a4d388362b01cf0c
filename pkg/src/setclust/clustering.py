"""Penalty-based constrained clustering.

Pipeline: weighted k-means++ seeding with hard ML representatives, per-set
partitioning and penalty-tested merging of soft ML sets, matching-based local
search for CL sets, then alternating constrained assignment and center
updates until the centers stabilize.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from setclust.constraints import ConstraintCollection, MLSet
from setclust.dataset import EmbeddedDataset
from setclust.matching import Matching, min_cost_matching


class InvariantError(AssertionError):
    """An algorithm invariant (e.g. nonnegative release gain) was violated."""


@dataclass
class Penalties:
    """Per-point violation penalties, in units of the clustering metric."""

    w_ml: float
    w_cl: float

    def __post_init__(self):
        if self.w_ml < 0 or self.w_cl < 0:
            raise ValueError("penalties must be nonnegative")


@dataclass
class Convergence:
    """Outer-loop stopping rule.

    ``tol`` bounds the max squared center displacement; None selects
    1e-4 times the squared bounding-box diagonal of the data.
    """

    tol: float | None = None
    max_iters: int = 100

    def resolve_tol(self, points: np.ndarray) -> float:
        if self.tol is not None:
            return self.tol
        spread = points.max(axis=0) - points.min(axis=0)
        return 1e-4 * float(spread @ spread)


@dataclass
class Group:
    """A block of points moved as one unit, represented by its mass center."""

    members: tuple[int, ...]
    centroid: np.ndarray
    weight: int


@dataclass
class ClusteringResult:
    labels: np.ndarray
    centers: np.ndarray
    objective: float
    iterations: int
    converged: bool
    degenerate_seeding: bool = False
    penalties: Penalties | None = None
    # release-gain values observed during CL local search, for auditing
    min_gain_seen: float = field(default=np.inf)


def _pdist(points: np.ndarray, centers: np.ndarray, squared: bool) -> np.ndarray:
    """Distance of each point (rows) to each center (columns)."""
    d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    return d2 if squared else np.sqrt(d2)


def kmeanspp_seed(coords: np.ndarray, weights: np.ndarray, k: int,
                  seed: int | np.random.Generator) -> tuple[np.ndarray, bool]:
    """Weighted D^2 seeding.

    The first center is sampled proportionally to weight; each next center
    proportionally to weight times squared distance to the nearest chosen
    center. When fewer distinct points than k exist, sampling falls back to
    weight-proportional duplicates and the result is flagged degenerate.
    """
    coords = np.asarray(coords, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if weights.sum() < k:
        raise ValueError("total weight must be at least k")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    m = coords.shape[0]
    first = int(rng.choice(m, p=weights / weights.sum()))
    centers = [coords[first]]
    degenerate = False
    d2 = ((coords - centers[0]) ** 2).sum(axis=1)
    while len(centers) < k:
        mass = weights * d2
        total = mass.sum()
        if total <= 0:
            degenerate = True
            idx = int(rng.choice(m, p=weights / weights.sum()))
        else:
            idx = int(rng.choice(m, p=mass / total))
        centers.append(coords[idx])
        d2 = np.minimum(d2, ((coords - coords[idx]) ** 2).sum(axis=1))
    return np.vstack(centers), degenerate


def _merge_hard_sets(ml_sets: list[MLSet]) -> list[tuple[int, ...]]:
    """Union-find merge of hard sets that share members (ML is transitive)."""
    parent: dict[int, int] = {}

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for s in ml_sets:
        if not s.hard:
            continue
        ids = list(s.members)
        for i in ids:
            parent.setdefault(i, i)
        root = find(ids[0])
        for i in ids[1:]:
            r = find(i)
            if r != root:
                parent[max(r, root)] = min(r, root)
                root = min(r, root)
    groups: dict[int, list[int]] = {}
    for i in parent:
        groups.setdefault(find(i), []).append(i)
    return [tuple(sorted(v)) for _, v in sorted(groups.items())]


def _soft_member_lists(ml_sets: list[MLSet], claimed: set[int]) -> list[list[int]]:
    """Members of each soft set not already claimed by a hard block."""
    out = []
    taken = set(claimed)
    for s in ml_sets:
        if s.hard:
            continue
        members = [m for m in s.members if m not in taken]
        if len(members) >= 2:
            out.append(members)
            taken.update(members)
    return out


def _partition_soft_set(points: np.ndarray, members: list[int], centers: np.ndarray,
                        w_ml: float, squared: bool) -> list[list[int]]:
    """Split one soft ML set by nearest center, then merge while profitable.

    Merging two partitions is accepted when the kept-split cost plus the
    per-point penalties exceeds the cost of assigning the merged block to the
    center nearest its mass center. Passes repeat until none merges.
    """
    sub = points[members]
    near = np.argmin(_pdist(sub, centers, squared), axis=1)
    parts: list[list[int]] = []
    for cid in sorted(set(near.tolist())):
        parts.append([members[i] for i in range(len(members)) if near[i] == cid])

    def centroid(p: list[int]) -> np.ndarray:
        return points[p].mean(axis=0)

    def center_cost(x: np.ndarray) -> tuple[int, float]:
        d = _pdist(x[None, :], centers, squared)[0]
        c = int(np.argmin(d))
        return c, float(d[c])

    changed = True
    while changed and len(parts) > 1:
        changed = False
        order = sorted(range(len(parts)), key=lambda t: (-len(parts[t]), t))
        alive: list[list[int] | None] = list(parts)
        for pos, a in enumerate(order):
            if alive[a] is None:
                continue
            for b in order:
                if b == a or alive[b] is None or alive[a] is None:
                    continue
                pa, pb = alive[a], alive[b]
                _, da = center_cost(centroid(pa))
                _, db = center_cost(centroid(pb))
                union = pa + pb
                cij, _ = center_cost(centroid(union))
                merged_cost = float(_pdist(points[union], centers[cij][None, :], squared).sum())
                if (w_ml + db) * len(pb) + (w_ml + da) * len(pa) > merged_cost:
                    alive[a] = pa + pb
                    alive[b] = None
                    changed = True
        parts = [p for p in alive if p is not None]
    return parts


def build_groups(points: np.ndarray, hard_blocks: list[tuple[int, ...]],
                 soft_lists: list[list[int]], centers: np.ndarray,
                 w_ml: float, squared: bool) -> list[Group]:
    """Hard blocks pass through; soft sets are partitioned and merge-tested."""
    groups = [Group(members=b, centroid=points[list(b)].mean(axis=0), weight=len(b))
              for b in hard_blocks]
    for members in soft_lists:
        for part in _partition_soft_set(points, members, centers, w_ml, squared):
            groups.append(Group(members=tuple(sorted(part)),
                                centroid=points[part].mean(axis=0), weight=len(part)))
    return groups


def ml_penalty_cluster(data: EmbeddedDataset, ml_sets: list[MLSet], penalties: Penalties,
                       k: int, seed: int, squared: bool = True,
                       ) -> tuple[list[Group], np.ndarray]:
    """Seed centers with hard-ML representatives and group the ML sets.

    Returns the resulting blocks (hard blocks plus merged soft partitions,
    singletons included) and the seeded center set.
    """
    X = data.points
    hard_blocks = _merge_hard_sets(ml_sets)
    claimed = {m for b in hard_blocks for m in b}
    soft_lists = _soft_member_lists(ml_sets, claimed)
    coords = [points_mean for points_mean in (X[list(b)].mean(axis=0) for b in hard_blocks)]
    weights = [len(b) for b in hard_blocks]
    for i in range(data.n):
        if i not in claimed:
            coords.append(X[i])
            weights.append(1)
    centers, _ = kmeanspp_seed(np.vstack(coords), np.array(weights), k, seed)
    groups = build_groups(X, hard_blocks, soft_lists, centers, penalties.w_ml, squared)
    return groups, centers


_GAIN_TOL = 1e-6


def cl_local_search(elements: list[Group], cl_element_sets: list[list[int]],
                    centers: np.ndarray, w_cl: float, squared: bool = True,
                    gain_trace: list[float] | None = None) -> dict[int, int]:
    """Assign CL elements to centers by repeated min-cost matching.

    For each set, the matching M pins every element to a distinct center.
    Releasing element y re-matches the rest (M'); the release gain
    g_y = cost(M) - cost(M') - cost(y, nearest center) is always nonnegative
    and is compared against num_y * w_cl, where num_y counts the points whose
    matched center changes plus the points y itself carries. The argmax
    element is released to its nearest center until the gain no longer beats
    the penalty, then M is committed. Matching costs and num_y are both
    scaled by element weight, so w_cl stays a per-point penalty when an
    element is a multi-point block.
    """
    assignment: dict[int, int] = {}
    k = centers.shape[0]
    for eset in cl_element_sets:
        Y = [e for e in eset if e not in assignment]
        if len(Y) > k:
            raise ValueError(f"CL set has {len(Y)} blocks but only {k} centers")
        while Y:
            coords = np.vstack([elements[e].centroid for e in Y])
            w = np.array([elements[e].weight for e in Y], dtype=np.float64)
            costs = _pdist(coords, centers, squared) * w[:, None]
            matching = min_cost_matching(costs)
            nearest_cols = np.argmin(costs, axis=1)
            gains = np.empty(len(Y))
            nums = np.empty(len(Y))
            for pos in range(len(Y)):
                rest = [q for q in range(len(Y)) if q != pos]
                if rest:
                    sub = min_cost_matching(costs[rest])
                else:
                    sub = Matching(assignment=(), total_cost=0.0)
                changed = sum(
                    w[q] for out_pos, q in enumerate(rest)
                    if matching.assignment[q] != sub.assignment[out_pos]
                )
                g = matching.total_cost - sub.total_cost - float(costs[pos, nearest_cols[pos]])
                if g < -_GAIN_TOL * (1.0 + abs(matching.total_cost)):
                    raise InvariantError(f"negative release gain {g}")
                if gain_trace is not None:
                    gain_trace.append(g)
                gains[pos] = max(g, 0.0)
                nums[pos] = w[pos] + changed
            star = int(np.argmax(gains))
            if gains[star] < nums[star] * w_cl:
                for q, e in enumerate(Y):
                    assignment[e] = int(matching.assignment[q])
                break
            assignment[Y[star]] = int(nearest_cols[star])
            Y.pop(star)
    return assignment


def _constrained_assign(X: np.ndarray, hard_blocks, soft_lists, cl_sets,
                        centers: np.ndarray, pen: Penalties, squared: bool,
                        gain_trace: list[float] | None = None,
                        ) -> tuple[list[Group], dict[int, int]]:
    """One full constrained assignment round against a fixed center set."""
    groups = build_groups(X, hard_blocks, soft_lists, centers, pen.w_ml, squared)
    claimed = {m: gi for gi, g in enumerate(groups) for m in g.members}
    elements = list(groups)
    point_elem: dict[int, int] = dict(claimed)
    for i in range(X.shape[0]):
        if i not in point_elem:
            point_elem[i] = len(elements)
            elements.append(Group(members=(i,), centroid=X[i], weight=1))
    cl_element_sets = []
    for cl in cl_sets:
        mapped = list(dict.fromkeys(point_elem[m] for m in cl.members))
        if len(mapped) >= 2:
            cl_element_sets.append(mapped)
    assignment = cl_local_search(elements, cl_element_sets, centers, pen.w_cl,
                                 squared, gain_trace)
    unassigned = [e for e in range(len(elements)) if e not in assignment]
    if unassigned:
        coords = np.vstack([elements[e].centroid for e in unassigned])
        near = np.argmin(_pdist(coords, centers, squared), axis=1)
        for e, c in zip(unassigned, near):
            assignment[e] = int(c)
    return elements, assignment


def _expand(elements: list[Group], assignment: dict[int, int], n: int) -> np.ndarray:
    labels = np.empty(n, dtype=np.int64)
    for e, c in assignment.items():
        for m in elements[e].members:
            labels[m] = c
    return labels


def _update_centers(X: np.ndarray, labels: np.ndarray, centers: np.ndarray) -> np.ndarray:
    new = centers.copy()
    for c in range(centers.shape[0]):
        mask = labels == c
        if mask.any():
            new[c] = X[mask].mean(axis=0)
    return new


def _objective(X: np.ndarray, labels: np.ndarray, centers: np.ndarray) -> float:
    return float(((X - centers[labels]) ** 2).sum())


def resolve_penalties(data: EmbeddedDataset, k: int, seed: int,
                      convergence: Convergence | None = None,
                      squared: bool = True) -> Penalties:
    """Scale-aware defaults from one unconstrained baseline run on the same
    data and seed.

    w_ml is the mean point-to-assigned-center cost. w_cl is one cluster's
    share of the baseline objective (objective / k): breaking a CL pin is
    only worth it when the matching overpays by more than a typical
    cluster's entire cost per pinned point, so a cannot-link block can drag
    a duplicated center out of an overcrowded region instead of being
    released back to it.
    """
    base = kmeans_baseline(data, k, seed, convergence)
    if squared:
        mean_cost = base.objective / data.n
        cluster_cost = base.objective / k
    else:
        dists = np.sqrt(((data.points - base.centers[base.labels]) ** 2).sum(axis=1))
        mean_cost = float(dists.mean())
        cluster_cost = float(dists.sum()) / k
    return Penalties(w_ml=mean_cost, w_cl=cluster_cost)


def _run(data: EmbeddedDataset, collection: ConstraintCollection,
         penalties: Penalties | None, k: int, seed: int,
         convergence: Convergence | None, squared: bool,
         use_hard: bool) -> ClusteringResult:
    if not 1 <= k <= data.n:
        raise ValueError(f"k must be in [1, {data.n}]")
    conv = convergence if convergence is not None else Convergence()
    tol = conv.resolve_tol(data.points)
    pen = penalties if penalties is not None else resolve_penalties(data, k, seed, conv, squared)
    X = data.points

    ml_sets = collection.ml_sets
    if not use_hard:
        ml_sets = [replace(s, hard=False) for s in ml_sets]
    hard_blocks = _merge_hard_sets(ml_sets)
    claimed = {m for b in hard_blocks for m in b}
    soft_lists = _soft_member_lists(ml_sets, claimed)

    coords = [X[list(b)].mean(axis=0) for b in hard_blocks]
    weights = [len(b) for b in hard_blocks]
    free = [i for i in range(data.n) if i not in claimed]
    coords.extend(X[free])
    weights.extend([1] * len(free))
    centers, degenerate = kmeanspp_seed(np.vstack(coords), np.array(weights), k, seed)

    gain_trace: list[float] = []
    iterations = 0
    converged = False
    for _ in range(conv.max_iters):
        elements, assignment = _constrained_assign(
            X, hard_blocks, soft_lists, collection.cl_sets, centers, pen, squared, gain_trace)
        labels = _expand(elements, assignment, data.n)
        new_centers = _update_centers(X, labels, centers)
        displacement = float(((new_centers - centers) ** 2).sum(axis=1).max())
        centers = new_centers
        iterations += 1
        if displacement < tol:
            converged = True
            break
    # final assignment against the final centers, so the reported labels and
    # centers are mutually consistent
    elements, assignment = _constrained_assign(
        X, hard_blocks, soft_lists, collection.cl_sets, centers, pen, squared, gain_trace)
    labels = _expand(elements, assignment, data.n)
    return ClusteringResult(
        labels=labels,
        centers=centers,
        objective=_objective(X, labels, centers),
        iterations=iterations,
        converged=converged,
        degenerate_seeding=degenerate,
        penalties=pen,
        min_gain_seen=float(min(gain_trace)) if gain_trace else np.inf,
    )


def lsck_hc(data: EmbeddedDataset, collection: ConstraintCollection,
            penalties: Penalties | None, k: int, seed: int,
            convergence: Convergence | None = None, squared: bool = True) -> ClusteringResult:
    """Full constrained clustering with hard and soft ML plus CL sets."""
    return _run(data, collection, penalties, k, seed, convergence, squared, use_hard=True)


def lsck(data: EmbeddedDataset, collection: ConstraintCollection,
         penalties: Penalties | None, k: int, seed: int,
         convergence: Convergence | None = None, squared: bool = True) -> ClusteringResult:
    """Variant treating every ML set as soft (no hard seeding representatives)."""
    return _run(data, collection, penalties, k, seed, convergence, squared, use_hard=False)


def kmeans_baseline(data: EmbeddedDataset, k: int, seed: int,
                    convergence: Convergence | None = None) -> ClusteringResult:
    """Unconstrained k-means++ seeding plus Lloyd iterations."""
    if not 1 <= k <= data.n:
        raise ValueError(f"k must be in [1, {data.n}]")
    conv = convergence if convergence is not None else Convergence()
    X = data.points
    tol = conv.resolve_tol(X)
    centers, degenerate = kmeanspp_seed(X, np.ones(data.n), k, seed)
    iterations = 0
    converged = False
    for _ in range(conv.max_iters):
        labels = np.argmin(_pdist(X, centers, squared=True), axis=1)
        new_centers = _update_centers(X, labels, centers)
        displacement = float(((new_centers - centers) ** 2).sum(axis=1).max())
        centers = new_centers
        iterations += 1
        if displacement < tol:
            converged = True
            break
    labels = np.argmin(_pdist(X, centers, squared=True), axis=1)
    return ClusteringResult(labels=labels, centers=centers,
                            objective=_objective(X, labels, centers),
                            iterations=iterations, converged=converged,
                            degenerate_seeding=degenerate)
