"""Exact min-cost one-sided perfect matching between CL points and centers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment


@dataclass
class Matching:
    """Injective row-to-column assignment with its total cost."""

    assignment: tuple[int, ...]
    total_cost: float


def _optimal_cost(costs: np.ndarray) -> float:
    rows, cols = linear_sum_assignment(costs)
    return float(costs[rows, cols].sum())


def min_cost_matching(costs: np.ndarray) -> Matching:
    """Match every row to a distinct column minimizing the summed cost.

    Requires rows <= cols and finite entries. Among optimal matchings the
    lexicographically smallest assignment vector is returned, which makes the
    result deterministic for identical inputs.
    """
    costs = np.asarray(costs, dtype=np.float64)
    if costs.ndim != 2:
        raise ValueError("cost matrix must be 2-D")
    rows, cols = costs.shape
    if rows > cols:
        raise ValueError(f"rows ({rows}) must not exceed cols ({cols})")
    if not np.all(np.isfinite(costs)):
        raise ValueError("cost matrix has non-finite entries")
    best = _optimal_cost(costs)
    tol = 1e-9 * (1.0 + abs(best))
    # Fix rows in order to the smallest column index that preserves optimality.
    assignment: list[int] = []
    used: list[int] = []
    for r in range(rows):
        remaining_rows = list(range(r + 1, rows))
        for c in range(cols):
            if c in used:
                continue
            free_cols = [j for j in range(cols) if j not in used and j != c]
            sub = costs[np.ix_(remaining_rows, free_cols)] if remaining_rows else np.zeros((0, 0))
            partial = sum(costs[i, j] for i, j in zip(range(r), assignment))
            rest = _optimal_cost(sub) if remaining_rows else 0.0
            if partial + costs[r, c] + rest <= best + tol:
                assignment.append(c)
                used.append(c)
                break
        else:  # pragma: no cover - cannot happen with a finite matrix
            raise RuntimeError("failed to extend optimal matching")
    total = float(sum(costs[i, j] for i, j in enumerate(assignment)))
    return Matching(assignment=tuple(assignment), total_cost=total)
