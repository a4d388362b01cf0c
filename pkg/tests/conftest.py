"""Shared helpers for the test suite."""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from setclust.dataset import EmbeddedDataset, TextRecord


def make_dataset(points, labels=None) -> EmbeddedDataset:
    """Build an EmbeddedDataset from raw coordinates and optional labels."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points[:, None]
    n = points.shape[0]
    records = [
        TextRecord(id=i, text=f"text {i}",
                   label=None if labels is None else int(labels[i]))
        for i in range(n)
    ]
    return EmbeddedDataset(points=points, records=records)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
