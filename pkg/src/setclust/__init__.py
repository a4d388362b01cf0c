"""Constrained k-means clustering with oracle-generated constraint sets.

The toolkit has two stages: constraint generation (grid-driven must-link
candidates plus radius-gated cannot-link growth, answered by a simulated or
remote oracle) and penalty-based constrained clustering (weighted seeding,
partition merging for must-links, and matching-based local search for
cannot-links).
"""

from setclust.dataset import EmbeddedDataset, SyntheticSpec, TextRecord, generate_synthetic, load_dataset
from setclust.constraints import CLSet, ConstraintCollection, MLSet, ThresholdResult
from setclust.clustering import ClusteringResult, Convergence, Penalties
from setclust.oracle import QueryLedger, SimulatedOracle

__all__ = [
    "CLSet",
    "ClusteringResult",
    "ConstraintCollection",
    "Convergence",
    "EmbeddedDataset",
    "MLSet",
    "Penalties",
    "QueryLedger",
    "SimulatedOracle",
    "SyntheticSpec",
    "TextRecord",
    "ThresholdResult",
    "generate_synthetic",
    "load_dataset",
]
