"""Task-clustered personalized federated learning simulator.

Thin Python surface over the C++ core: seeded k-means with silhouette-based
cluster-count selection, linear softmax adapters, single-cell simulation,
and the full experiment grid runner. All operations are deterministic for a
fixed seed.
"""

from ._fedrouter import (
    __version__,
    config_hash,
    evaluate_adapter,
    fit_kmeans,
    run_experiment,
    select_k,
    silhouette_score,
    simulate,
    train_adapter,
)

__all__ = [
    "__version__",
    "config_hash",
    "evaluate_adapter",
    "fit_kmeans",
    "run_experiment",
    "select_k",
    "silhouette_score",
    "simulate",
    "train_adapter",
]
