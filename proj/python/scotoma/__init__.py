"""SCOTOMA semisupervised one-to-one matching."""

from ._core import (
    ConfigError,
    DataError,
    Dataset,
    NumericalError,
    ScotomaError,
    fit,
    generate,
    greedy_match_scores,
    load_dataset,
    match_objects,
    matching_accuracy,
    normalize_weights,
    parse_dataset,
    random_matching_stats,
    score,
    score_matrix,
    subspace_dist,
    top_generalized_eigvec,
)

__all__ = [
    "ConfigError",
    "DataError",
    "Dataset",
    "NumericalError",
    "ScotomaError",
    "fit",
    "generate",
    "greedy_match_scores",
    "load_dataset",
    "match_objects",
    "matching_accuracy",
    "normalize_weights",
    "parse_dataset",
    "random_matching_stats",
    "score",
    "score_matrix",
    "subspace_dist",
    "top_generalized_eigvec",
]
__version__ = "0.1.0"
