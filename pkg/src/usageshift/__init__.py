"""Usage-type induction and lexical semantic change metrics.

The pipeline: load usage bundles (one word's contextualised usage vectors
with time-interval labels), standardise and cluster them into usage types
with silhouette-selected K-Means, derive per-interval usage-type
distributions, and score change with entropy difference, Jensen-Shannon
divergence, or average pairwise distance. An evaluation layer correlates
the scores with human judgements (Spearman, Mantel permutation tests).
"""

__version__ = "0.1.0"

from .clustering import (
    IntervalDistribution,
    UsageTypeModel,
    fit_usage_types,
    interval_distributions,
    kmeans_fit,
    select_k,
    silhouette_score,
    standardise,
)
from .evaluation import (
    SimilarityMatrix,
    annotator_agreement,
    average_judgements,
    evaluate_gems,
    mantel_test,
    model_similarity_matrix,
    sample_annotation_pairs,
    spearman,
)
from .metrics import (
    ChangeScoreSeries,
    apd,
    change_series,
    entropy_difference,
    frequency_baseline,
    jsd,
    jsd_multi,
    normalised_entropy,
)
from .store import (
    GoldScores,
    JudgementSet,
    UsageBundle,
    load_bundle,
    load_gold_scores,
    load_judgements,
    save_bundle,
    slice_by_interval,
)

__all__ = [
    "__version__",
    "UsageBundle",
    "GoldScores",
    "JudgementSet",
    "load_bundle",
    "save_bundle",
    "slice_by_interval",
    "load_gold_scores",
    "load_judgements",
    "standardise",
    "kmeans_fit",
    "silhouette_score",
    "select_k",
    "fit_usage_types",
    "interval_distributions",
    "UsageTypeModel",
    "IntervalDistribution",
    "normalised_entropy",
    "entropy_difference",
    "jsd",
    "jsd_multi",
    "apd",
    "change_series",
    "frequency_baseline",
    "ChangeScoreSeries",
    "spearman",
    "average_judgements",
    "model_similarity_matrix",
    "mantel_test",
    "evaluate_gems",
    "annotator_agreement",
    "sample_annotation_pairs",
    "SimilarityMatrix",
]
