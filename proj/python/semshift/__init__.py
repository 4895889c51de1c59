"""Semantic shift detection from clustered contextual token embeddings."""

from ._semshift import (
    DegenerateInputError,
    FormatError,
    IncompatibleError,
    InfeasibleError,
    InsufficientDataError,
    IoError,
    LookupError,
    ParameterError,
    SemshiftError,
    StageError,
    Store,
    UndefinedScoreError,
    ValidationError,
    __version__,
    average_ranks,
    build_store,
    change_score,
    cluster,
    cosine_distance,
    default_suite,
    default_suite_specs,
    generate,
    jsd,
    jsd_multi,
    merge_stores,
    metric,
    pca_2d,
    pearson,
    read_store,
    run_pipeline,
    silhouette,
    spearman,
    usage_distributions,
    variation_coefficient,
    write_store,
)

__all__ = [name for name in dir() if not name.startswith("_")] + ["__version__"]
