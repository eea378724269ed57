"""tmckit: topic-method composition mining over bibliographic corpora.

The pipeline ingests and deduplicates bibliographic exports, extracts
method entities through a curated lexicon (optionally gating externally
produced candidate mentions), assigns each document a dominant topic,
computes the truncated topic-method interaction intensity, and analyzes
the resulting pair network (popularity ranking, greedy modularity
communities).
"""

__version__ = "0.1.0"

from .errors import ConfigError, InputError, StageError, TmckitError
from .extract import (
    ExtractionEval,
    MethodLexicon,
    MethodMention,
    compile_lexicon,
    evaluate_extraction,
    harmonic_f1,
    import_candidates,
    llmrule_extract,
    rule_extract,
    standardize_candidates,
)
from .ingest import (
    BiblioRecord,
    CorpusStats,
    DedupReport,
    ParseResult,
    corpus_stats,
    deduplicate,
    filter_by_year,
    normalize_record,
    parse_records,
    read_corpus,
    write_corpus,
)
from .network import (
    CommunityPartition,
    TmcNetwork,
    build_network,
    community_report,
    greedy_communities,
    greedy_modularity,
    modularity,
    modularity_q,
    rank_popularity,
)
from .pipeline import RunConfig, RunManifest, emit_report, run_pipeline
from .tmc import (
    TmcPair,
    TmcTable,
    build_tmc_table,
    cooccurrence_counts,
    count_method_docs,
    export_bipartite,
    intensity,
)
from .topics import (
    DocTopicDist,
    TopicAssignment,
    TopicModelConfig,
    TopicQualityPoint,
    assign_dominant_topic,
    coherence_umass,
    doc_topic_dists,
    fit_topic_model,
    import_assignments,
    perplexity,
    sweep_topic_counts,
    tokenize,
    topic_doc_counts,
)

__all__ = [
    "__version__",
    "BiblioRecord",
    "CommunityPartition",
    "ConfigError",
    "CorpusStats",
    "DedupReport",
    "DocTopicDist",
    "ExtractionEval",
    "InputError",
    "MethodLexicon",
    "MethodMention",
    "ParseResult",
    "RunConfig",
    "RunManifest",
    "StageError",
    "TmckitError",
    "TmcNetwork",
    "TmcPair",
    "TmcTable",
    "TopicAssignment",
    "TopicModelConfig",
    "TopicQualityPoint",
    "assign_dominant_topic",
    "build_network",
    "build_tmc_table",
    "coherence_umass",
    "community_report",
    "compile_lexicon",
    "cooccurrence_counts",
    "corpus_stats",
    "count_method_docs",
    "deduplicate",
    "doc_topic_dists",
    "emit_report",
    "evaluate_extraction",
    "export_bipartite",
    "filter_by_year",
    "fit_topic_model",
    "greedy_communities",
    "greedy_modularity",
    "harmonic_f1",
    "import_assignments",
    "import_candidates",
    "intensity",
    "llmrule_extract",
    "modularity",
    "modularity_q",
    "normalize_record",
    "parse_records",
    "perplexity",
    "rank_popularity",
    "read_corpus",
    "rule_extract",
    "run_pipeline",
    "standardize_candidates",
    "sweep_topic_counts",
    "tokenize",
    "topic_doc_counts",
    "write_corpus",
]
