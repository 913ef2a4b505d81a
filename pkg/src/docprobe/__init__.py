"""Probing harness for document-level information-extraction representations.

Pipeline: parse a template-filling corpus, store frozen per-token encoder
embeddings in binary bundles, derive eight probing-task datasets over them,
train small attention-pooled MLP probes (hand-written backprop and Adam),
and sweep tasks x layers x seeds into aggregated reports.
"""

from .corpus import (
    Corpus,
    Document,
    Entity,
    INCIDENT_TYPES,
    MentionSpan,
    ROLE_NAMES,
    SPLITS,
    Template,
    coref_chains,
    corpus_to_json,
    enumerate_role_fillers,
    parse_corpus,
    save_corpus,
    split_documents,
)
from .embedstore import (
    AlignmentMap,
    BundleManifest,
    BundleReader,
    DROPPED,
    DocEmbedding,
    concat_doc_embeddings,
    first_token_vector,
    read_bundle,
    truncate,
    word_has_vector,
    write_bundle,
)
from .errors import (
    CorruptFile,
    DegenerateDistribution,
    DimensionMismatch,
    DocprobeError,
    EmptyCorpus,
    EmptyInput,
    EmptySplit,
    KeyMismatch,
    LayerNotInBundle,
    MalformedInput,
    NonFiniteLoss,
    OffsetResolutionError,
    ShapeMismatch,
    UnknownDoc,
)
from .probe import (
    ProbeConfig,
    ProbeModel,
    TrainReport,
    adam_step,
    attention_pool,
    evaluate,
    forward,
    init_model,
    load_model,
    loss_and_grads,
    save_model,
    train,
)
from .runner import (
    BundleRef,
    CellStats,
    ExperimentSpec,
    ResultTable,
    compare_modes,
    layer_sweep,
    load_results,
    render_report,
    run_experiment,
    stratified_eval,
)
from .taskgen import (
    BucketSpec,
    ProbingDataset,
    ProbingExample,
    VectorRef,
    build_argtyp,
    build_coevnt,
    build_coref,
    build_evntct,
    build_evnttyp,
    build_isarg,
    build_sentct,
    build_task,
    build_wordct,
    derive_seed,
    load_dataset,
    quantile_buckets,
    save_dataset,
    word_count_stratum,
)

__version__ = "0.1.0"
