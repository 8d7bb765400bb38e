"""Per-query character-level language models over relevant-document
context windows, with a wordcloud assessment experiment on top."""

from .corpus import (
    CorpusDir,
    Document,
    ParseError,
    QrelEntry,
    StopwordList,
    Topic,
    Vocabulary,
    build_vocabulary,
    parse_qrels,
    parse_topics,
    parse_trec_documents,
    relevant_docnos,
    tokenize,
    write_corpus,
)
from .windowing import (
    EOF_CHAR,
    CharVocab,
    NoTrainingDataError,
    TrainingSequence,
    WindowConfig,
    build_char_vocab,
    build_training_sequence,
    check_sufficiency,
    extract_windows,
    load_training_sequence,
    save_training_sequence,
)
from .lstm import (
    Adam,
    Checkpoint,
    LstmParams,
    LstmState,
    SampleConfig,
    TrainConfig,
    TrainResult,
    TrainingDivergedError,
    forward_step,
    gradient_check,
    load_checkpoint,
    loss,
    make_gradcheck_instance,
    sample,
    save_checkpoint,
    train,
)
from .synth import (
    CloudEntry,
    Provenance,
    SyntheticDocument,
    WordCloud,
    dominance_ratio,
    make_synthetic_document,
    relevant_doc_cloud,
    synthetic_doc_cloud,
    top_k_frequencies,
)
from .experiment import (
    GRID_CELLS,
    SLOTS,
    AssessmentTask,
    RotationSchedule,
    TaskAssemblyError,
    UserResponse,
    ValidationResult,
    assign_positions,
    build_task,
    select_relevant_docs,
    synthetic_rank,
    validate_response,
)
from .service import ResponseStore, TaskStore, create_app
from .aggregate import (
    FindingsReport,
    QueryRankSummary,
    RankHistogram,
    average_rank,
    bin_rank,
    build_histogram,
    report,
)

__version__ = "0.1.0"
