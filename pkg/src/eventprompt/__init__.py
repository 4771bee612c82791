"""Prompt-based event extraction: prompts in, structured event records out."""

from .augment import (
    DictLexicon,
    Lexicon,
    augment_backtranslate,
    augment_eda,
    expand_with_eda,
    identity_translator,
)
from .corpus import (
    Argument,
    Document,
    EventMention,
    Passage,
    assign_splits,
    fewshot_sample,
    ingest,
    make_passage,
    merge_adjoining,
    trigger_surface,
    write_corpus,
)
from .errors import (
    ConfigError,
    CorpusError,
    EventPromptError,
    GenerationError,
    InstanceRejected,
    PromptError,
    SchemaError,
)
from .fewshot import fewshot_driver
from .generation import (
    ConstraintSet,
    GenerationResult,
    GroundedSpan,
    MockBackend,
    Seq2SeqBackend,
    TrainConfig,
    build_constraint,
    candidate_constraint,
    constrained_greedy_decode,
    ground_answers,
    train,
)
from .pipeline import (
    DetectedEvent,
    EventPrediction,
    PipelineConfig,
    PredictedArgument,
    StageBackends,
    build_training_instances,
    detect_events,
    extract_arguments,
    gold_detected,
    run_end_to_end,
    run_pipeline,
)
from .prompting import (
    AnswerMap,
    PromptInstance,
    Slot,
    build_external_trigger_prompt,
    build_internal_trigger_prompt,
    build_joint_argument_prompt,
    build_single_argument_prompts,
    build_subtype_prompt,
    parse_generation,
    read_instances,
    serialize_target,
    write_instances,
)
from .schema import (
    ACE_MAIN_TYPES,
    MASK_SLOT,
    ArgumentRole,
    EventSubtype,
    Schema,
    load_schema,
    main_type_of,
    roles_for,
    save_schema,
)
from .scoring import (
    ERROR_CATEGORIES,
    ScoreReport,
    export_errors,
    score_arguments,
    score_report,
    score_triggers,
)
from .synthetic import build_ace_shape_schema, build_synthetic_corpus, build_synthetic_schema

__version__ = "0.1.0"
