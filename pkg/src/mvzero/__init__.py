"""Zero-shot multi-view 3D shape recognition over precomputed embeddings.

The pipeline scores each rendered view of a shape against class prompts,
keeps the views whose class distribution has the lowest entropy, fuses
their predictions, and refines low-confidence decisions by re-matching
against offline-generated prompts for the top-k candidate classes.
"""

from .bank import (
    Layer2Entry,
    PromptBank,
    PromptStyle,
    candidate_key,
    load_bank,
    lookup_layer2,
    save_bank,
    validate_bank,
)
from .classifier import (
    Aggregation,
    ClassifierConfig,
    PredictionRecord,
    classify_shape,
    confidence_gate,
    first_layer,
    second_layer,
    top_k_candidates,
)
from .embeddings import (
    DatasetManifest,
    EmbeddingMatrix,
    ShapeRecord,
    load_dataset,
    normalize_rows,
    read_embeddings,
    read_embeddings_file,
    save_manifest,
    write_embeddings,
    write_embeddings_file,
)
from .harness import (
    EvalReport,
    GridCell,
    SweepCurve,
    ablation_grid,
    decision_variance,
    emit_report,
    evaluate,
    per_view_accuracy,
    sweep,
)
from .scoring import (
    LogitsVector,
    ProbabilityVector,
    compute_logits,
    entropy_bits,
    softmax,
    view_entropy,
)
from .selection import (
    PoolMode,
    Selection,
    SelectionConfig,
    SelectionMode,
    ViewScore,
    pool_features,
    score_views,
    select_views,
)
from .synthetic import SyntheticSpec, generate_synthetic, write_synthetic_dataset

__version__ = "0.1.0"
