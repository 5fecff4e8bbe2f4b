"""1D rational-kernel (Pade) neural networks for multi-class motor fault
diagnosis: a self-contained numpy engine with reverse-mode differentiation,
the full training protocol, data pipeline, metrics, and a CLI."""

from .errors import (
    CheckpointError,
    ConfigError,
    IngestError,
    NumericError,
    ParseError,
    ShapeError,
)
from .model import (
    ModelConfig,
    Model,
    build_model,
    config_param_count,
    count_params,
    load_checkpoint,
    save_checkpoint,
)
from .numerics import RngStream, conv1d_same, maxpool1d
from .pipeline import (
    CLASS_CODES,
    FaultClass,
    SegmentSet,
    SplitData,
    ingest_recording,
    load_csv_corpus,
    normalize_segment,
    parse_label,
    segment_signal,
    temporal_split,
)
from .synth import build_synthetic_corpus, synth_generate, write_corpus_csv
from .training import (
    Adam,
    PlateauController,
    RunReport,
    TrainingConfig,
    cross_entropy_loss,
    evaluate,
    run_experiment,
    train,
)
from .metrics import aggregate_runs, confusion, metrics_from_confusion

__version__ = "0.1.0"
