"""explog: training-side SDK writing the modelprobe experiment log format."""

from .logger import (
    DuplicateModelError,
    ExperimentLogger,
    LoggerConfig,
    LoggerError,
    append_model_db,
    graph_doc,
    init_root,
    make_header,
    measure_runtime_ms,
    write_checkpoint_bundle,
)
from .toy import DenseLayer, DenseNet, toy_dataset

__all__ = [
    "DenseLayer",
    "DenseNet",
    "DuplicateModelError",
    "ExperimentLogger",
    "LoggerConfig",
    "LoggerError",
    "append_model_db",
    "graph_doc",
    "init_root",
    "make_header",
    "measure_runtime_ms",
    "toy_dataset",
    "write_checkpoint_bundle",
]
