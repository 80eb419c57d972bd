"""On-disk experiment log format, catalog loading, and fixture generation."""

from .catalog import (
    CatalogHolder,
    compute_save_size,
    load_catalog,
    scan_signature,
    validate_header,
)
from .fixtures import (
    FixtureSpec,
    classifier_fixture_spec,
    generate_demo,
    generate_fixture,
    vae_fixture_spec,
)
from .model import (
    ArchitectureGraph,
    CheckpointBundle,
    DatabaseNotFoundError,
    ExperimentCatalog,
    InnerOp,
    LayerDesc,
    LineageError,
    MalformedRecordError,
    ModelHeader,
    ModelRecord,
    StoreError,
    Tensor,
    TensorFormatError,
    TensorRef,
)
from .tensor_io import read_tensor, write_tensor

__all__ = [
    "ArchitectureGraph",
    "CatalogHolder",
    "CheckpointBundle",
    "DatabaseNotFoundError",
    "ExperimentCatalog",
    "FixtureSpec",
    "InnerOp",
    "LayerDesc",
    "LineageError",
    "MalformedRecordError",
    "ModelHeader",
    "ModelRecord",
    "StoreError",
    "Tensor",
    "TensorFormatError",
    "TensorRef",
    "classifier_fixture_spec",
    "compute_save_size",
    "generate_demo",
    "generate_fixture",
    "load_catalog",
    "read_tensor",
    "scan_signature",
    "vae_fixture_spec",
    "validate_header",
    "write_tensor",
]
