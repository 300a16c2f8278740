"""Dual-stream disguised-expression recognition core.

Datasets are dicts of NumPy arrays with keys ``subject``, ``true_label``,
``disguised_label``, ``apex`` (bool) and ``embedding`` (N x d float32).
"""

from ._dsid import (
    InvariantError,
    IoError,
    cli,
    cross_entropy,
    export_csv,
    hsic_loss,
    hsic_per_sample,
    import_csv,
    kernel_eval,
    permutation_test,
    read_embeddings,
    run_loso,
    score,
    synth,
    write_embeddings,
)

__all__ = [
    "InvariantError",
    "IoError",
    "cli",
    "cross_entropy",
    "export_csv",
    "hsic_loss",
    "hsic_per_sample",
    "import_csv",
    "kernel_eval",
    "permutation_test",
    "read_embeddings",
    "run_loso",
    "score",
    "synth",
    "write_embeddings",
]
