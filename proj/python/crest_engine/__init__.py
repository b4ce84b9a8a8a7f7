from ._core import (
    ConfigError,
    FormatError,
    Opinion,
    ace_loss,
    conflict,
    digamma,
    digs_loss,
    fuse,
    generate_dataset,
    gzsl_metrics,
    harmonic_mean,
    kl_to_uniform,
    lgamma,
    load_matrix,
    opinion_from_evidence,
    predict,
    project,
    train_on_dataset,
    vicl_loss,
)

__all__ = [
    "ConfigError",
    "FormatError",
    "Opinion",
    "ace_loss",
    "conflict",
    "digamma",
    "digs_loss",
    "fuse",
    "generate_dataset",
    "gzsl_metrics",
    "harmonic_mean",
    "kl_to_uniform",
    "lgamma",
    "load_matrix",
    "opinion_from_evidence",
    "predict",
    "project",
    "train_on_dataset",
    "vicl_loss",
]
