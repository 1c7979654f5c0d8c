"""Diachronic POS taggers, year-embedding PCA and sentence dating."""

from ._core import (
    DataError,
    DatedSentence,
    DegenerateInput,
    InvalidArgument,
    NumericalFailure,
    Tagger,
    baseline_metric,
    dating_metric,
    fit_line,
    frequency_invariance,
    generate,
    grad_check,
    load_corpus,
    lowess,
    pca,
    run_cli,
    save_corpus,
    shuffle_tokens,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "DataError",
    "DatedSentence",
    "DegenerateInput",
    "InvalidArgument",
    "NumericalFailure",
    "Tagger",
    "baseline_metric",
    "dating_metric",
    "fit_line",
    "frequency_invariance",
    "generate",
    "grad_check",
    "load_corpus",
    "lowess",
    "pca",
    "run_cli",
    "save_corpus",
    "shuffle_tokens",
    "train",
]
