"""Reactive-MD species event pipeline.

Converts connectivity frames into duration-annotated species events,
band-pass filters and balances them, builds instruction-formatted
forecasting datasets, fits duration-aware statistical baselines, and scores
prediction files. A synthetic semi-Markov trajectory generator provides
ground-truth corpora for calibration.

Composite values are plain dicts/lists mirroring the on-disk JSONL row
shapes, so results stay interchangeable with the ``evomd`` CLI's files.
"""

from ._core import (
    StageError,
    ValidationError,
    balance,
    bandpass_filter,
    build_windows,
    canonicalize,
    extract_events,
    fit_baseline,
    format_records,
    generate_events,
    generate_frames,
    interleave_qa,
    parse_prediction,
    predict,
    read_events,
    run_pipeline,
    score,
    split_disjoint,
    templates,
    write_events,
)

__all__ = [
    "StageError",
    "ValidationError",
    "balance",
    "bandpass_filter",
    "build_windows",
    "canonicalize",
    "extract_events",
    "fit_baseline",
    "format_records",
    "generate_events",
    "generate_frames",
    "interleave_qa",
    "parse_prediction",
    "predict",
    "read_events",
    "run_pipeline",
    "score",
    "split_disjoint",
    "templates",
    "write_events",
]

__version__ = "0.1.0"
