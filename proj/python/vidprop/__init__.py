"""Bindings for the short-video propagation graph toolkit."""

from ._core import (  # noqa: F401
    ConfigError,
    DataError,
    IoError,
    NumericError,
    align_indicators,
    approx_token_count,
    closed_form_alpha,
    edge_counts,
    encode_scalar,
    encode_time,
    evaluate,
    influence_level,
    render_prompt,
    run_cli,
    smooth_l1,
    stub_text_embedding,
    synth_corpus,
)
