"""Handwritten text line generation with style extraction and spaced-text layout."""

from ._core import (
    Alphabet,
    DataError,
    Model,
    ModelConfig,
    UsageError,
    cer,
    ctc_loss,
    derive_spaced_text,
    extract_style,
    generate_line,
    greedy_decode,
    load_model,
    read_image,
    reconstruct,
    render_spaced_line,
    run_cli,
    save_model,
    style_stats,
    write_image,
)

__all__ = [
    "Alphabet",
    "DataError",
    "Model",
    "ModelConfig",
    "UsageError",
    "cer",
    "ctc_loss",
    "derive_spaced_text",
    "extract_style",
    "generate_line",
    "greedy_decode",
    "load_model",
    "read_image",
    "reconstruct",
    "render_spaced_line",
    "run_cli",
    "save_model",
    "style_stats",
    "write_image",
]
