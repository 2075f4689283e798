"""Causal-LM extraction adapter: scores choice letters on prompt plans and
writes mcqcal wire-format prediction records."""

from .adapter import (
    AdapterConfig,
    ContextOverflow,
    ModelLoadError,
    TokenizationAmbiguity,
    extract,
    extract_to_lines,
)

__all__ = [
    "AdapterConfig",
    "ContextOverflow",
    "ModelLoadError",
    "TokenizationAmbiguity",
    "extract",
    "extract_to_lines",
]
