"""Expressive vs dot-product attention laboratory on NT sequence tasks."""

from _ealab import (
    Model,
    TaskSpec,
    apply_attention,
    attention_log_heatmap,
    dpa_weights,
    ea_weights,
    enumerate_cycles,
    generate_series,
    next_symbol,
    oracle_accuracy,
    random_series,
    scores,
)

__all__ = [
    "Model",
    "TaskSpec",
    "apply_attention",
    "attention_log_heatmap",
    "dpa_weights",
    "ea_weights",
    "enumerate_cycles",
    "generate_series",
    "next_symbol",
    "oracle_accuracy",
    "random_series",
    "scores",
]
