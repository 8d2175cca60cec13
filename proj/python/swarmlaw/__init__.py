"""Train, simulate and measure swarms of self-propelled agents."""

from ._swarmlaw import (
    CoincidentAgentError,
    ConfigError,
    DivergenceError,
    EvaluationError,
    InsufficientDataError,
    MetricError,
    Model,
    ParseError,
    Pattern,
    SwarmlawError,
    VersionError,
    blend_weight,
    metrics,
    series,
    simulate,
    train,
    trials,
)

__all__ = [
    "CoincidentAgentError",
    "ConfigError",
    "DivergenceError",
    "EvaluationError",
    "InsufficientDataError",
    "MetricError",
    "Model",
    "ParseError",
    "Pattern",
    "SwarmlawError",
    "VersionError",
    "blend_weight",
    "metrics",
    "series",
    "simulate",
    "train",
    "trials",
]
