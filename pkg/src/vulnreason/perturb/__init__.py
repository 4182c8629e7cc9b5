"""Semantic-preserving C/C++ perturbation engine."""

from .engine import (
    ParseFailure,
    PerturbationPlan,
    PerturbedSample,
    VariantInput,
    apply_perturbation,
    compose,
    generate_variant,
    verify_equivalence,
)
from .gates import ToolchainConfig, ToolchainMissing, verify_compiles
from .hints import eliminate_hints
from .methods import (
    ApplyConfig,
    CATEGORY_ORDER,
    EXPECTED_CATEGORY_COUNTS,
    PerturbationMethod,
    get_method,
    method_catalog,
)
from .source import ProtectedLineViolation, SourceDoc

__all__ = [
    "ApplyConfig",
    "CATEGORY_ORDER",
    "EXPECTED_CATEGORY_COUNTS",
    "ParseFailure",
    "PerturbationMethod",
    "PerturbationPlan",
    "PerturbedSample",
    "ProtectedLineViolation",
    "SourceDoc",
    "ToolchainConfig",
    "ToolchainMissing",
    "VariantInput",
    "apply_perturbation",
    "compose",
    "eliminate_hints",
    "generate_variant",
    "get_method",
    "method_catalog",
    "verify_compiles",
    "verify_equivalence",
]
