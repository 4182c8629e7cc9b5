"""Perturbation pipeline: hint elimination, method composition, dual-gate checks.

Variants that fail a gate are returned with their flags set rather than
dropped, so corpus accounting can report pass rates.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from ..csource import ParseFailure
from ..judge import JudgeHandle, majority_equivalence
from .gates import ToolchainConfig, verify_compiles
from .hints import eliminate_hints_doc
from .methods import ApplyConfig, ApplyContext, get_method, implementation
from .source import ProtectedLineViolation, SourceDoc

__all__ = [
    "PerturbationPlan",
    "PerturbedSample",
    "apply_perturbation",
    "compose",
    "generate_variant",
    "verify_equivalence",
    "ParseFailure",
]


@dataclass(frozen=True)
class PerturbationPlan:
    methods: tuple[str, ...]
    seed: int = 0
    protected_lines: frozenset[int] = frozenset()

    def __post_init__(self) -> None:
        for method_id in self.methods:
            get_method(method_id)  # raises on unknown ids
        object.__setattr__(self, "protected_lines", frozenset(int(p) for p in self.protected_lines))


@dataclass(frozen=True)
class PerturbedSample:
    original: str
    perturbed: str
    plan: PerturbationPlan
    applied: tuple[dict, ...]
    compile_ok: bool
    equivalence_ok: bool
    votes: tuple[str, ...] = ()
    compile_diagnostics: str = ""

    @property
    def gate_passed(self) -> bool:
        return self.compile_ok and self.equivalence_ok


def _method_rng(seed: int, position: int, method_id: str) -> random.Random:
    # str seeding is stable across processes, unlike hash().
    return random.Random(f"{seed}:{position}:{method_id}")


def apply_perturbation(
    source: str,
    method_id: str,
    protected_lines=(),
    seed: int = 0,
    config: ApplyConfig | None = None,
) -> tuple[str, list[dict]]:
    """Apply one cataloged method to every applicable non-protected site.

    A method with no applicable site returns the source unchanged with an
    empty applied list.
    """
    get_method(method_id)
    doc = SourceDoc.from_text(source, protected_lines)
    ctx = ApplyContext(rng=_method_rng(seed, 0, method_id), config=config or ApplyConfig())
    implementation(method_id)(doc, ctx)
    _check_protected(source, doc.text(), doc.protected)
    return doc.text(), ctx.applied


def compose(
    source: str,
    plan: PerturbationPlan,
    config: ApplyConfig | None = None,
) -> tuple[str, list[dict]]:
    """Apply the plan's methods in order; deterministic for fixed inputs."""
    doc = SourceDoc.from_text(source, plan.protected_lines)
    applied: list[dict] = []
    for position, method_id in enumerate(plan.methods):
        ctx = ApplyContext(
            rng=_method_rng(plan.seed, position, method_id),
            config=config or ApplyConfig(),
        )
        implementation(method_id)(doc, ctx)
        applied.extend(ctx.applied)
    _check_protected(source, doc.text(), doc.protected)
    return doc.text(), applied


def _check_protected(original: str, perturbed: str, protected: frozenset[int]) -> None:
    if not protected:
        return
    original_lines = original.split("\n")
    perturbed_lines = set(perturbed.split("\n"))
    for number in sorted(protected):
        line = original_lines[number - 1]
        if line not in perturbed_lines:
            raise ProtectedLineViolation(
                f"protected line {number} missing from output: {line!r}"
            )


def verify_equivalence(
    original: str, perturbed: str, judges: tuple[JudgeHandle, JudgeHandle, JudgeHandle]
) -> tuple[bool, tuple[str, ...]]:
    """Majority equivalence vote over exactly three judges."""
    return majority_equivalence(original, perturbed, judges)


@dataclass
class VariantInput:
    """Minimal sample shape the variant pipeline needs."""

    source: str
    label: int = 1
    protected_lines: frozenset[int] = frozenset()
    sample_id: str = ""


def generate_variant(
    sample: VariantInput,
    plan: PerturbationPlan,
    toolchain: ToolchainConfig | None = None,
    judges: tuple[JudgeHandle, JudgeHandle, JudgeHandle] | None = None,
    config: ApplyConfig | None = None,
) -> PerturbedSample:
    """Full pipeline: hint elimination, composed perturbation, dual gates.

    Gates that are not configured count as passed, so the gate flags always
    reflect exactly the checks that ran.
    """
    protected = frozenset(plan.protected_lines) | frozenset(sample.protected_lines)
    doc = SourceDoc.from_text(sample.source, protected)
    eliminate_hints_doc(doc)
    hint_free = doc.text()
    # Protected line numbers refer to the original source; carry them into the
    # hint-free text by position lookup.
    carried = frozenset(
        i + 1 for i, origin in enumerate(doc.origin) if origin in protected
    )
    perturbed, applied = compose(
        hint_free,
        PerturbationPlan(methods=plan.methods, seed=plan.seed, protected_lines=carried),
        config=config,
    )
    _check_protected(sample.source, perturbed, protected)

    compile_ok, diagnostics = (True, "")
    if toolchain is not None:
        compile_ok, diagnostics = verify_compiles(perturbed, toolchain)
    equivalence_ok, votes = (True, ())
    if judges is not None:
        equivalence_ok, votes = verify_equivalence(sample.source, perturbed, judges)
    return PerturbedSample(
        original=sample.source,
        perturbed=perturbed,
        plan=plan,
        applied=tuple(applied),
        compile_ok=compile_ok,
        equivalence_ok=equivalence_ok,
        votes=votes,
        compile_diagnostics=diagnostics,
    )
