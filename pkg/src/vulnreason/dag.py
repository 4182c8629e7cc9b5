"""Reasoning-DAG data model: parsing, structural validation, and topology analysis.

A reasoning trace is a directed acyclic graph whose nodes are atomic analysis
steps. Four node kinds exist: ``source`` nodes state literal code facts and
have no dependencies; ``intermediate`` nodes derive inferences from earlier
steps; ``verified_sink`` and ``sanitized_sink`` nodes terminate the analysis
with a vulnerability finding or a safety proof. Dependencies always point at
strictly earlier steps, so chronological serialization guarantees acyclicity.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping

logger = logging.getLogger(__name__)

STEP_CITATION = re.compile(r"\bstep\s+(\d+)\b", re.IGNORECASE)


class TraceError(ValueError):
    """Base class for trace parsing failures."""


class MalformedTrace(TraceError):
    """Raised when the trace document does not follow the trace schema."""


class UnknownKind(TraceError):
    """Raised when a node declares a kind outside the four-variant taxonomy."""


class ForwardReference(TraceError):
    """Raised when a dependency cites a later or missing step id."""


class DuplicateStepId(TraceError):
    """Raised when two nodes share a step id."""


class CycleDetected(TraceError):
    """Raised when a dependency relation is cyclic (unreachable for parsed traces)."""


class UnknownStepId(KeyError):
    """Raised when a visited set references a step id absent from the DAG."""


class NodeKind(str, Enum):
    SOURCE = "source"
    INTERMEDIATE = "intermediate"
    VERIFIED_SINK = "verified_sink"
    SANITIZED_SINK = "sanitized_sink"

    @property
    def is_sink(self) -> bool:
        return self in (NodeKind.VERIFIED_SINK, NodeKind.SANITIZED_SINK)


@dataclass(frozen=True)
class ReasoningNode:
    """One atomic reasoning step.

    ``dependencies`` is the ordered set of parent step ids (duplicates are
    collapsed at parse time); ``justification`` names the analysis primitive
    behind the step and cites each parent with a literal ``Step X`` tag.
    """

    step_id: int
    kind: NodeKind
    statement: str
    dependencies: tuple[int, ...] = ()
    justification: str = ""

    def cited_steps(self) -> frozenset[int]:
        """Step ids referenced by ``Step X`` tags in the justification."""
        return frozenset(int(m) for m in STEP_CITATION.findall(self.justification))


@dataclass(frozen=True)
class GraphStats:
    node_count: int
    edge_count: int
    density: float
    max_in_degree: int
    max_out_degree: int


@dataclass(frozen=True)
class Violation:
    step_id: int
    rule: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    structural_ok: bool
    violations: tuple[Violation, ...]
    dangling_nodes: tuple[int, ...]
    closed: bool


@dataclass(frozen=True)
class ReasoningDag:
    """An immutable reasoning DAG in serialized (chronological) node order."""

    sample_id: str
    nodes: tuple[ReasoningNode, ...]

    def __post_init__(self) -> None:
        index = {node.step_id: node for node in self.nodes}
        if len(index) != len(self.nodes):
            raise DuplicateStepId(f"duplicate step ids in DAG {self.sample_id!r}")
        object.__setattr__(self, "_by_id", index)

    @property
    def step_ids(self) -> frozenset[int]:
        return frozenset(self._by_id)

    def node(self, step_id: int) -> ReasoningNode:
        try:
            return self._by_id[step_id]
        except KeyError:
            raise UnknownStepId(step_id) from None

    def sinks(self) -> tuple[ReasoningNode, ...]:
        return tuple(n for n in self.nodes if n.kind.is_sink)

    @property
    def verdict(self) -> int | None:
        """Binary label implied by the sinks: 1 if any verified sink exists,
        0 if only sanitized sinks exist, None for a sink-free trace."""
        kinds = {n.kind for n in self.nodes if n.kind.is_sink}
        if NodeKind.VERIFIED_SINK in kinds:
            return 1
        if NodeKind.SANITIZED_SINK in kinds:
            return 0
        return None

    def children(self) -> dict[int, list[int]]:
        """Adjacency from each node to the nodes that depend on it."""
        out: dict[int, list[int]] = {n.step_id: [] for n in self.nodes}
        for node in self.nodes:
            for dep in node.dependencies:
                if dep in out:
                    out[dep].append(node.step_id)
        return out


def _normalize_dependencies(raw_deps, step_id: int, sample_id: str) -> tuple[int, ...]:
    if raw_deps is None:
        return ()
    if not isinstance(raw_deps, list) or not all(
        isinstance(d, int) and not isinstance(d, bool) for d in raw_deps
    ):
        raise MalformedTrace(
            f"{sample_id}: step {step_id} direct_dependent_steps must be null or a list of ints"
        )
    seen: list[int] = []
    for dep in raw_deps:
        if dep in seen:
            logger.warning(
                "%s: step %d lists dependency %d more than once; collapsing",
                sample_id, step_id, dep,
            )
            continue
        seen.append(dep)
    return tuple(seen)


def parse_trace(raw: str | Mapping) -> ReasoningDag:
    """Parse a trace document (JSON text or an already-decoded mapping).

    The document shape is ``{"sample_id": str, "thinking": [node, ...]}``
    where each node carries ``step_id``, ``kind``, ``statement``,
    ``direct_dependent_steps`` (list of earlier step ids, or null) and
    ``justification``. Node order must be chronological; every dependency
    must resolve to a strictly earlier step.
    """
    if isinstance(raw, str):
        try:
            doc = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise MalformedTrace(f"invalid JSON: {exc}") from exc
    else:
        doc = raw
    if not isinstance(doc, Mapping):
        raise MalformedTrace("trace document must be a JSON object")
    sample_id = doc.get("sample_id")
    if not isinstance(sample_id, str):
        raise MalformedTrace("trace document missing string 'sample_id'")
    thinking = doc.get("thinking")
    if not isinstance(thinking, list):
        raise MalformedTrace(f"{sample_id}: 'thinking' must be an array")

    nodes: list[ReasoningNode] = []
    seen_ids: set[int] = set()
    for pos, entry in enumerate(thinking):
        if not isinstance(entry, Mapping):
            raise MalformedTrace(f"{sample_id}: thinking[{pos}] is not an object")
        step_id = entry.get("step_id")
        if not isinstance(step_id, int) or isinstance(step_id, bool) or step_id < 1:
            raise MalformedTrace(f"{sample_id}: thinking[{pos}] step_id must be a positive int")
        if step_id in seen_ids:
            raise DuplicateStepId(f"{sample_id}: step id {step_id} appears twice")
        kind_raw = entry.get("kind")
        try:
            kind = NodeKind(kind_raw)
        except ValueError:
            raise UnknownKind(f"{sample_id}: step {step_id} has unknown kind {kind_raw!r}") from None
        statement = entry.get("statement")
        if not isinstance(statement, str):
            raise MalformedTrace(f"{sample_id}: step {step_id} statement must be a string")
        deps = _normalize_dependencies(entry.get("direct_dependent_steps"), step_id, sample_id)
        for dep in deps:
            if dep >= step_id or dep not in seen_ids:
                raise ForwardReference(
                    f"{sample_id}: step {step_id} depends on step {dep}, "
                    "which is not an earlier step of this trace"
                )
        justification = entry.get("justification", "")
        if not isinstance(justification, str):
            raise MalformedTrace(f"{sample_id}: step {step_id} justification must be a string")
        seen_ids.add(step_id)
        nodes.append(
            ReasoningNode(
                step_id=step_id,
                kind=kind,
                statement=statement,
                dependencies=deps,
                justification=justification,
            )
        )

    dag = ReasoningDag(sample_id=sample_id, nodes=tuple(nodes))
    verified = sum(1 for n in dag.nodes if n.kind is NodeKind.VERIFIED_SINK)
    if verified > 1:
        logger.warning("%s: trace contains %d verified sinks", sample_id, verified)
    return dag


def serialize(dag: ReasoningDag) -> str:
    """Inverse of :func:`parse_trace` (round-trips valid DAGs)."""
    return json.dumps(to_dict(dag), indent=2)


def to_dict(dag: ReasoningDag) -> dict:
    return {
        "sample_id": dag.sample_id,
        "thinking": [
            {
                "step_id": n.step_id,
                "kind": n.kind.value,
                "statement": n.statement,
                "direct_dependent_steps": list(n.dependencies) if n.dependencies else None,
                "justification": n.justification,
            }
            for n in dag.nodes
        ],
    }


RULE_SOURCE_WITH_DEPS = "source-with-deps"
RULE_NON_SOURCE_WITHOUT_DEPS = "non-source-without-deps"
RULE_MISSING_CITATION = "missing-citation"
RULE_SINK_WITH_OUT_EDGES = "sink-with-out-edges"
RULE_CYCLE = "cycle"


def _has_cycle(dag: ReasoningDag) -> bool:
    # Parsed traces cannot be cyclic (deps < step_id); programmatically built
    # DAGs are still checked.
    indegree = {n.step_id: len(set(n.dependencies) & dag.step_ids) for n in dag.nodes}
    children = dag.children()
    queue = [sid for sid, deg in indegree.items() if deg == 0]
    visited = 0
    while queue:
        sid = queue.pop()
        visited += 1
        for child in children[sid]:
            indegree[child] -= 1
            if indegree[child] == 0:
                queue.append(child)
    return visited != len(dag.nodes)


def validate_structure(dag: ReasoningDag) -> ValidationReport:
    """Check every structural rule and report the violations as data.

    Rules: sources carry no dependencies, non-sources carry at least one,
    every dependency of a non-source is cited with a ``Step X`` tag, sinks
    have no outgoing edges, and the graph is acyclic.
    """
    violations: list[Violation] = []
    for node in dag.nodes:
        if node.kind is NodeKind.SOURCE:
            if node.dependencies:
                violations.append(
                    Violation(node.step_id, RULE_SOURCE_WITH_DEPS,
                              f"source step {node.step_id} lists dependencies {list(node.dependencies)}")
                )
        elif not node.dependencies:
            violations.append(
                Violation(node.step_id, RULE_NON_SOURCE_WITHOUT_DEPS,
                          f"{node.kind.value} step {node.step_id} has no dependencies")
            )
        if node.dependencies:
            cited = node.cited_steps()
            for dep in node.dependencies:
                if dep not in cited:
                    violations.append(
                        Violation(node.step_id, RULE_MISSING_CITATION,
                                  f"step {node.step_id} depends on step {dep} but its "
                                  f"justification never cites 'Step {dep}'")
                    )
        for dep in node.dependencies:
            if dep in dag.step_ids and dag.node(dep).kind.is_sink:
                violations.append(
                    Violation(dep, RULE_SINK_WITH_OUT_EDGES,
                              f"sink step {dep} is listed as a dependency of step {node.step_id}")
                )
    if _has_cycle(dag):
        violations.append(Violation(0, RULE_CYCLE, "dependency relation contains a cycle"))

    closed, dangling = is_closed(dag)
    return ValidationReport(
        structural_ok=not violations,
        violations=tuple(violations),
        dangling_nodes=tuple(sorted(dangling)),
        closed=closed,
    )


def admissible_next(dag: ReasoningDag, visited: Iterable[int]) -> frozenset[int]:
    """Nodes whose full parent set is already visited and that are unvisited.

    This is the node-level transition rule: a step becomes admissible only
    once every one of its dependencies has been established.
    """
    visited_set = frozenset(visited)
    unknown = visited_set - dag.step_ids
    if unknown:
        raise UnknownStepId(f"visited ids not in DAG: {sorted(unknown)}")
    return frozenset(
        n.step_id
        for n in dag.nodes
        if n.step_id not in visited_set and set(n.dependencies) <= visited_set
    )


def _sink_reaching(dag: ReasoningDag) -> set[int]:
    """Ids of nodes with a directed path to some sink (sinks included)."""
    children = dag.children()
    reaching = {n.step_id for n in dag.nodes if n.kind.is_sink}
    # Walk parents from the sinks: a node reaches a sink iff some child does.
    stack = [n.step_id for n in dag.nodes if n.kind.is_sink]
    parents: dict[int, list[int]] = {n.step_id: [] for n in dag.nodes}
    for parent, kids in children.items():
        for kid in kids:
            parents[kid].append(parent)
    while stack:
        sid = stack.pop()
        for parent in parents[sid]:
            if parent not in reaching:
                reaching.add(parent)
                stack.append(parent)
    return reaching


def is_closed(dag: ReasoningDag) -> tuple[bool, frozenset[int]]:
    """Logical closeness: every source/intermediate node reaches a sink.

    Returns ``(closed, dangling)`` where ``dangling`` lists the nodes with no
    directed path to any sink. A trace with no sink at all is never closed.
    """
    sinks = dag.sinks()
    reaching = _sink_reaching(dag)
    dangling = frozenset(
        n.step_id for n in dag.nodes if not n.kind.is_sink and n.step_id not in reaching
    )
    return (bool(sinks) and not dangling, dangling)


def prune(dag: ReasoningDag) -> ReasoningDag:
    """Drop every source/intermediate node with no path to a sink.

    Dependency references to pruned nodes are removed. The operation is
    idempotent, and the result is closed whenever at least one sink remains.
    """
    reaching = _sink_reaching(dag)
    kept = [n for n in dag.nodes if n.kind.is_sink or n.step_id in reaching]
    kept_ids = {n.step_id for n in kept}
    rebuilt = tuple(
        n if set(n.dependencies) <= kept_ids
        else ReasoningNode(
            step_id=n.step_id,
            kind=n.kind,
            statement=n.statement,
            dependencies=tuple(d for d in n.dependencies if d in kept_ids),
            justification=n.justification,
        )
        for n in kept
    )
    return ReasoningDag(sample_id=dag.sample_id, nodes=rebuilt)


def qualify_gold(dag: ReasoningDag) -> tuple[bool, str]:
    """Gold-standard acceptance: prune, then reject unsupported conclusions.

    A DAG is rejected when any intermediate node on a path to a verified sink
    has an empty dependency set (a conclusion without evidentiary support),
    or when the pruned graph is not closed.
    """
    pruned = prune(dag)
    verified = [n.step_id for n in pruned.nodes if n.kind is NodeKind.VERIFIED_SINK]
    # Ancestors of verified sinks, walking parent links.
    on_verified_path: set[int] = set()
    stack = list(verified)
    while stack:
        sid = stack.pop()
        for dep in pruned.node(sid).dependencies:
            if dep not in on_verified_path:
                on_verified_path.add(dep)
                stack.append(dep)
    for sid in sorted(on_verified_path):
        node = pruned.node(sid)
        if node.kind is NodeKind.INTERMEDIATE and not node.dependencies:
            return (False, f"step {sid}: intermediate node on a verified-sink path has no dependencies")
    closed, dangling = is_closed(pruned)
    if not closed:
        if not pruned.sinks():
            return (False, "no sink nodes remain after pruning")
        return (False, f"pruned graph is not closed; dangling steps {sorted(dangling)}")
    return (True, "accepted")


def topology_stats(dag: ReasoningDag) -> GraphStats:
    """Node/edge counts, density ``2|E| / (|V| (|V|-1))``, and degree maxima."""
    v = len(dag.nodes)
    e = sum(len(n.dependencies) for n in dag.nodes)
    density = (2.0 * e) / (v * (v - 1)) if v >= 2 else 0.0
    in_deg = [len(n.dependencies) for n in dag.nodes]
    out_counts: dict[int, int] = {n.step_id: 0 for n in dag.nodes}
    for node in dag.nodes:
        for dep in node.dependencies:
            if dep in out_counts:
                out_counts[dep] += 1
    return GraphStats(
        node_count=v,
        edge_count=e,
        density=density,
        max_in_degree=max(in_deg, default=0),
        max_out_degree=max(out_counts.values(), default=0),
    )


def linearize(dag: ReasoningDag) -> tuple[int, ...]:
    """Deterministic admissibility-respecting order (ties by ascending id)."""
    import heapq

    indegree = {n.step_id: len(set(n.dependencies) & dag.step_ids) for n in dag.nodes}
    children = dag.children()
    heap = [sid for sid, deg in indegree.items() if deg == 0]
    heapq.heapify(heap)
    order: list[int] = []
    while heap:
        sid = heapq.heappop(heap)
        order.append(sid)
        for child in children[sid]:
            indegree[child] -= 1
            if indegree[child] == 0:
                heapq.heappush(heap, child)
    if len(order) != len(dag.nodes):
        raise CycleDetected(f"{dag.sample_id}: dependency relation is cyclic")
    return tuple(order)


def render_text(dag: ReasoningDag) -> str:
    """Flat human-readable rendering used for judge prompts and review."""
    lines = []
    for node in dag.nodes:
        deps = f" (from steps {', '.join(map(str, node.dependencies))})" if node.dependencies else ""
        lines.append(f"Step {node.step_id} [{node.kind.value}]{deps}: {node.statement}")
        if node.justification:
            lines.append(f"  Justification: {node.justification}")
    return "\n".join(lines)
