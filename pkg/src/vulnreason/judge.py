"""Uniform client over external LLM judges, with a deterministic mock backend.

Every judge-dependent operation in the toolkit goes through a
:class:`JudgeHandle`, so swapping the remote backend for a rule-table mock
turns the whole pipeline into a pure function for testing.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Protocol, Sequence

from .metrics import CODEBOOK_ORDER, ErrorLabelSet

logger = logging.getLogger(__name__)


class JudgeError(RuntimeError):
    pass


class JudgeUnavailable(JudgeError):
    """Transport kept failing after the configured number of retries."""


class UnparseableVerdict(JudgeError):
    """The judge reply never contained the constrained verdict line."""

    def __init__(self, message: str, raw: str):
        super().__init__(message)
        self.raw = raw


class NoValidLabels(JudgeError):
    """An error-classification reply contained no codebook code."""


class TransportError(JudgeError):
    """One failed round trip; retried by the handle."""


class Transport(Protocol):
    def send(self, prompt: str) -> str: ...


@dataclass(frozen=True)
class MockBackend:
    """Deterministic rule-table backend: first matching pattern wins.

    Rules are ``(regex, reply)`` pairs matched with ``re.search`` against the
    prompt; an ``input_sha256`` rule matches the hash of the full prompt.
    """

    rules: tuple[tuple[str, str], ...] = ()
    hash_rules: tuple[tuple[str, str], ...] = ()
    default_reply: str = "VERDICT: MISMATCH"

    def send(self, prompt: str) -> str:
        digest = hashlib.sha256(prompt.encode("utf-8")).hexdigest()
        for wanted, reply in self.hash_rules:
            if digest == wanted:
                return reply
        for pattern, reply in self.rules:
            if re.search(pattern, prompt, re.DOTALL):
                return reply
        return self.default_reply

    @classmethod
    def from_file(cls, path: str | Path) -> "MockBackend":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        rules = []
        hash_rules = []
        for rule in doc.get("rules", []):
            if "pattern" in rule:
                rules.append((rule["pattern"], rule["reply"]))
            elif "input_sha256" in rule:
                hash_rules.append((rule["input_sha256"], rule["reply"]))
        return cls(
            rules=tuple(rules),
            hash_rules=tuple(hash_rules),
            default_reply=doc.get("default", "VERDICT: MISMATCH"),
        )


@dataclass(frozen=True)
class RemoteBackend:
    """Chat-completion style HTTP backend; credentials come from the environment."""

    endpoint: str
    model: str
    api_key_env: str = "VULNREASON_API_KEY"
    timeout: float = 60.0

    def send(self, prompt: str) -> str:
        import os

        import requests

        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.api_key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        body = {"model": self.model, "messages": [{"role": "user", "content": prompt}]}
        redacted = {k: ("<redacted>" if k.lower() == "authorization" else v)
                    for k, v in headers.items()}
        logger.debug("judge request to %s headers=%s body=%s",
                     self.endpoint, redacted, json.dumps(body)[:2000])
        try:
            response = requests.post(self.endpoint, json=body, headers=headers, timeout=self.timeout)
            logger.debug("judge response %d body=%s", response.status_code, response.text[:2000])
            response.raise_for_status()
            payload = response.json()
            return payload["choices"][0]["message"]["content"]
        except Exception as exc:
            raise TransportError(f"judge call failed: {exc}") from exc


@dataclass
class JudgeHandle:
    """A judge backend plus its retry policy.

    Retries cover both transport failures and replies missing the constrained
    verdict line; backoff doubles per attempt.
    """

    backend: Transport
    timeout: float = 60.0
    retries: int = 3
    backoff: float = 0.5

    def complete(self, prompt: str) -> str:
        last: Exception | None = None
        for attempt in range(self.retries):
            try:
                return self.backend.send(prompt)
            except TransportError as exc:
                last = exc
                if attempt + 1 < self.retries and self.backoff > 0:
                    time.sleep(self.backoff * (2 ** attempt))
        raise JudgeUnavailable(f"judge unavailable after {self.retries} attempts: {last}")

    def complete_parsed(self, prompt: str, parser):
        """Retry loop shared by verdict-style calls: transport failures and
        unparseable replies both consume attempts."""
        last: Exception | None = None
        for attempt in range(self.retries):
            try:
                reply = self.backend.send(prompt)
            except TransportError as exc:
                last = exc
            else:
                try:
                    return parser(reply)
                except UnparseableVerdict as exc:
                    last = exc
            if attempt + 1 < self.retries and self.backoff > 0:
                time.sleep(self.backoff * (2 ** attempt))
        if isinstance(last, UnparseableVerdict):
            raise last
        raise JudgeUnavailable(f"judge unavailable after {self.retries} attempts: {last}")


def mock_handle(rules: Sequence[tuple[str, str]] = (), default: str = "VERDICT: MISMATCH") -> JudgeHandle:
    return JudgeHandle(backend=MockBackend(rules=tuple(rules), default_reply=default), backoff=0.0)


def handle_from_config(config: dict) -> JudgeHandle:
    backend_kind = config.get("backend", "mock")
    if backend_kind == "mock":
        rules = tuple((r["pattern"], r["reply"]) for r in config.get("rules", []) if "pattern" in r)
        hash_rules = tuple((r["input_sha256"], r["reply"]) for r in config.get("rules", []) if "input_sha256" in r)
        backend: Transport = MockBackend(
            rules=rules, hash_rules=hash_rules,
            default_reply=config.get("default", "VERDICT: MISMATCH"),
        )
    elif backend_kind == "remote":
        backend = RemoteBackend(
            endpoint=config["endpoint"],
            model=config.get("model", ""),
            api_key_env=config.get("api_key_env", "VULNREASON_API_KEY"),
            timeout=float(config.get("timeout", 60.0)),
        )
    else:
        raise ValueError(f"unknown judge backend {backend_kind!r}")
    return JudgeHandle(
        backend=backend,
        timeout=float(config.get("timeout", 60.0)),
        retries=int(config.get("retries", 3)),
        backoff=float(config.get("backoff", 0.5)),
    )


def load_handle(path: str | Path) -> JudgeHandle:
    return handle_from_config(json.loads(Path(path).read_text(encoding="utf-8")))


# ---------------------------------------------------------------------------
# Prompt assets

def prompt_text(name: str) -> str:
    return resources.files("vulnreason.prompts").joinpath(f"{name}.txt").read_text(encoding="utf-8")


def prompt_fingerprint(name: str) -> str:
    """Short digest of a prompt asset, recorded in result provenance."""
    return hashlib.sha256(prompt_text(name).encode("utf-8")).hexdigest()[:12]


# ---------------------------------------------------------------------------
# Verdict operations

@dataclass(frozen=True)
class JudgeVerdict:
    match: str  # "MATCH" | "MISMATCH"
    rationale: str
    raw: str

    @property
    def is_match(self) -> bool:
        return self.match == "MATCH"


VERDICT_LINE = re.compile(r"VERDICT:\s*(MATCH|MISMATCH)", re.IGNORECASE)
EQUIVALENCE_LINE = re.compile(r"VERDICT:\s*(EQUIVALENT|DIFFERENT)", re.IGNORECASE)


def _parse_match_verdict(reply: str) -> JudgeVerdict:
    matches = list(VERDICT_LINE.finditer(reply))
    if not matches:
        raise UnparseableVerdict("reply has no 'VERDICT: MATCH|MISMATCH' line", raw=reply)
    last = matches[-1]
    return JudgeVerdict(
        match=last.group(1).upper(),
        rationale=reply[: last.start()].strip(),
        raw=reply,
    )


def judge_match(reasoning: str, ground_truth, handle: JudgeHandle) -> JudgeVerdict:
    """Ask whether a reasoning text is semantically consistent with the
    ground-truth report; returns the constrained MATCH/MISMATCH verdict."""
    prompt = prompt_text("judge_match").format(
        reasoning=reasoning,
        root_cause=getattr(ground_truth, "root_cause", str(ground_truth)),
        fixing_pattern=getattr(ground_truth, "fixing_pattern", ""),
    )
    return handle.complete_parsed(prompt, _parse_match_verdict)


INTEGER = re.compile(r"-?\d+")


def judge_confidence(report_draft: str, handle: JudgeHandle) -> int:
    """Confidence score in 1..5; out-of-range replies clamp with a warning."""

    def parse(reply: str) -> int:
        found = INTEGER.search(reply)
        if not found:
            raise UnparseableVerdict("reply contains no integer confidence", raw=reply)
        return int(found.group())

    prompt = prompt_text("judge_confidence").format(report=report_draft)
    value = handle.complete_parsed(prompt, parse)
    if not 1 <= value <= 5:
        clamped = min(5, max(1, value))
        logger.warning("confidence reply %d outside 1..5; clamped to %d", value, clamped)
        return clamped
    return value


def majority_equivalence(original: str, perturbed: str, handles: Sequence[JudgeHandle]) -> tuple[bool, tuple[str, ...]]:
    """2-of-3 semantic-equivalence vote; failures and abstentions count as 'no'."""
    if len(handles) != 3:
        raise ValueError(f"majority_equivalence requires exactly 3 handles, got {len(handles)}")
    template = prompt_text("judge_equivalence")
    votes: list[str] = []
    for handle in handles:
        prompt = template.format(original=original, perturbed=perturbed)
        try:
            reply = handle.complete(prompt)
        except JudgeUnavailable:
            votes.append("error")
            continue
        found = list(EQUIVALENCE_LINE.finditer(reply))
        if not found:
            votes.append("error")
        elif found[-1].group(1).upper() == "EQUIVALENT":
            votes.append("yes")
        else:
            votes.append("no")
    return (votes.count("yes") >= 2, tuple(votes))


CODE_TOKEN = re.compile(r"\b(FE|[A-Z]{2}\d)\b")


def classify_errors(trace: str, handle: JudgeHandle) -> ErrorLabelSet:
    """Classify a reasoning trace against the 12-code error codebook,
    keeping at most the first four valid codes from the reply."""
    prompt = prompt_text("classify_errors").format(trace=trace)
    reply = handle.complete(prompt)
    codes: list[str] = []
    for token in CODE_TOKEN.findall(reply):
        if token not in CODEBOOK_ORDER:
            logger.warning("classifier reply mentions unknown code %r; dropped", token)
            continue
        if token not in codes:
            codes.append(token)
        if len(codes) == 4:
            break
    if not codes:
        raise NoValidLabels(f"no codebook codes in reply: {reply[:200]!r}")
    return ErrorLabelSet(frozenset(codes))
