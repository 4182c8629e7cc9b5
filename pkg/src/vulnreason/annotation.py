"""Annotation review service: task store, state machine, and HTTP API.

Human annotators review judge-flagged reasoning traces, assign error codes,
and correct judge verdicts. Two independent labels that agree resolve a task;
disagreement parks it in a conflict state until an adjudication merges the
codes. Every write is attributable, versioned, and persisted to an
append-only event log that is replayed on boot.
"""

from __future__ import annotations

import base64
import hashlib
import hmac
import json
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .metrics import CODEBOOK, CODEBOOK_ORDER, ErrorLabelSet, error_heatmap, heatmap_csv

STATES = ("unlabeled", "labeled", "conflict", "resolved")


class StoreError(Exception):
    def __init__(self, status: int, detail: str):
        super().__init__(detail)
        self.status = status
        self.detail = detail


@dataclass
class AnnotationLabel:
    annotator_id: str
    codes: tuple[str, ...]
    corrected_verdict: str | None
    note: str
    timestamp: float

    def to_dict(self) -> dict:
        return {
            "annotator_id": self.annotator_id,
            "codes": list(self.codes),
            "corrected_verdict": self.corrected_verdict,
            "note": self.note,
            "timestamp": self.timestamp,
        }


@dataclass
class AnnotationTask:
    task_id: str
    sample_id: str
    model_name: str
    trace: object  # free text or a DAG trace document
    judge_verdict: str
    ground_truth: dict
    state: str = "unlabeled"
    version: int = 0
    labels: list[AnnotationLabel] = field(default_factory=list)
    adjudication: dict | None = None

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "sample_id": self.sample_id,
            "model_name": self.model_name,
            "trace": self.trace,
            "judge_verdict": self.judge_verdict,
            "ground_truth": self.ground_truth,
            "state": self.state,
            "version": self.version,
            "labels": [label.to_dict() for label in self.labels],
            "adjudication": self.adjudication,
        }

    def effective_codes(self) -> tuple[str, ...] | None:
        """Final code set for exports: adjudicated, agreed, or sole label.
        Unresolved conflicts have no final labels."""
        if self.adjudication:
            return tuple(self.adjudication["merged_codes"])
        if self.state == "conflict":
            return None
        if self.labels:
            return self.labels[0].codes
        return None


def _canonical_codes(codes) -> tuple[str, ...]:
    label_set = ErrorLabelSet(frozenset(codes))
    return label_set.ordered()


class TaskStore:
    """Materialized task state backed by an append-only JSONL event log."""

    def __init__(self, data_dir: str | Path | None = None):
        self.data_dir = Path(data_dir) if data_dir else None
        self.tasks: dict[str, AnnotationTask] = {}
        self._lock = threading.Lock()
        if self.data_dir:
            self.data_dir.mkdir(parents=True, exist_ok=True)
            self._replay()

    @property
    def _log_path(self) -> Optional[Path]:
        return self.data_dir / "events.jsonl" if self.data_dir else None

    def _replay(self) -> None:
        log = self._log_path
        if not log or not log.exists():
            return
        with open(log, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    self._apply(json.loads(line), persist=False)

    def _append_event(self, event: dict) -> None:
        log = self._log_path
        if not log:
            return
        with open(log, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(event, sort_keys=True) + "\n")
            fh.flush()

    # -- event application --------------------------------------------------

    def _apply(self, event: dict, persist: bool = True) -> AnnotationTask:
        kind = event["event"]
        if kind == "task_created":
            task = self._apply_create(event)
        elif kind == "label":
            task = self._apply_label(event)
        elif kind == "adjudication":
            task = self._apply_adjudication(event)
        else:
            raise StoreError(400, f"unknown event kind {kind!r}")
        if persist:
            self._append_event(event)
        return task

    def _apply_create(self, event: dict) -> AnnotationTask:
        doc = event["task"]
        task_id = doc["task_id"]
        if task_id in self.tasks:
            raise StoreError(409, f"task {task_id} already exists")
        task = AnnotationTask(
            task_id=task_id,
            sample_id=doc.get("sample_id", ""),
            model_name=doc.get("model_name", ""),
            trace=doc.get("trace", ""),
            judge_verdict=doc.get("judge_verdict", "MISMATCH"),
            ground_truth=doc.get("ground_truth", {}),
        )
        self.tasks[task_id] = task
        return task

    def _apply_label(self, event: dict) -> AnnotationTask:
        task = self._get(event["task_id"])
        payload = event["label"]
        label = AnnotationLabel(
            annotator_id=payload["annotator_id"],
            codes=_canonical_codes(payload["codes"]),
            corrected_verdict=payload.get("corrected_verdict"),
            note=payload.get("note", ""),
            timestamp=payload.get("timestamp", 0.0),
        )
        if task.state not in ("unlabeled", "labeled"):
            raise StoreError(409, f"task {task.task_id} is {task.state}; no further labels")
        if any(existing.annotator_id == label.annotator_id for existing in task.labels):
            raise StoreError(403, f"{label.annotator_id} already labeled task {task.task_id}")
        task.labels.append(label)
        if len(task.labels) == 1:
            task.state = "labeled"
        else:
            first = task.labels[0]
            agreed = (
                set(first.codes) == set(label.codes)
                and first.corrected_verdict == label.corrected_verdict
            )
            task.state = "resolved" if agreed else "conflict"
        task.version += 1
        return task

    def _apply_adjudication(self, event: dict) -> AnnotationTask:
        task = self._get(event["task_id"])
        record = event["record"]
        if task.state != "conflict":
            raise StoreError(409, f"task {task.task_id} is {task.state}, not conflict")
        task.adjudication = {
            "task_id": task.task_id,
            "participants": sorted({label.annotator_id for label in task.labels}),
            "merged_codes": list(_canonical_codes(record["merged_codes"])),
            "resolution_note": record.get("resolution_note", ""),
        }
        task.state = "resolved"
        task.version += 1
        return task

    # -- public operations ----------------------------------------------------

    def _get(self, task_id: str) -> AnnotationTask:
        try:
            return self.tasks[task_id]
        except KeyError:
            raise StoreError(404, f"no task {task_id}") from None

    def create_task(self, doc: dict) -> AnnotationTask:
        with self._lock:
            return self._apply({"event": "task_created", "task": doc})

    def get_task(self, task_id: str) -> AnnotationTask:
        with self._lock:
            return self._get(task_id)

    def list_tasks(
        self,
        state: str | None = None,
        model: str | None = None,
        annotator: str | None = None,
        page: int = 1,
        page_size: int = 50,
    ) -> tuple[list[AnnotationTask], int]:
        if state is not None and state not in STATES:
            raise StoreError(400, f"unknown state filter {state!r}")
        if page < 1 or page_size < 1:
            raise StoreError(400, "page and page_size must be positive")
        with self._lock:
            tasks = sorted(self.tasks.values(), key=lambda t: t.task_id)
        if state:
            tasks = [t for t in tasks if t.state == state]
        if model:
            tasks = [t for t in tasks if t.model_name == model]
        if annotator:
            tasks = [t for t in tasks if any(l.annotator_id == annotator for l in t.labels)]
        total = len(tasks)
        start = (page - 1) * page_size
        return tasks[start : start + page_size], total

    def submit_label(
        self,
        task_id: str,
        annotator_id: str,
        codes,
        expected_version: int,
        corrected_verdict: str | None = None,
        note: str = "",
    ) -> AnnotationTask:
        if corrected_verdict not in (None, "MATCH", "MISMATCH"):
            raise StoreError(400, f"corrected_verdict must be MATCH/MISMATCH, got {corrected_verdict!r}")
        try:
            canonical = _canonical_codes(codes)
        except (ValueError, KeyError) as exc:
            raise StoreError(400, str(exc)) from exc
        with self._lock:
            task = self._get(task_id)
            if task.version != expected_version:
                raise StoreError(
                    409, f"version mismatch: expected {expected_version}, have {task.version}"
                )
            return self._apply({
                "event": "label",
                "task_id": task_id,
                "label": {
                    "annotator_id": annotator_id,
                    "codes": list(canonical),
                    "corrected_verdict": corrected_verdict,
                    "note": note,
                    "timestamp": time.time(),
                },
            })

    def adjudicate(
        self,
        task_id: str,
        merged_codes,
        resolution_note: str,
        expected_version: int,
    ) -> AnnotationTask:
        try:
            canonical = _canonical_codes(merged_codes)
        except (ValueError, KeyError) as exc:
            raise StoreError(400, str(exc)) from exc
        with self._lock:
            task = self._get(task_id)
            if task.version != expected_version:
                raise StoreError(
                    409, f"version mismatch: expected {expected_version}, have {task.version}"
                )
            return self._apply({
                "event": "adjudication",
                "task_id": task_id,
                "record": {
                    "merged_codes": list(canonical),
                    "resolution_note": resolution_note,
                },
            })

    # -- export / import ------------------------------------------------------

    def export_jsonl(self) -> str:
        """Byte-stable dump: code counts line, then one task per line."""
        with self._lock:
            tasks = sorted(self.tasks.values(), key=lambda t: t.task_id)
            counts = {code: 0 for code in CODEBOOK_ORDER}
            for task in tasks:
                final = task.effective_codes()
                if final:
                    for code in final:
                        counts[code] += 1
            lines = [json.dumps({"code_counts": counts}, sort_keys=True)]
            lines.extend(json.dumps(task.to_dict(), sort_keys=True) for task in tasks)
            return "\n".join(lines) + "\n"

    def export_heatmap_csv(self) -> str:
        """Heatmap CSV over final labels, identical to the metrics surface."""
        with self._lock:
            labels = {}
            for task in sorted(self.tasks.values(), key=lambda t: t.task_id):
                final = task.effective_codes()
                if final:
                    labels[task.task_id] = (task.model_name, ErrorLabelSet(frozenset(final)))
        return heatmap_csv(error_heatmap(labels))

    @classmethod
    def import_jsonl(cls, payload: str, data_dir: str | Path | None = None) -> "TaskStore":
        """Rebuild a store from an export; original timestamps are preserved
        so export-import round-trips are lossless."""
        store = cls(data_dir)
        for line in payload.splitlines():
            line = line.strip()
            if not line:
                continue
            doc = json.loads(line)
            if "code_counts" in doc:
                continue
            with store._lock:
                store._apply({"event": "task_created", "task": doc})
                for label in doc.get("labels", []):
                    store._apply({"event": "label", "task_id": doc["task_id"], "label": label})
                if doc.get("adjudication"):
                    store._apply({
                        "event": "adjudication",
                        "task_id": doc["task_id"],
                        "record": doc["adjudication"],
                    })
        return store


# ---------------------------------------------------------------------------
# Signed session tokens


@dataclass(frozen=True)
class Roster:
    annotators: tuple[str, ...]
    secret: str

    @classmethod
    def from_dict(cls, doc: dict) -> "Roster":
        return cls(annotators=tuple(doc.get("annotators", ())), secret=doc.get("secret", ""))


def issue_token(roster: Roster, annotator_id: str) -> str:
    if annotator_id not in roster.annotators:
        raise StoreError(403, f"{annotator_id!r} is not on the annotator roster")
    payload = base64.urlsafe_b64encode(annotator_id.encode("utf-8")).decode("ascii")
    signature = hmac.new(
        roster.secret.encode("utf-8"), payload.encode("ascii"), hashlib.sha256
    ).hexdigest()[:32]
    return f"{payload}.{signature}"


def verify_token(roster: Roster, token: str) -> str:
    try:
        payload, signature = token.split(".", 1)
        expected = hmac.new(
            roster.secret.encode("utf-8"), payload.encode("ascii"), hashlib.sha256
        ).hexdigest()[:32]
        if not hmac.compare_digest(signature, expected):
            raise ValueError("bad signature")
        annotator_id = base64.urlsafe_b64decode(payload.encode("ascii")).decode("utf-8")
    except Exception:
        raise StoreError(401, "invalid session token") from None
    if annotator_id not in roster.annotators:
        raise StoreError(403, f"{annotator_id!r} is not on the annotator roster")
    return annotator_id


# ---------------------------------------------------------------------------
# HTTP API


def create_app(store: TaskStore, roster: Roster, static_dir: str | Path | None = None):
    from fastapi import Body, FastAPI, Header, HTTPException, Query, Response

    app = FastAPI(title="vulnreason annotation service")

    def identity(authorization: str | None) -> str:
        if not authorization or not authorization.startswith("Bearer "):
            raise HTTPException(status_code=401, detail="missing bearer token")
        try:
            return verify_token(roster, authorization[len("Bearer "):])
        except StoreError as exc:
            raise HTTPException(status_code=exc.status, detail=exc.detail)

    @app.post("/api/v1/session")
    def session(body: dict = Body(...)):
        try:
            token = issue_token(roster, str(body.get("annotator_id", "")))
        except StoreError as exc:
            raise HTTPException(status_code=exc.status, detail=exc.detail)
        return {"token": token, "annotator_id": body.get("annotator_id")}

    @app.get("/api/v1/codebook")
    def codebook():
        return {
            "order": list(CODEBOOK_ORDER),
            "codes": {
                code: {"category": cat, "name": name, "description": desc}
                for code, (cat, name, desc) in CODEBOOK.items()
            },
        }

    @app.get("/api/v1/tasks")
    def list_tasks(
        state: str | None = Query(default=None),
        model: str | None = Query(default=None),
        annotator: str | None = Query(default=None),
        page: int = Query(default=1),
        page_size: int = Query(default=50),
    ):
        try:
            tasks, total = store.list_tasks(state, model, annotator, page, page_size)
        except StoreError as exc:
            raise HTTPException(status_code=exc.status, detail=exc.detail)
        return {"tasks": [t.to_dict() for t in tasks], "total": total, "page": page}

    @app.get("/api/v1/tasks/{task_id}")
    def get_task(task_id: str):
        try:
            return store.get_task(task_id).to_dict()
        except StoreError as exc:
            raise HTTPException(status_code=exc.status, detail=exc.detail)

    @app.post("/api/v1/tasks", status_code=201)
    def create_task(body: dict = Body(...), authorization: str | None = Header(default=None)):
        identity(authorization)
        try:
            return store.create_task(body).to_dict()
        except StoreError as exc:
            raise HTTPException(status_code=exc.status, detail=exc.detail)

    @app.post("/api/v1/tasks/{task_id}/labels")
    def submit_label(
        task_id: str,
        body: dict = Body(...),
        authorization: str | None = Header(default=None),
    ):
        annotator_id = identity(authorization)
        if "expected_version" not in body:
            raise HTTPException(status_code=400, detail="expected_version is required")
        try:
            task = store.submit_label(
                task_id,
                annotator_id,
                body.get("codes", []),
                expected_version=int(body["expected_version"]),
                corrected_verdict=body.get("corrected_verdict"),
                note=body.get("note", ""),
            )
        except StoreError as exc:
            raise HTTPException(status_code=exc.status, detail=exc.detail)
        return task.to_dict()

    @app.post("/api/v1/tasks/{task_id}/adjudicate")
    def adjudicate(
        task_id: str,
        body: dict = Body(...),
        authorization: str | None = Header(default=None),
    ):
        identity(authorization)
        if "expected_version" not in body:
            raise HTTPException(status_code=400, detail="expected_version is required")
        try:
            task = store.adjudicate(
                task_id,
                body.get("merged_codes", []),
                body.get("resolution_note", ""),
                expected_version=int(body["expected_version"]),
            )
        except StoreError as exc:
            raise HTTPException(status_code=exc.status, detail=exc.detail)
        return task.to_dict()

    @app.get("/api/v1/export")
    def export(format: str = Query(default="jsonl")):
        if format == "jsonl":
            return Response(content=store.export_jsonl(), media_type="application/jsonl")
        if format == "csv":
            return Response(content=store.export_heatmap_csv(), media_type="text/csv")
        raise HTTPException(status_code=400, detail=f"unknown export format {format!r}")

    if static_dir and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="static")

    return app
