"""Self-hosted task service: serves assessment tasks and records responses.

State lives in two append-only line-delimited JSON files (tasks and
responses); replaying the response log reconstructs the service state
exactly. Submissions are validated and persisted under one lock so valid
counts can never double-count a (task, user) pair.
"""

from __future__ import annotations

import json
import threading
import time
from pathlib import Path
from typing import Iterable, Iterator

from fastapi import FastAPI, HTTPException, Response
from pydantic import BaseModel, Field

from .experiment import (
    AssessmentTask,
    UserResponse,
    ValidationResult,
    validate_response,
)

DEFAULT_TARGET_RESPONSES = 10
DEFAULT_MIN_SECONDS = 20.0


class TaskStore:
    """Immutable set of assembled tasks, loaded from a tasks JSONL file."""

    def __init__(self, tasks: Iterable[AssessmentTask]):
        self.tasks: list[AssessmentTask] = list(tasks)
        self.by_id = {t.task_id: t for t in self.tasks}
        if len(self.by_id) != len(self.tasks):
            raise ValueError("duplicate task ids")

    @classmethod
    def load(cls, path: str | Path) -> "TaskStore":
        tasks = []
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    tasks.append(AssessmentTask.from_json(json.loads(line)))
        return cls(tasks)

    @staticmethod
    def save(path: str | Path, tasks: Iterable[AssessmentTask]) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            for task in tasks:
                fh.write(json.dumps(task.to_json(), ensure_ascii=False) + "\n")

    def get(self, task_id: str) -> AssessmentTask | None:
        return self.by_id.get(task_id)


class ResponseStore:
    """Append-only response log with in-memory counts.

    Every record carries its validation outcome, so reopening the file
    restores the exact service state.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.lock = threading.Lock()
        self.records: list[dict] = []
        self.seen: set[tuple[str, str]] = set()
        self.valid_counts: dict[str, int] = {}
        self.total_counts: dict[str, int] = {}
        if self.path.exists():
            with open(self.path, "r", encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        self._absorb(json.loads(line))

    def _absorb(self, rec: dict) -> None:
        key = (rec["task_id"], rec["user_id"])
        self.records.append(rec)
        self.seen.add(key)
        self.total_counts[rec["task_id"]] = self.total_counts.get(rec["task_id"], 0) + 1
        if rec["valid"]:
            self.valid_counts[rec["task_id"]] = self.valid_counts.get(rec["task_id"], 0) + 1

    def has(self, task_id: str, user_id: str) -> bool:
        return (task_id, user_id) in self.seen

    def valid_count(self, task_id: str) -> int:
        return self.valid_counts.get(task_id, 0)

    def total_count(self, task_id: str) -> int:
        return self.total_counts.get(task_id, 0)

    def append(self, response: UserResponse, result: ValidationResult) -> dict:
        """Persist one response; caller must hold the duplicate check and
        this append under self.lock."""
        rec = {
            "task_id": response.task_id,
            "user_id": response.user_id,
            "ranking": list(response.ranking),
            "understood": response.understood,
            "comment": response.comment,
            "salient_terms": list(response.salient_terms),
            "duration_seconds": response.duration_seconds,
            "valid": result.valid,
            "reasons": list(result.reasons),
            "submitted_at": time.time(),
        }
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
        self._absorb(rec)
        return rec

    def iter_records(self) -> Iterator[dict]:
        return iter(list(self.records))


class ResponseBody(BaseModel):
    task_id: str
    user_id: str = Field(min_length=1)
    ranking: list[str]
    understood: bool
    salient_terms: list[str]
    duration_seconds: float = Field(ge=0)
    comment: str = ""

    def to_response(self) -> UserResponse:
        return UserResponse(task_id=self.task_id, user_id=self.user_id,
                            ranking=list(self.ranking), understood=self.understood,
                            salient_terms=list(self.salient_terms),
                            duration_seconds=self.duration_seconds,
                            comment=self.comment)


def create_app(task_store: TaskStore, response_store: ResponseStore,
               min_seconds: float = DEFAULT_MIN_SECONDS,
               target_responses: int = DEFAULT_TARGET_RESPONSES) -> FastAPI:
    """HTTP+JSON API over the stores.

    GET /api/task?user=<id>  next task for the user (204 when none left)
    POST /api/response       validated, persisted, idempotent per (task, user)
    GET /api/progress        per-task valid/total counts
    """
    app = FastAPI(title="synthdoc assessment service")

    @app.get("/api/task")
    def next_task(user: str):
        candidates = [
            (response_store.valid_count(t.task_id), k, t)
            for k, t in enumerate(task_store.tasks)
            if not response_store.has(t.task_id, user)
            and response_store.valid_count(t.task_id) < target_responses
        ]
        if not candidates:
            return Response(status_code=204)
        _, _, task = min(candidates, key=lambda c: (c[0], c[1]))
        return task.payload()

    @app.post("/api/response")
    def submit(body: ResponseBody):
        task = task_store.get(body.task_id)
        if task is None:
            raise HTTPException(status_code=404, detail="unknown task_id")
        response = body.to_response()
        with response_store.lock:
            if response_store.has(body.task_id, body.user_id):
                raise HTTPException(
                    status_code=409,
                    detail="response already recorded for this task and user")
            result = validate_response(task, response, min_seconds=min_seconds)
            response_store.append(response, result)
        return {"accepted": True, "valid": result.valid, "reasons": result.reasons}

    @app.get("/api/progress")
    def progress():
        rows = []
        done = 0
        for task in task_store.tasks:
            valid = response_store.valid_count(task.task_id)
            complete = valid >= target_responses
            done += int(complete)
            rows.append({"task_id": task.task_id,
                         "query_id": task.query_id,
                         "valid_responses": valid,
                         "total_responses": response_store.total_count(task.task_id),
                         "done": complete})
        return {"target_responses": target_responses,
                "total_tasks": len(task_store.tasks),
                "completed_tasks": done,
                "tasks": rows}

    return app
