"""Blind human-evaluation service.

Review items are built from persisted run logs with every pipeline- and
model-identifying field stripped; the token-to-run mapping lives only in
server memory.  Evaluators authenticate with one shared token, get items in
a per-session shuffled order under a lease, and submit five-criteria
verdicts that are appended to the originating run directory's
``verdicts.jsonl`` — the same file metric computation reads.

Verdicts are append-only: a correction (``supersede: true``) appends a
superseding record, and metrics apply last-write-wins.
"""

from __future__ import annotations

import hashlib
import json
import random
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence, Union

from fastapi import FastAPI, Header, Request
from fastapi.responses import FileResponse, JSONResponse
from fastapi.staticfiles import StaticFiles

from .bench.metrics import CRITERION_FIELDS
from .bench.runner import load_run_dir
from .errors import EmptyLogsError

DEFAULT_LEASE_SECONDS = 120.0
DESIGNATED_REPEAT = 1

# The only step fields an evaluator may see: uniform across pipelines.
_VISIBLE_STEP_FIELDS = ("method", "path", "body", "status", "response")


def _isoformat_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class EvalItem:
    """One run awaiting review, with its server-side provenance."""

    token: str
    run_dir: Path
    query_id: str
    repeat: int
    query_text: str
    steps: list[dict]
    software_pass: bool
    graded: bool = False
    lease_session: Optional[str] = None
    lease_expires: float = 0.0

    def payload(self) -> dict:
        """The client-visible view: no pipeline, no model, no file paths."""
        return {
            "token": self.token,
            "query": self.query_text,
            "software_pass": self.software_pass,
            "steps": [
                {name: step.get(name) for name in _VISIBLE_STEP_FIELDS}
                for step in self.steps
            ],
        }

    def lease_active(self, now: float) -> bool:
        return self.lease_session is not None and self.lease_expires > now


def _item_token(seed: str, dir_index: int, query_id: str, repeat: int) -> str:
    raw = f"{seed}:{dir_index}:{query_id}:{repeat}".encode("utf-8")
    return hashlib.sha256(raw).hexdigest()[:16]


def blind_shuffle(
    run_dirs: Sequence[Union[str, Path]],
    seed: str,
    passing_only: bool = False,
    lease_seconds: float = DEFAULT_LEASE_SECONDS,
) -> "EvalQueue":
    """Build an anonymized evaluation queue from persisted run logs.

    Each run directory contributes its designated (first-repeat) runs.
    Already-stored verdicts mark items as graded, so grading can resume.
    """
    items: list[EvalItem] = []
    for dir_index, run_dir in enumerate(run_dirs):
        run_dir = Path(run_dir)
        matrix = load_run_dir(run_dir)
        graded_runs = _graded_runs(run_dir)
        for query_id in matrix.query_ids:
            cell = matrix.cell(query_id, DESIGNATED_REPEAT)
            if passing_only and not cell.passed:
                continue
            items.append(
                EvalItem(
                    token=_item_token(seed, dir_index, query_id, DESIGNATED_REPEAT),
                    run_dir=run_dir,
                    query_id=query_id,
                    repeat=DESIGNATED_REPEAT,
                    query_text=matrix.query_meta[query_id].get("text", ""),
                    steps=[dict(step) for step in cell.steps],
                    software_pass=cell.passed,
                    graded=(query_id, DESIGNATED_REPEAT) in graded_runs,
                )
            )
    if not items:
        raise EmptyLogsError("no designated runs found in the given run logs")
    return EvalQueue(items, lease_seconds=lease_seconds)


def _graded_runs(run_dir: Path) -> set[tuple[str, int]]:
    path = run_dir / "verdicts.jsonl"
    graded: set[tuple[str, int]] = set()
    if path.is_file():
        for line in path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            doc = json.loads(line)
            graded.add((doc["query_id"], int(doc.get("repeat", DESIGNATED_REPEAT))))
    return graded


@dataclass
class EvalQueue:
    """Leased, per-session-shuffled queue over anonymized review items."""

    items: list[EvalItem]
    lease_seconds: float = DEFAULT_LEASE_SECONDS
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def __post_init__(self):
        self._by_token = {item.token: item for item in self.items}
        if len(self._by_token) != len(self.items):
            raise ValueError("duplicate item tokens in queue")

    # -- ordering ----------------------------------------------------------

    def order_for(self, session: str) -> list[EvalItem]:
        """The queue in this session's private shuffled order."""
        tokens = sorted(self._by_token)
        seed = hashlib.sha256(f"order:{session}".encode("utf-8")).digest()
        random.Random(seed).shuffle(tokens)
        return [self._by_token[token] for token in tokens]

    # -- queue operations --------------------------------------------------

    def next_for(self, session: str, now: Optional[float] = None):
        """Reserve the session's next ungraded item.

        Returns ("item", payload), ("done", None) when everything is graded,
        or ("pending", None) when the only ungraded items are leased to
        other sessions.
        """
        now = time.monotonic() if now is None else now
        with self._lock:
            blocked = False
            for item in self.order_for(session):
                if item.graded:
                    continue
                if item.lease_active(now) and item.lease_session != session:
                    blocked = True
                    continue
                item.lease_session = session
                item.lease_expires = now + self.lease_seconds
                return "item", item.payload()
            return ("pending", None) if blocked else ("done", None)

    def submit(
        self,
        session: str,
        token: str,
        criteria: dict,
        evaluator_id: str = "",
        supersede: bool = False,
        now: Optional[float] = None,
    ) -> dict:
        """Persist a verdict for a leased item.

        Returns the stored verdict document; raises LookupError (unknown
        token), PermissionError (lease not held), or FileExistsError
        (already graded, and no supersede requested).
        """
        now = time.monotonic() if now is None else now
        missing = [name for name in CRITERION_FIELDS if name not in criteria]
        if missing:
            raise ValueError(f"criteria missing: {', '.join(missing)}")
        with self._lock:
            item = self._by_token.get(token)
            if item is None:
                raise LookupError("unknown item token")
            if item.graded and not supersede:
                raise FileExistsError("item already graded")
            if not item.graded:
                if not item.lease_active(now) or item.lease_session != session:
                    raise PermissionError("lease expired or not held")
            doc = {
                "query_id": item.query_id,
                "repeat": item.repeat,
                "evaluator_id": evaluator_id or session,
                "timestamp": _isoformat_now(),
            }
            for name in CRITERION_FIELDS:
                doc[name] = bool(criteria[name])
            with (item.run_dir / "verdicts.jsonl").open(
                "a", encoding="utf-8"
            ) as handle:
                handle.write(json.dumps(doc, sort_keys=True) + "\n")
            item.graded = True
            item.lease_session = None
            item.lease_expires = 0.0
            return doc

    def progress(self, now: Optional[float] = None) -> dict:
        now = time.monotonic() if now is None else now
        with self._lock:
            graded = sum(1 for item in self.items if item.graded)
            leased = sum(
                1
                for item in self.items
                if not item.graded and item.lease_active(now)
            )
            return {
                "total": len(self.items),
                "graded": graded,
                "leased": leased,
                "remaining": len(self.items) - graded,
                "done": graded == len(self.items),
            }


# ---------------------------------------------------------------------------
# HTTP layer


def _bearer_token(request: Request) -> Optional[str]:
    header = request.headers.get("authorization", "")
    if header.lower().startswith("bearer "):
        return header[len("bearer ") :].strip()
    return request.headers.get("x-eval-token")


def create_eval_app(
    queue: EvalQueue,
    auth_token: str,
    ui_dir: Optional[Union[str, Path]] = None,
) -> FastAPI:
    """The evaluation HTTP API, optionally serving the review UI statically."""
    app = FastAPI(title="review service", docs_url=None, redoc_url=None)

    def unauthorized() -> JSONResponse:
        return JSONResponse({"detail": "bad or missing token"}, status_code=401)

    @app.get("/eval/next")
    def eval_next(
        request: Request,
        x_eval_session: Optional[str] = Header(default=None),
    ):
        if _bearer_token(request) != auth_token:
            return unauthorized()
        if not x_eval_session:
            return JSONResponse(
                {"detail": "X-Eval-Session header required"}, status_code=400
            )
        state, payload = queue.next_for(x_eval_session)
        progress = queue.progress()
        if state == "item":
            return {"status": "item", "item": payload, "progress": progress}
        if state == "pending":
            return JSONResponse(
                {
                    "detail": "all remaining items are leased to other sessions",
                    "progress": progress,
                },
                status_code=409,
            )
        return {"status": "done", "progress": progress}

    @app.post("/eval/verdict")
    async def eval_verdict(
        request: Request,
        x_eval_session: Optional[str] = Header(default=None),
    ):
        if _bearer_token(request) != auth_token:
            return unauthorized()
        if not x_eval_session:
            return JSONResponse(
                {"detail": "X-Eval-Session header required"}, status_code=400
            )
        try:
            body = await request.json()
        except json.JSONDecodeError:
            return JSONResponse({"detail": "body must be JSON"}, status_code=400)
        token = body.get("token")
        criteria = body.get("criteria")
        if not isinstance(token, str) or not isinstance(criteria, dict):
            return JSONResponse(
                {"detail": "body needs 'token' and 'criteria'"}, status_code=400
            )
        try:
            stored = queue.submit(
                session=x_eval_session,
                token=token,
                criteria=criteria,
                evaluator_id=str(body.get("evaluator_id", "") or ""),
                supersede=bool(body.get("supersede", False)),
            )
        except ValueError as err:
            return JSONResponse({"detail": str(err)}, status_code=400)
        except LookupError:
            return JSONResponse({"detail": "unknown item token"}, status_code=404)
        except FileExistsError:
            return JSONResponse(
                {"detail": "item already graded"}, status_code=409
            )
        except PermissionError:
            return JSONResponse(
                {"detail": "lease expired or not held"}, status_code=410
            )
        return {
            "status": "stored",
            "verdict": stored,
            "progress": queue.progress(),
        }

    @app.get("/eval/progress")
    def eval_progress(request: Request):
        if _bearer_token(request) != auth_token:
            return unauthorized()
        return queue.progress()

    if ui_dir is not None:
        ui_path = Path(ui_dir)
        index = ui_path / "index.html"

        @app.get("/")
        def root():
            if index.is_file():
                return FileResponse(index)
            return JSONResponse(
                {"detail": "review UI not built"}, status_code=404
            )

        if ui_path.is_dir():
            app.mount("/ui", StaticFiles(directory=str(ui_path)), name="ui")

    return app


def serve(
    run_dirs: Sequence[Union[str, Path]],
    auth_token: str,
    host: str = "127.0.0.1",
    port: int = 8801,
    ui_dir: Optional[Union[str, Path]] = None,
    passing_only: bool = False,
    lease_seconds: float = DEFAULT_LEASE_SECONDS,
):
    """Run the evaluation service (blocking)."""
    import uvicorn

    queue = blind_shuffle(
        run_dirs,
        seed=auth_token,
        passing_only=passing_only,
        lease_seconds=lease_seconds,
    )
    app = create_eval_app(queue, auth_token, ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")
