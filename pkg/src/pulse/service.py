"""REST boundary between the UI and the analysis pipeline.

Asynchronous job model with polling: report jobs run on background
threads, clients poll /v1/jobs/{id}. Handlers hold no state of their own;
everything shared lives in AppState under the pipeline/cache contracts.
"""

from __future__ import annotations

import csv
import logging
import tempfile
import threading
import uuid
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional

from fastapi import FastAPI, File, Form, Request, UploadFile
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse, JSONResponse
from pydantic import BaseModel

from .cache import CacheStore, theme_digest
from .errors import ProviderUnavailable, SchemaMismatch, WrongCardinality
from .gateway import Gateway, ProviderConfig
from .ingest import Corpus, load_corpus
from .jsonio import read_json
from .pipeline import JobRegistry, Pipeline, Theme

logger = logging.getLogger(__name__)

ERROR_CODES = (
    "validation_error",
    "schema_mismatch",
    "not_found",
    "duplicate_job",
    "provider_unavailable",
    "wrong_cardinality",
    "internal_error",
)


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, **extra):
        assert code in ERROR_CODES
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message
        self.extra = extra


@dataclass
class DatasetRecord:
    dataset_id: str
    source_label: str
    path: Path
    corpus: Corpus


class AppState:
    """Shared backend state: dataset registry, gateway, cache, jobs."""

    def __init__(self, pipeline: Pipeline, data_root: Path):
        self.pipeline = pipeline
        self.data_root = Path(data_root)
        self.datasets: Dict[str, DatasetRecord] = {}
        self.themes: Dict[str, Dict[str, Theme]] = {}
        self.jobs = JobRegistry()
        self._lock = threading.Lock()
        (self.data_root / "datasets").mkdir(parents=True, exist_ok=True)
        self._load_existing_datasets()

    @classmethod
    def build(
        cls,
        data_root: Path,
        mode: str = "replay",
        fixture_dir: Optional[Path] = None,
        model_id: str = "gpt-4",
        transport=None,
        **pipeline_kwargs,
    ) -> "AppState":
        data_root = Path(data_root)
        gateway = Gateway(
            ProviderConfig(mode=mode, fixture_dir=fixture_dir), transport=transport
        )
        pipeline = Pipeline(
            gateway,
            CacheStore(data_root / "cache"),
            reports_root=data_root / "reports",
            model_id=model_id,
            **pipeline_kwargs,
        )
        return cls(pipeline, data_root)

    def _load_existing_datasets(self) -> None:
        for path in sorted((self.data_root / "datasets").glob("*.csv")):
            try:
                corpus = load_corpus(path)
            except (SchemaMismatch, OSError, UnicodeError, csv.Error) as exc:
                logger.warning("skipping unreadable dataset %s: %s", path.name, exc)
                continue
            record = DatasetRecord(
                dataset_id=corpus.dataset_id,
                source_label=corpus.source_label,
                path=path,
                corpus=corpus,
            )
            self.datasets[record.dataset_id] = record

    def register_dataset(self, csv_bytes: bytes, source_label: Optional[str]) -> DatasetRecord:
        dataset_id = f"d{uuid.uuid4().hex[:10]}"
        path = self.data_root / "datasets" / f"{dataset_id}.csv"
        with tempfile.NamedTemporaryFile(
            dir=path.parent, suffix=".tmp", delete=False
        ) as tmp:
            tmp.write(csv_bytes)
            tmp_path = Path(tmp.name)
        try:
            corpus = load_corpus(tmp_path, dataset_id=dataset_id, source_label=source_label)
        except (UnicodeError, csv.Error) as exc:
            tmp_path.unlink(missing_ok=True)
            raise SchemaMismatch(f"upload is not a readable corpus CSV: {exc}") from exc
        except SchemaMismatch:
            tmp_path.unlink(missing_ok=True)
            raise
        tmp_path.rename(path)
        record = DatasetRecord(
            dataset_id=dataset_id,
            source_label=corpus.source_label,
            path=path,
            corpus=corpus,
        )
        with self._lock:
            self.datasets[dataset_id] = record
        return record

    def register_theme(self, dataset_id: str, theme: Theme) -> Theme:
        with self._lock:
            self.themes.setdefault(dataset_id, {})[theme_digest(theme.title)] = theme
        return theme

    def resolve_theme(self, dataset_id: str, title: str, description: str) -> Theme:
        """Prefer a previously registered theme with the same normalized
        title, so suggested themes keep their description and origin."""
        with self._lock:
            registered = self.themes.get(dataset_id, {}).get(theme_digest(title))
        if registered is not None:
            return registered
        return Theme(title=title, description=description, origin="user_defined")


class TopicBody(BaseModel):
    topic: str


class ThemesBody(BaseModel):
    custom_theme: Optional[str] = None
    description: Optional[str] = None


class ThemeBody(BaseModel):
    title: str
    description: str = ""


class ReportsBody(BaseModel):
    dataset_id: str
    theme: ThemeBody


def _theme_dict(theme: Theme) -> dict:
    return {"title": theme.title, "description": theme.description, "origin": theme.origin}


def create_app(state: AppState) -> FastAPI:
    app = FastAPI(title="pulse", version="0.1.0")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    pipeline = state.pipeline

    @app.exception_handler(ApiError)
    async def api_error_handler(_req: Request, exc: ApiError):
        body = {"code": exc.code, "message": exc.message}
        body.update(exc.extra)
        return JSONResponse(status_code=exc.status, content=body)

    @app.exception_handler(RequestValidationError)
    async def validation_handler(_req: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=422,
            content={"code": "validation_error", "message": str(exc.errors()[:2])},
        )

    @app.exception_handler(Exception)
    async def fallback_handler(_req: Request, exc: Exception):
        logger.exception("unhandled error in request handler")
        return JSONResponse(
            status_code=500,
            content={"code": "internal_error", "message": str(exc)},
        )

    @app.post("/v1/recommendations")
    def recommendations(body: TopicBody):
        topic = body.topic.strip()
        if not topic:
            raise ApiError(422, "validation_error", "topic must be non-empty")
        counts: Dict[str, int] = {}
        for record in state.datasets.values():
            counts[record.source_label] = counts.get(record.source_label, 0) + len(
                record.corpus.threads
            )
        if not counts:
            return {"sources": []}
        try:
            ranked = pipeline.recommend_sources(topic, sorted(counts))
        except ProviderUnavailable as exc:
            raise ApiError(503, "provider_unavailable", str(exc))
        return {
            "sources": [
                {"label": label, "thread_count": counts[label]} for label in ranked
            ]
        }

    @app.get("/v1/datasets")
    def list_datasets():
        return {
            "datasets": [
                {
                    "dataset_id": r.dataset_id,
                    "source_label": r.source_label,
                    "thread_count": len(r.corpus.threads),
                }
                for r in sorted(state.datasets.values(), key=lambda r: r.dataset_id)
            ]
        }

    @app.post("/v1/datasets", status_code=201)
    def upload_dataset(
        file: UploadFile = File(...), source_label: Optional[str] = Form(None)
    ):
        try:
            record = state.register_dataset(file.file.read(), source_label)
        except SchemaMismatch as exc:
            raise ApiError(400, "schema_mismatch", str(exc))
        return {
            "dataset_id": record.dataset_id,
            "source_label": record.source_label,
            "thread_count": len(record.corpus.threads),
        }

    @app.post("/v1/datasets/{dataset_id}/themes")
    def themes(dataset_id: str, body: Optional[ThemesBody] = None):
        record = state.datasets.get(dataset_id)
        if record is None:
            raise ApiError(404, "not_found", f"unknown dataset {dataset_id!r}")
        if body and body.custom_theme and body.custom_theme.strip():
            theme = state.register_theme(
                dataset_id,
                Theme(
                    title=body.custom_theme.strip(),
                    description=(body.description or "").strip(),
                    origin="user_defined",
                ),
            )
            return {"themes": [_theme_dict(theme)]}
        try:
            suggested = pipeline.generate_themes(record.corpus)
        except WrongCardinality as exc:
            raise ApiError(502, "wrong_cardinality", str(exc))
        except ProviderUnavailable as exc:
            raise ApiError(503, "provider_unavailable", str(exc))
        for theme in suggested:
            state.register_theme(dataset_id, theme)
        return {"themes": [_theme_dict(t) for t in suggested]}

    @app.post("/v1/reports")
    def submit_report(body: ReportsBody):
        record = state.datasets.get(body.dataset_id)
        if record is None:
            raise ApiError(404, "not_found", f"unknown dataset {body.dataset_id!r}")
        title = body.theme.title.strip()
        if not title:
            raise ApiError(422, "validation_error", "theme title must be non-empty")
        theme = state.resolve_theme(body.dataset_id, title, body.theme.description.strip())

        running = state.jobs.running_job(pipeline, body.dataset_id, theme)
        if running is not None:
            raise ApiError(
                409,
                "duplicate_job",
                "a job for this dataset and theme is already running",
                job_id=running.job_id,
            )
        cached = pipeline.cached_report_id(body.dataset_id, theme)
        if cached is not None:
            job = state.jobs.record_completed(pipeline, body.dataset_id, theme, cached)
            return JSONResponse(
                status_code=200,
                content={"job_id": job.job_id, "report_id": cached, "phase": "done"},
            )
        job = state.jobs.submit(pipeline, record.corpus, theme)
        return JSONResponse(
            status_code=202, content={"job_id": job.job_id, "phase": job.phase}
        )

    @app.get("/v1/jobs/{job_id}")
    def job_state(job_id: str):
        job = state.jobs.get(job_id)
        if job is None:
            raise ApiError(404, "not_found", f"unknown job {job_id!r}")
        return job.snapshot()

    @app.get("/v1/reports/{report_id}")
    def report(report_id: str):
        path = pipeline.report_dir(report_id) / "report.json"
        if not path.is_file():
            raise ApiError(404, "not_found", f"unknown report {report_id!r}")
        return read_json(path)

    @app.get("/v1/reports/{report_id}/download")
    def download(report_id: str, format: str = "jsonl"):
        if format not in ("jsonl", "markdown"):
            raise ApiError(422, "validation_error", f"unsupported format {format!r}")
        suffix = "jsonl" if format == "jsonl" else "md"
        path = pipeline.report_dir(report_id) / f"report.{suffix}"
        if not path.is_file():
            raise ApiError(404, "not_found", f"unknown report {report_id!r}")
        media = "application/x-ndjson" if format == "jsonl" else "text/markdown"
        return FileResponse(
            path, media_type=media, filename=f"report-{report_id}.{suffix}"
        )

    return app
