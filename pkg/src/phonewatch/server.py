"""Review API over the violation store.

JSON over HTTP/1.1, versioned under /api/v1. GETs are pure views of the
store; the only mutation is POST .../review, which delegates to the store's
serialized write path. Errors use {"error": {"code", "message"}}. A static
bearer token is optional; without one the API is open (desk-scale default).
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Literal, Optional

from fastapi import FastAPI, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import FileResponse, JSONResponse
from pydantic import BaseModel, ConfigDict, Field

from .errors import ConflictError, NotFoundError
from .viostore import (
    REVIEW_CONFIRMED,
    REVIEW_DISMISSED,
    REVIEW_PENDING,
    ViolationRecord,
    ViolationStore,
    format_utc,
    parse_utc,
)

API_TITLE = "Phonewatch Review API"
API_VERSION = "1.0.0"

MAX_PAGE_SIZE = 500

_BUCKETS = {"hour": timedelta(hours=1), "day": timedelta(days=1)}
_STATUSES = (REVIEW_PENDING, REVIEW_CONFIRMED, REVIEW_DISMISSED)

_EARLIEST = datetime.min.replace(tzinfo=timezone.utc)
_LATEST = datetime.max.replace(tzinfo=timezone.utc)


@dataclass(frozen=True)
class ApiConfig:
    token: Optional[str] = None
    cors_origins: tuple[str, ...] = ()
    dashboard_dir: Optional[Path] = None


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        self.status = status
        self.code = code
        self.message = message


class ErrorDetail(BaseModel):
    code: str
    message: str


class ErrorBody(BaseModel):
    error: ErrorDetail


_ERR = {"model": ErrorBody}


class ViolationOut(BaseModel):
    violation_id: int
    stream_id: str
    phone_track_id: int
    windscreen_track_id: Optional[int]
    first_seen: str
    last_seen: str
    frame_index_first: int
    snapshot_ref: str
    max_score: float
    review_status: str
    reviewer_note: Optional[str]
    revision: int

    @classmethod
    def from_record(cls, record: ViolationRecord) -> "ViolationOut":
        return cls(
            violation_id=record.violation_id,
            stream_id=record.stream_id,
            phone_track_id=record.phone_track_id,
            windscreen_track_id=record.windscreen_track_id,
            first_seen=format_utc(record.first_seen),
            last_seen=format_utc(record.last_seen),
            frame_index_first=record.frame_index_first,
            snapshot_ref=record.snapshot_ref,
            max_score=record.max_score,
            review_status=record.review_status,
            reviewer_note=record.reviewer_note,
            revision=record.revision,
        )


class ViolationPage(BaseModel):
    items: list[ViolationOut]
    page: int
    page_size: int
    total: int


class ReviewRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    decision: Literal["confirmed", "dismissed"]
    note: Optional[str] = None


class StatsWindow(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    from_: str = Field(alias="from")
    to: str


class StatsBucket(BaseModel):
    start: str
    end: str
    violations: int
    vehicles: int


class StatsOut(BaseModel):
    window: StatsWindow
    violations_total: int
    violations_pending: int
    violations_confirmed: int
    violations_dismissed: int
    vehicles: int
    violation_rate: float
    buckets: list[StatsBucket]


def _parse_window_param(value: Optional[str], name: str) -> Optional[datetime]:
    if value is None:
        return None
    try:
        return parse_utc(value)
    except ValueError as exc:
        raise ApiError(400, "bad_request", f"malformed {name!r} timestamp: {value}") from exc


def create_app(store: ViolationStore, config: ApiConfig = ApiConfig()) -> FastAPI:
    app = FastAPI(title=API_TITLE, version=API_VERSION)

    if config.cors_origins:
        from fastapi.middleware.cors import CORSMiddleware

        app.add_middleware(
            CORSMiddleware,
            allow_origins=list(config.cors_origins),
            allow_methods=["*"],
            allow_headers=["*"],
        )

    @app.exception_handler(ApiError)
    async def _api_error(_: Request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status,
            content={"error": {"code": exc.code, "message": exc.message}},
        )

    @app.exception_handler(RequestValidationError)
    async def _validation_error(_: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=400,
            content={"error": {"code": "bad_request", "message": str(exc.errors()[:1])}},
        )

    def check_auth(request: Request) -> None:
        if config.token is None:
            return
        header = request.headers.get("authorization", "")
        if header != f"Bearer {config.token}":
            raise ApiError(401, "unauthorized", "missing or invalid bearer token")

    @app.get(
        "/api/v1/violations",
        response_model=ViolationPage,
        responses={400: _ERR, 401: _ERR},
    )
    def list_violations(
        request: Request,
        status: Optional[str] = None,
        from_: Optional[str] = Query(None, alias="from"),
        to: Optional[str] = None,
        page: int = 1,
        page_size: int = 50,
    ):
        check_auth(request)
        if status is not None and status not in _STATUSES:
            raise ApiError(400, "bad_request", f"status must be one of {_STATUSES}")
        if page < 1 or page_size < 1 or page_size > MAX_PAGE_SIZE:
            raise ApiError(400, "bad_request", "page must be >= 1 and page_size in [1, 500]")
        start = _parse_window_param(from_, "from") or _EARLIEST
        end = _parse_window_param(to, "to") or _LATEST
        if start > end:
            raise ApiError(400, "bad_request", "'from' must not be after 'to'")
        records = store.records(status=status, window=(start, end))
        total = len(records)
        items = records[(page - 1) * page_size : page * page_size]
        return ViolationPage(
            items=[ViolationOut.from_record(r) for r in items],
            page=page,
            page_size=page_size,
            total=total,
        )

    @app.get(
        "/api/v1/violations/{violation_id}/snapshot",
        responses={
            200: {"content": {"image/png": {}}, "description": "Stored snapshot bytes"},
            401: _ERR,
            404: _ERR,
            409: _ERR,
        },
    )
    def get_snapshot(request: Request, violation_id: int):
        check_auth(request)
        try:
            record = store.get(violation_id)
        except NotFoundError as exc:
            raise ApiError(404, "not_found", str(exc)) from exc
        if store.snapshot_pending(record):
            raise ApiError(409, "snapshot_pending", "snapshot write is pending retry")
        return FileResponse(
            store.snapshot_path(record),
            media_type="image/png",
            headers={
                "Cache-Control": "public, max-age=31536000, immutable",
                "ETag": f'"{record.violation_id}-{record.revision}"',
            },
        )

    @app.post(
        "/api/v1/violations/{violation_id}/review",
        response_model=ViolationOut,
        responses={400: _ERR, 401: _ERR, 404: _ERR, 409: _ERR},
    )
    def review_violation(request: Request, violation_id: int, body: ReviewRequest):
        check_auth(request)
        try:
            record = store.review(violation_id, body.decision, body.note)
        except NotFoundError as exc:
            raise ApiError(404, "not_found", str(exc)) from exc
        except ConflictError as exc:
            raise ApiError(409, "conflict", str(exc)) from exc
        return ViolationOut.from_record(record)

    @app.get(
        "/api/v1/stats",
        response_model=StatsOut,
        responses={400: _ERR, 401: _ERR},
    )
    def get_stats(
        request: Request,
        from_: Optional[str] = Query(None, alias="from"),
        to: Optional[str] = None,
        bucket: str = "day",
    ):
        check_auth(request)
        if bucket not in _BUCKETS:
            raise ApiError(400, "bad_request", "bucket must be 'hour' or 'day'")
        start = _parse_window_param(from_, "from")
        end = _parse_window_param(to, "to")
        records = store.records()
        vehicle_times = store.vehicle_first_seen_times()
        now = datetime.now(timezone.utc)
        if start is None:
            candidates = [r.first_seen for r in records] + vehicle_times
            start = min(candidates) if candidates else now
        if end is None:
            end = now
        if start > end:
            raise ApiError(400, "bad_request", "'from' must not be after 'to'")

        in_window = [r for r in records if start <= r.first_seen < end]
        vehicles = sum(1 for t in vehicle_times if start <= t < end)
        by_status = {s: 0 for s in _STATUSES}
        for record in in_window:
            by_status[record.review_status] += 1

        buckets = []
        step = _BUCKETS[bucket]
        cursor = start
        while cursor < end:
            bucket_end = min(cursor + step, end)
            buckets.append(
                StatsBucket(
                    start=format_utc(cursor),
                    end=format_utc(bucket_end),
                    violations=sum(1 for r in in_window if cursor <= r.first_seen < bucket_end),
                    vehicles=sum(1 for t in vehicle_times if cursor <= t < bucket_end),
                )
            )
            cursor = cursor + step

        total = len(in_window)
        return StatsOut(
            window=StatsWindow(from_=format_utc(start), to=format_utc(end)),
            violations_total=total,
            violations_pending=by_status[REVIEW_PENDING],
            violations_confirmed=by_status[REVIEW_CONFIRMED],
            violations_dismissed=by_status[REVIEW_DISMISSED],
            vehicles=vehicles,
            violation_rate=total / max(vehicles, 1),
            buckets=buckets,
        )

    if config.dashboard_dir is not None and Path(config.dashboard_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(config.dashboard_dir), html=True), name="dashboard")

    default_openapi = app.openapi

    def openapi_without_422():
        # Request-validation failures are remapped to 400, so the
        # auto-generated 422 entries would misstate the contract.
        if app.openapi_schema:
            return app.openapi_schema
        schema = default_openapi()
        for path_item in schema.get("paths", {}).values():
            for operation in path_item.values():
                operation.get("responses", {}).pop("422", None)
        for name in ("HTTPValidationError", "ValidationError"):
            schema.get("components", {}).get("schemas", {}).pop(name, None)
        app.openapi_schema = schema
        return schema

    app.openapi = openapi_without_422
    return app
