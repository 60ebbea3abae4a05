"""Local HTTP review service over a pipeline state directory.

Read endpoints serve downsampled sync curves, metric timelines, and gaze
trajectories for plotting. Mutations are limited to anomaly triage, alias
edits, and the explicit renormalize trigger; every mutation is appended to the
ledger's log with a timestamp and all file writes are atomic
(write-temp-then-rename), so the state directory can be replayed from the log.

The service binds to loopback by default and hosts a built frontend bundle at
/ when one is supplied; the API is fully usable without it.
"""

from __future__ import annotations

import json
import threading
from dataclasses import replace
from pathlib import Path

from fastapi import FastAPI, HTTPException, Query
from fastapi.responses import HTMLResponse, JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from . import annotate, state
from .annotate import AliasLedger, AnnotationRun
from .errors import StateError
from .maskmetrics import load_quality_csv

_FALLBACK_PAGE = """<!doctype html>
<html><head><title>gazekit review</title></head>
<body><h1>gazekit review service</h1>
<p>No UI bundle is hosted. The API lives under <code>/api</code>;
build the frontend and pass <code>--ui-dir</code> to serve it here.</p>
</body></html>
"""


def _downsample(rows: list, max_points: int) -> list:
    if max_points <= 0 or len(rows) <= max_points:
        return rows
    stride = -(-len(rows) // max_points)
    return rows[::stride]


class ResolveBody(BaseModel):
    option: str | None = None
    alias: str | None = None


class ReviewState:
    """All file access for one state directory; a single writer lock
    serializes mutations, and renormalize holds it exclusively."""

    def __init__(self, state_dir: Path):
        self.state_dir = Path(state_dir)
        self.write_lock = threading.Lock()

    # -- annotation state --------------------------------------------------

    @property
    def annotation_dir(self) -> Path:
        return self.state_dir / state.ANNOTATION_DIR

    def has_annotation(self) -> bool:
        return (self.annotation_dir / state.SERIES_FILE).exists()

    def load_run(self) -> AnnotationRun:
        ann = self.annotation_dir
        if not self.has_annotation():
            raise StateError(f"state dir {self.state_dir} holds no annotation run")
        plan = annotate.load_plan_json(ann / state.PLAN_FILE)
        prompts = tuple(annotate.load_prompts(ann / state.PROMPTS_FILE))
        series = annotate.load_series_csv(ann / state.SERIES_FILE)
        anomalies = annotate.load_anomalies_json(ann / state.ANOMALIES_FILE)
        raw = annotate.load_raw_json(ann / state.RAW_FILE)
        return AnnotationRun(plan=plan, prompts=prompts, series=series, anomalies=anomalies, raw=raw)

    def load_ledger(self) -> AliasLedger:
        path = self.annotation_dir / state.LEDGER_FILE
        return AliasLedger.load(path) if path.exists() else AliasLedger()

    def save_mutation(self, run: AnnotationRun | None, ledger: AliasLedger) -> None:
        if run is not None:
            annotate.write_series_csv(run.series, self.annotation_dir / state.SERIES_FILE)
            annotate.write_anomalies_json(run.anomalies, self.annotation_dir / state.ANOMALIES_FILE)
        ledger.save(self.annotation_dir / state.LEDGER_FILE)

    # -- read-only feeds ----------------------------------------------------

    def sync_report(self, session: str) -> dict:
        path = self.state_dir / state.SYNC_DIR / f"{session}.report.json"
        if not path.exists():
            raise HTTPException(404, f"no sync report for session {session!r}")
        return json.loads(path.read_text(encoding="utf-8"))

    def sync_curves(self, session: str) -> dict[str, list[list[float]]]:
        curves = {}
        for path in sorted((self.state_dir / state.SYNC_DIR).glob(f"{session}.curve.*.csv")):
            stream_id = path.name[len(session) + 7 : -4]
            rows = path.read_text(encoding="utf-8").splitlines()[1:]
            curves[stream_id] = [[float(a), float(b)] for a, b in (r.split(",") for r in rows if r)]
        return curves

    def metrics_path(self, stream: str) -> Path:
        path = self.state_dir / state.METRICS_DIR / f"{stream}.csv"
        if not path.exists():
            raise HTTPException(404, f"no quality report for stream {stream!r}")
        return path

    def gaze_path(self, stream: str) -> Path:
        path = self.state_dir / state.GAZE_DIR / f"{stream}.csv"
        if not path.exists():
            raise HTTPException(404, f"no trajectory for stream {stream!r}")
        return path


def replay_events(run: AnnotationRun, ledger: AliasLedger, events: list[dict]) -> tuple[AnnotationRun, AliasLedger]:
    """Re-apply mutation-log entries to a snapshot of annotation state.

    The resulting (series, anomalies, aliases) must equal the live state after
    the same endpoint sequence; used to check event-sourced consistency.
    """
    ledger = AliasLedger(aliases=ledger.aliases, log=list(ledger.log))
    for event in events:
        action = event["action"]
        if action == "add_alias":
            ledger.aliases.setdefault(event["prompt_id"], {})[event["alias"]] = event["option"]
        elif action == "remove_alias":
            ledger.aliases.get(event["prompt_id"], {}).pop(event["alias"], None)
        elif action == "resolve_anomaly":
            anomalies = []
            for a in run.anomalies:
                if a.anomaly_id == event["anomaly_id"]:
                    if event["mode"] == "alias" and a.raw_response is not None:
                        ledger.aliases.setdefault(a.prompt_id, {})[annotate.fold(a.raw_response)] = event["option"]
                    a = replace(
                        a, status="resolved", resolved_option=event["option"], resolved_via=event["mode"]
                    )
                anomalies.append(a)
            run = AnnotationRun(run.plan, run.prompts, run.series, tuple(anomalies), run.raw)
        elif action == "dismiss_anomaly":
            anomalies = tuple(
                replace(a, status="dismissed") if a.anomaly_id == event["anomaly_id"] else a for a in run.anomalies
            )
            run = AnnotationRun(run.plan, run.prompts, run.series, anomalies, run.raw)
        elif action == "renormalize":
            run, _, _ = annotate.renormalize(run, ledger)
    return run, ledger


def create_app(state_dir, ui_dir=None) -> FastAPI:
    review = ReviewState(Path(state_dir))
    app = FastAPI(title="gazekit review service", version="0.1.0")
    app.state.review = review

    @app.exception_handler(StateError)
    async def _state_error(request, exc):
        return JSONResponse(status_code=404, content={"detail": str(exc)})

    @app.get("/api/index")
    def index():
        sync_dir = review.state_dir / state.SYNC_DIR
        sessions = sorted(p.name[: -len(".report.json")] for p in sync_dir.glob("*.report.json"))
        metrics = sorted(p.stem for p in (review.state_dir / state.METRICS_DIR).glob("*.csv"))
        gaze = sorted(p.stem for p in (review.state_dir / state.GAZE_DIR).glob("*.csv"))
        prompts = []
        if review.has_annotation():
            prompts = [s.prompt_id for s in annotate.load_prompts(review.annotation_dir / state.PROMPTS_FILE)]
        return {"sessions": sessions, "metrics": metrics, "gaze": gaze, "annotation": review.has_annotation(), "prompts": prompts}

    # -- anomaly triage -----------------------------------------------------

    @app.get("/api/anomalies")
    def list_anomalies(prompt_id: str | None = None):
        run = review.load_run()
        options = {s.prompt_id: list(s.options) for s in run.prompts}
        out = []
        for a in run.anomalies:
            if a.status != "open":
                continue
            if prompt_id is not None and a.prompt_id != prompt_id:
                continue
            out.append(
                {
                    "anomaly_id": a.anomaly_id,
                    "clip_id": a.clip_id,
                    "prompt_id": a.prompt_id,
                    "raw_response": a.raw_response,
                    "reason": a.reason,
                    "options": options.get(a.prompt_id, []),
                }
            )
        return {"anomalies": out}

    @app.post("/api/anomalies/{anomaly_id}/resolve")
    def resolve_anomaly(anomaly_id: str, body: ResolveBody):
        if (body.option is None) == (body.alias is None):
            raise HTTPException(422, "provide exactly one of 'option' or 'alias'")
        mode = "option" if body.option is not None else "alias"
        value = body.option if body.option is not None else body.alias
        with review.write_lock:
            run = review.load_run()
            ledger = review.load_ledger()
            specs = {s.prompt_id: s for s in run.prompts}
            target = next((a for a in run.anomalies if a.anomaly_id == anomaly_id), None)
            if target is None:
                raise HTTPException(404, f"unknown anomaly {anomaly_id!r}")
            spec = specs[target.prompt_id]
            if value not in spec.options:
                raise HTTPException(422, f"{value!r} is not an option of prompt {target.prompt_id!r}")
            if mode == "alias":
                if target.raw_response is None:
                    raise HTTPException(422, "anomaly has no raw response to turn into an alias")
                folded = annotate.fold(target.raw_response)
                for other in spec.options:
                    if annotate.fold(other) == folded and other != value:
                        raise HTTPException(422, f"alias collides with option {other!r}")
                ledger.aliases.setdefault(target.prompt_id, {})[folded] = value
            anomalies = tuple(
                replace(a, status="resolved", resolved_option=value, resolved_via=mode)
                if a.anomaly_id == anomaly_id
                else a
                for a in run.anomalies
            )
            run = AnnotationRun(run.plan, run.prompts, run.series, anomalies, run.raw)
            ledger.log_event(
                "resolve_anomaly", actor="review_service", anomaly_id=anomaly_id, mode=mode, option=value
            )
            review.save_mutation(run, ledger)
        return {"anomaly_id": anomaly_id, "status": "resolved", "mode": mode, "option": value}

    @app.post("/api/anomalies/{anomaly_id}/dismiss")
    def dismiss_anomaly(anomaly_id: str):
        with review.write_lock:
            run = review.load_run()
            if not any(a.anomaly_id == anomaly_id for a in run.anomalies):
                raise HTTPException(404, f"unknown anomaly {anomaly_id!r}")
            ledger = review.load_ledger()
            anomalies = tuple(
                replace(a, status="dismissed") if a.anomaly_id == anomaly_id else a for a in run.anomalies
            )
            run = AnnotationRun(run.plan, run.prompts, run.series, anomalies, run.raw)
            ledger.log_event("dismiss_anomaly", actor="review_service", anomaly_id=anomaly_id)
            review.save_mutation(run, ledger)
        return {"anomaly_id": anomaly_id, "status": "dismissed"}

    @app.post("/api/renormalize")
    def trigger_renormalize():
        if not review.write_lock.acquire(blocking=False):
            raise HTTPException(409, "a renormalize or mutation is already in progress")
        try:
            run = review.load_run()
            ledger = review.load_ledger()
            new_run, resolved, still_open = annotate.renormalize(run, ledger)
            ledger.log_event("renormalize", actor="review_service", resolved=resolved, still_open=still_open)
            review.save_mutation(new_run, ledger)
        finally:
            review.write_lock.release()
        return {"resolved": resolved, "still_open": still_open}

    # -- read-only plotting feeds -------------------------------------------

    @app.get("/api/sync/{session}")
    def sync_feed(session: str, max_points: int = 2000):
        report = review.sync_report(session)
        curves = {sid: _downsample(c, max_points) for sid, c in review.sync_curves(session).items()}
        return {"report": report, "curves": curves}

    @app.get("/api/metrics/{stream}")
    def metrics_feed(
        stream: str,
        from_: int | None = Query(None, alias="from"),
        to: int | None = None,
        max_points: int = 2000,
    ):
        if from_ is not None and to is not None and from_ > to:
            raise HTTPException(422, "'from' must not exceed 'to'")
        report = load_quality_csv(review.metrics_path(stream))
        rows = []
        for i in range(report.n_frames):
            if from_ is not None and i < from_:
                continue
            if to is not None and i > to:
                continue
            rows.append(
                {
                    "frame": i,
                    "ifc": None if i == 0 else report.ifc[i - 1],
                    "br": report.br[i],
                    "os": report.os[i],
                }
            )
        return {
            "stream": stream,
            "rows": _downsample(rows, max_points),
            "temporal_means": {"ifc": report.ifc_mean, "br": report.br_mean, "os": report.os_mean},
        }

    @app.get("/api/gaze/{stream}")
    def gaze_feed(
        stream: str,
        from_: int | None = Query(None, alias="from"),
        to: int | None = None,
        max_points: int = 2000,
    ):
        if from_ is not None and to is not None and from_ > to:
            raise HTTPException(422, "'from' must not exceed 'to'")
        from .gazemap import load_trajectory_csv

        names, samples = load_trajectory_csv(review.gaze_path(stream))
        rows = [
            {
                "timestamp_ns": s.timestamp_ns,
                "frame_index": s.frame_index,
                "target": s.target,
                "background_ratio": s.background_ratio,
                "ratios": s.ratios,
            }
            for s in samples
            if (from_ is None or s.timestamp_ns >= from_) and (to is None or s.timestamp_ns <= to)
        ]
        return {"stream": stream, "objects": names, "rows": _downsample(rows, max_points)}

    # -- static frontend ----------------------------------------------------

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    else:

        @app.get("/", response_class=HTMLResponse)
        def fallback_page():
            return _FALLBACK_PAGE

    return app
