"""HTTP surface for the preference study, plus static hosting of the review UI."""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, HTTPException, Query
from fastapi.responses import PlainTextResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from kgcot.errors import InputError
from kgcot.study import StudyStore


class PreferenceIn(BaseModel):
    comparison_id: str
    annotator_id: str
    dimension: str
    choice: str


def create_app(store: StudyStore, ui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="kgcot preference study", docs_url=None, redoc_url=None)

    @app.get("/api/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.get("/api/study/next")
    def next_case(annotator: str = Query(..., min_length=1)) -> dict:
        return store.next_case(annotator)

    @app.post("/api/study/preference")
    def record_preference(pref: PreferenceIn) -> dict:
        try:
            return store.record_preference(
                pref.comparison_id, pref.annotator_id, pref.dimension, pref.choice
            )
        except InputError as err:
            status = 404 if "unknown comparison" in str(err) else 400
            raise HTTPException(status_code=status, detail=str(err)) from err

    @app.get("/api/study/report")
    def report() -> dict:
        return store.report()

    @app.get("/api/study/export")
    def export() -> PlainTextResponse:
        body = "\n".join(store.export_lines())
        return PlainTextResponse(body + "\n" if body else "")

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
