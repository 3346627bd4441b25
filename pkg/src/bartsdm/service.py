"""HTTP job facade over the analysis pipeline.

Jobs are directories under the service workspace: the submitted config,
uploaded input files, a status document, and the exported results. The
API never keeps derived state of its own; every results request is read
back from the exported files, so a finished job survives restarts and
repeated fetches are byte-identical.

No authentication: the service is a single-user tool and binds to
loopback by default.
"""
from __future__ import annotations

import csv
import json
import threading
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from fastapi import FastAPI, File, HTTPException, UploadFile
from fastapi.responses import FileResponse, JSONResponse, PlainTextResponse
from fastapi.staticfiles import StaticFiles

from .errors import BartSdmError
from .export import MANIFEST_NAME, export_results, load_manifest
from .grids import load_ascii_grid
from .pipeline import config_from_dict, run_analysis, validate_inputs

JOB_STATES = ("pending", "running", "done", "failed")


class Job:
    def __init__(self, job_id: str, root: Path):
        self.id = job_id
        self.root = root
        self.state = "pending"
        self.stage = ""
        self.progress = 0.0
        self.created = time.time()
        self.started = None
        self.finished = None
        self.error = None
        self.validation = []

    def view(self) -> dict:
        return {
            "id": self.id,
            "state": self.state,
            "stage": self.stage,
            "progress": self.progress,
            "created": self.created,
            "started": self.started,
            "finished": self.finished,
            "error": self.error,
            "validation": self.validation,
        }

    def persist(self) -> None:
        with open(self.root / "status.json", "w", encoding="utf-8") as fh:
            json.dump(self.view(), fh)

    @classmethod
    def restore(cls, root: Path) -> "Job | None":
        status_path = root / "status.json"
        if not status_path.exists():
            return None
        with open(status_path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        job = cls(doc["id"], root)
        for key in ("state", "stage", "progress", "created", "started", "finished", "error", "validation"):
            setattr(job, key, doc.get(key))
        if job.state == "running":  # interrupted by a restart
            job.state = "failed"
            job.error = "service restarted while the job was running"
            job.persist()
        return job


class JobRegistry:
    """Single consistent job table; mutations are serialized."""

    def __init__(self, workspace: Path):
        self.workspace = workspace
        self.jobs_dir = workspace / "jobs"
        self.jobs_dir.mkdir(parents=True, exist_ok=True)
        self.lock = threading.Lock()
        self.jobs: dict = {}
        for root in sorted(self.jobs_dir.iterdir()):
            job = Job.restore(root)
            if job is not None:
                self.jobs[job.id] = job

    def create(self) -> Job:
        with self.lock:
            job_id = uuid.uuid4().hex[:12]
            root = self.jobs_dir / job_id
            (root / "inputs").mkdir(parents=True)
            job = Job(job_id, root)
            self.jobs[job_id] = job
            job.persist()
            return job

    def get(self, job_id: str) -> Job:
        job = self.jobs.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail="unknown job id")
        return job


def _csv_records(path: Path):
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        rows = []
        for row in reader:
            rows.append({k: (None if v == "" else v) for k, v in row.items()})
        return rows


def _raster_json(path: Path) -> dict:
    layer = load_ascii_grid(path)
    values = [
        [None if layer.missing[r, c] else float(layer.values[r, c]) for c in range(layer.n_cols)]
        for r in range(layer.n_rows)
    ]
    g = layer.grid
    return {
        "n_rows": g.n_rows,
        "n_cols": g.n_cols,
        "x_ll": g.x_ll,
        "y_ll": g.y_ll,
        "cell_size": g.cell_size,
        "values": values,
    }


def create_app(workspace, workers: int = 1, frontend_dir=None) -> FastAPI:
    """Build the API; job execution happens in a bounded worker pool."""
    workspace = Path(workspace)
    registry = JobRegistry(workspace)
    pool = ThreadPoolExecutor(max_workers=max(1, workers))
    app = FastAPI(title="bartsdm service", version="1.0")

    def execute(job: Job, config) -> None:
        with registry.lock:
            job.state = "running"
            job.started = time.time()
            job.persist()

        def on_progress(species, stage, fraction):
            with registry.lock:
                job.stage = f"{species}:{stage}"
                job.progress = fraction
                job.persist()

        try:
            bundle = run_analysis(config, progress=on_progress)
            export_results(bundle, job.root / "results")
            with registry.lock:
                if bundle.failed_species:
                    job.state = "failed"
                    job.error = "; ".join(
                        f"{name}: {bundle.species[name].error}" for name in bundle.failed_species
                    )
                else:
                    job.state = "done"
                job.progress = 1.0
                job.stage = "export"
                job.finished = time.time()
                job.persist()
        except Exception as err:  # noqa: BLE001 - job isolation boundary
            with registry.lock:
                job.state = "failed"
                job.error = f"{type(err).__name__}: {err}"
                job.finished = time.time()
                job.persist()

    def parse_and_validate(job: Job, payload: dict):
        try:
            config = config_from_dict(payload, base_dir=job.root / "inputs")
        except (BartSdmError, KeyError, TypeError, ValueError) as err:
            raise HTTPException(status_code=400, detail=f"bad config payload: {err}") from err
        config.output_dir = str(job.root / "results")
        table = validate_inputs(config)
        return config, table

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/jobs", status_code=201)
    def submit_job(body: dict):
        payload = body.get("config")
        if payload is None:
            raise HTTPException(status_code=400, detail="body must carry a 'config' object")
        start = bool(body.get("start", True))
        job = registry.create()
        with open(job.root / "config.json", "w", encoding="utf-8") as fh:
            json.dump(payload, fh)
        if not start:
            job.persist()
            return {"id": job.id, "state": job.state, "validation": []}
        config, table = parse_and_validate(job, payload)
        job.validation = table.to_payload()
        if table.has_errors:
            job.persist()
            raise HTTPException(status_code=400, detail={"validation": table.to_payload()})
        job.persist()
        pool.submit(execute, job, config)
        return {"id": job.id, "state": job.state, "validation": job.validation}

    @app.post("/jobs/{job_id}/files")
    def upload_file(job_id: str, file: UploadFile = File(...), path: str | None = None):
        job = registry.get(job_id)
        if job.state != "pending":
            raise HTTPException(status_code=409, detail=f"job is {job.state}")
        rel = Path(path or file.filename)
        if rel.is_absolute() or ".." in rel.parts:
            raise HTTPException(status_code=400, detail="invalid upload path")
        target = job.root / "inputs" / rel
        target.parent.mkdir(parents=True, exist_ok=True)
        with open(target, "wb") as fh:
            fh.write(file.file.read())
        return {"stored": str(rel)}

    @app.post("/jobs/{job_id}/start")
    def start_job(job_id: str):
        job = registry.get(job_id)
        if job.state != "pending":
            raise HTTPException(status_code=409, detail=f"job is {job.state}")
        with open(job.root / "config.json", "r", encoding="utf-8") as fh:
            payload = json.load(fh)
        config, table = parse_and_validate(job, payload)
        job.validation = table.to_payload()
        job.persist()
        if table.has_errors:
            raise HTTPException(status_code=400, detail={"validation": table.to_payload()})
        pool.submit(execute, job, config)
        return {"id": job.id, "state": job.state, "validation": job.validation}

    @app.get("/jobs/{job_id}")
    def job_status(job_id: str):
        return registry.get(job_id).view()

    def _results_dir(job: Job) -> Path:
        if job.state != "done":
            raise HTTPException(status_code=409, detail=f"job is {job.state}, not done")
        results = job.root / "results"
        if not (results / MANIFEST_NAME).exists():
            raise HTTPException(status_code=409, detail="results not available")
        return results

    @app.get("/jobs/{job_id}/manifest")
    def job_manifest(job_id: str):
        return load_manifest(_results_dir(registry.get(job_id)))

    @app.get("/jobs/{job_id}/results")
    def job_results(
        job_id: str,
        family: str,
        species: str | None = None,
        variant: str | None = None,
        scenario: str | None = None,
        timestamp: str | None = None,
        summary: str | None = None,
        format: str | None = None,
    ):
        results = _results_dir(registry.get(job_id))
        manifest = load_manifest(results)

        def pick(mapping, key, what):
            if key is None:
                if len(mapping) == 1:
                    return next(iter(mapping.values()))
                raise HTTPException(status_code=404, detail=f"ambiguous {what}: pick one of {sorted(mapping)}")
            if key not in mapping:
                raise HTTPException(status_code=404, detail=f"unknown {what} '{key}'")
            return mapping[key]

        sp_entry = pick(manifest["species"], species, "species")
        if family == "raster":
            var_entry = pick(sp_entry["variants"], variant, "variant")
            by_scenario = var_entry["rasters"]
            by_time = pick(by_scenario, scenario, "scenario")
            by_summary = pick(by_time, timestamp, "timestamp")
            rel = pick(by_summary, summary, "summary")
            path = results / rel
            if format == "asc":
                return FileResponse(path, media_type="text/plain", filename=rel)
            return JSONResponse(_raster_json(path))
        if family == "model":
            var_entry = pick(sp_entry["variants"], variant, "variant")
            return FileResponse(results / var_entry["model"], media_type="application/json")
        # table families
        tables = dict(sp_entry.get("tables", {}))
        if variant is not None or len(sp_entry["variants"]) == 1:
            var_entry = pick(sp_entry["variants"], variant, "variant")
            tables.update(var_entry["tables"])
        if family not in tables:
            raise HTTPException(status_code=404, detail=f"no '{family}' table for this selection")
        path = results / tables[family]
        if format == "json":
            return JSONResponse(_csv_records(path))
        return PlainTextResponse(path.read_text(encoding="utf-8"), media_type="text/csv")

    if frontend_dir is not None and Path(frontend_dir).exists():
        app.mount("/", StaticFiles(directory=frontend_dir, html=True), name="ui")
    return app
