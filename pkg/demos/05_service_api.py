"""Drive the HTTP job API in-process: submit, poll, fetch results.

Uses the FastAPI test client so no port is opened; the same flow works
over the network via ``bartsdm serve``.
"""
import tempfile
import time
from pathlib import Path

import yaml
from fastapi.testclient import TestClient

from bartsdm.datasets import write_toy_fixture
from bartsdm.service import create_app

root = Path(tempfile.mkdtemp(prefix="bartsdm_demo_"))
config_path = write_toy_fixture(
    root / "fixture",
    sampler={"m": 10, "n_burn": 30, "n_draws": 60},
    evaluation={"cv": False, "importance": True, "response_curves": True},
)
doc = yaml.safe_load(config_path.read_text())
base = root / "fixture"
doc["species"][0]["file"] = str(base / doc["species"][0]["file"])
doc["fitting_layers"] = {
    var: {t: str(base / p) for t, p in steps.items()}
    for var, steps in doc["fitting_layers"].items()
}
doc["projection_layers"] = {
    name: {t: {v: str(base / p) for v, p in vars_.items()} for t, vars_ in steps.items()}
    for name, steps in doc["projection_layers"].items()
}

app = create_app(root / "workspace", workers=1)
with TestClient(app) as client:
    print("health:", client.get("/healthz").json())
    resp = client.post("/jobs", json={"config": doc})
    job_id = resp.json()["id"]
    print(f"submitted job {job_id}")
    while True:
        view = client.get(f"/jobs/{job_id}").json()
        print(f"  {view['state']:8s} {view['progress']:5.0%} {view['stage']}")
        if view["state"] in ("done", "failed"):
            break
        time.sleep(0.3)
    assert view["state"] == "done", view["error"]

    manifest = client.get(f"/jobs/{job_id}/manifest").json()
    print(f"manifest lists {len(manifest['files'])} files")
    grid = client.get(
        f"/jobs/{job_id}/results",
        params={"family": "raster", "scenario": "high", "timestamp": "2090", "summary": "mean"},
    ).json()
    flat = [v for row in grid["values"] for v in row if v is not None]
    print(f"mean suitability (high/2090): {sum(flat)/len(flat):.3f} over {len(flat)} cells")
    metrics = client.get(
        f"/jobs/{job_id}/results", params={"family": "metrics", "format": "json"}
    ).json()
    print("metrics:", {r["metric"]: r["value"] for r in metrics[:4]})
