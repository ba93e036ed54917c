#!/usr/bin/env python3
"""Capture real /v1 payloads from the replay backend as UI test fixtures.

Writes frontend/tests/fixtures/*.json so the UI component tests exercise
exactly the payload shapes the service produces.

Run from the repository root: python scripts/export_ui_fixtures.py
"""

from __future__ import annotations

import json
import sys
import tempfile
import threading
import time
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from fastapi.testclient import TestClient  # noqa: E402

from pulse.service import AppState, create_app  # noqa: E402

FIXTURES = ROOT / "tests" / "fixtures"
OUT = ROOT / "frontend" / "tests" / "fixtures"

MAIN_TITLE = "Internet safety for children"
ALT_TITLE = "Family keepsakes online"
ALT_DESC = "digitizing family memories"


def _dump(name: str, payload) -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    path = OUT / name
    if isinstance(payload, str):
        path.write_text(payload, encoding="utf-8")
    else:
        path.write_text(
            json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
            encoding="utf-8",
        )
    print(f"wrote {path.relative_to(ROOT)}")


def _wait(client, job_id: str) -> dict:
    deadline = time.time() + 30
    while time.time() < deadline:
        snapshot = client.get(f"/v1/jobs/{job_id}").json()
        if snapshot["phase"] in ("done", "failed"):
            return snapshot
        time.sleep(0.02)
    raise RuntimeError("job did not finish")


def main() -> int:
    with tempfile.TemporaryDirectory() as tmp:
        state = AppState.build(
            Path(tmp) / "data", mode="replay", fixture_dir=FIXTURES / "llm"
        )
        client = TestClient(create_app(state))

        for name in ("badthemes", "climatechange", "parenting"):
            response = client.post(
                "/v1/datasets",
                files={
                    "file": (
                        f"{name}.csv",
                        (FIXTURES / "corpus" / f"{name}.csv").read_bytes(),
                        "text/csv",
                    )
                },
            )
            assert response.status_code == 201, response.text

        _dump("datasets.json", client.get("/v1/datasets").json())

        recommend = client.post(
            "/v1/recommendations", json={"topic": "Parenting teens online"}
        )
        assert recommend.status_code == 200
        _dump("recommendations.json", recommend.json())

        datasets = client.get("/v1/datasets").json()["datasets"]
        parenting_id = next(
            d["dataset_id"] for d in datasets if d["source_label"] == "parenting"
        )

        themes = client.post(f"/v1/datasets/{parenting_id}/themes")
        assert themes.status_code == 200
        _dump("themes.json", themes.json())

        # capture a genuinely mid-run job snapshot by holding the pipeline
        release = threading.Event()
        original = state.pipeline.identify_subtopics

        def paused(*args, **kwargs):
            release.wait(timeout=10)
            return original(*args, **kwargs)

        state.pipeline.identify_subtopics = paused
        submit = client.post(
            "/v1/reports",
            json={"dataset_id": parenting_id, "theme": {"title": MAIN_TITLE}},
        )
        assert submit.status_code == 202, submit.text
        _dump("submit_accepted.json", submit.json())
        job_id = submit.json()["job_id"]
        for _ in range(300):
            running = client.get(f"/v1/jobs/{job_id}").json()
            if running["phase"] == "coding":
                break
            time.sleep(0.01)
        assert running["phase"] == "coding", running
        _dump("job_running.json", running)
        release.set()
        state.pipeline.identify_subtopics = original

        done = _wait(client, job_id)
        assert done["phase"] == "done", done
        _dump("job_done.json", done)

        report_id = done["report_id"]
        _dump("report_main.json", client.get(f"/v1/reports/{report_id}").json())
        download = client.get(f"/v1/reports/{report_id}/download?format=jsonl")
        _dump("report_main.jsonl", download.text)

        # warm-cache resubmission payload (200 with existing report id)
        warm = client.post(
            "/v1/reports",
            json={"dataset_id": parenting_id, "theme": {"title": MAIN_TITLE}},
        )
        assert warm.status_code == 200
        _dump("submit_warm.json", warm.json())

        # second theme: its report carries one untraceable quote
        alt_submit = client.post(
            "/v1/reports",
            json={
                "dataset_id": parenting_id,
                "theme": {"title": ALT_TITLE, "description": ALT_DESC},
            },
        )
        assert alt_submit.status_code == 202, alt_submit.text
        alt_done = _wait(client, alt_submit.json()["job_id"])
        assert alt_done["phase"] == "done"
        alt_report = client.get(f"/v1/reports/{alt_done['report_id']}").json()
        assert alt_report["totals"]["untraceable"] == 1
        _dump("report_alt.json", alt_report)

        # failed job snapshot (unrecorded theme -> fixture miss mid-job)
        fail_submit = client.post(
            "/v1/reports",
            json={"dataset_id": parenting_id, "theme": {"title": "Never Recorded"}},
        )
        assert fail_submit.status_code == 202
        failed = _wait(client, fail_submit.json()["job_id"])
        assert failed["phase"] == "failed"
        _dump("job_failed.json", failed)

    return 0


if __name__ == "__main__":
    sys.exit(main())
