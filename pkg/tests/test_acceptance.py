"""Acceptance suite: one test per release criterion, each printing a
PASS line on success so a -s run reads as a checklist."""

import json
import random
import time

import jsonschema
from fastapi.testclient import TestClient

from pulse.cache import CacheStore
from pulse.cli import main
from pulse.gateway import Gateway, PriceTable, ProviderConfig, estimate_cost
from pulse.ingest import (
    Corpus,
    DiscussionThread,
    aggregate_threads,
    load_corpus,
    parse_archive,
    write_corpus_csv,
)
from pulse.jsonio import read_json
from pulse.pipeline import (
    Pipeline,
    QuoteEntry,
    Subtopic,
    UNCATEGORIZED_CODE,
    normalize_ws,
)
from pulse.prompts import PromptLibrary
from pulse.report import build_report
from pulse.service import AppState, create_app
from pulse.stub import ScriptedModel

from conftest import FIXTURES, GOLDEN, MAIN_THEME

from test_prompts import ANCHORS, CANONICAL
from test_service import ERROR_SCHEMA, JOB_SCHEMA, REPORT_SCHEMA, SOURCES_SCHEMA, THEMES_SCHEMA


def _pass(name: str) -> None:
    print(f"\n[ACCEPTANCE] {name}: PASS")


def _run_analyze(out_dir, capsys):
    started = time.monotonic()
    code = main(
        [
            "--json",
            "analyze",
            "--dataset",
            str(FIXTURES / "corpus" / "parenting.csv"),
            "--theme",
            MAIN_THEME.title,
            "--desc",
            MAIN_THEME.description,
            "--mode",
            "replay",
            "--fixtures",
            str(FIXTURES / "llm"),
            "--out",
            str(out_dir),
        ]
    )
    elapsed = time.monotonic() - started
    assert code == 0
    summary = json.loads(capsys.readouterr().out)
    return summary, elapsed


def test_deterministic_end_to_end(tmp_path, capsys):
    """Three consecutive replay runs produce byte-identical stage JSONs,
    report JSONL, and Markdown, each in under 30 seconds."""
    trees = []
    for run in range(3):
        summary, elapsed = _run_analyze(tmp_path / f"run{run}", capsys)
        assert elapsed < 30.0, f"run {run} took {elapsed:.1f}s"
        report_dir = tmp_path / f"run{run}" / summary["report_id"]
        tree = {
            p.name: p.read_bytes()
            for p in sorted(report_dir.iterdir())
            if p.suffix in (".json", ".jsonl", ".md")
        }
        assert set(tree) == {
            "themes.json",
            "quotes.json",
            "subtopics.json",
            "mapping.json",
            "report.json",
            "report.jsonl",
            "report.md",
        }
        trees.append(tree)
    assert trees[0] == trees[1] == trees[2]
    _pass("deterministic end-to-end (3 byte-identical replay runs < 30 s each)")


def test_golden_prompts():
    """All five templates render byte-identical to the golden files."""
    library = PromptLibrary()
    for template_id, binding in CANONICAL.items():
        rendered = library.render(template_id, binding)
        golden = (GOLDEN / f"{template_id}.golden.txt").read_text(encoding="utf-8")
        assert rendered == golden, template_id
        assert ANCHORS[template_id] in rendered
    _pass("golden prompts (5 templates byte-identical, anchors present)")


def test_pipeline_invariants_on_replay(tmp_path):
    """Quote conservation, code validity, section-count conservation,
    exactly 9 themes and 9 subtopics, summaries <= 8 words or warned."""
    gateway = Gateway(ProviderConfig(mode="replay", fixture_dir=FIXTURES / "llm"))
    pipeline = Pipeline(gateway, CacheStore(tmp_path / "cache"), tmp_path / "reports")
    corpus = load_corpus(FIXTURES / "corpus" / "parenting.csv")

    themes = pipeline.generate_themes(corpus)
    assert len(themes) == 9

    job = pipeline.run_report_job(corpus, MAIN_THEME)
    assert job.phase == "done"
    report_dir = pipeline.report_dir(job.report_id)
    extracted = read_json(report_dir / "quotes.json")["payload"]["entries"]
    subtopics = read_json(report_dir / "subtopics.json")["payload"]["codes"]
    mapped = read_json(report_dir / "mapping.json")["payload"]["categorized_quotes"]
    report = read_json(report_dir / "report.json")

    assert len(mapped) == len(extracted)  # conservation, Uncategorized included
    assert [s["code"] for s in subtopics] == list(range(1, 10))
    for item in mapped:
        assert item["code"] == UNCATEGORIZED_CODE or 1 <= item["code"] <= 9
        if item["code"] >= 1:
            canonical = next(s["name"] for s in subtopics if s["code"] == item["code"])
            assert item["code_name"] == canonical
    assert report["totals"]["quotes"] == sum(
        s["quote_count"] for s in report["sections"]
    )
    warnings = report["provenance"]["warnings"]
    for entry in extracted:
        if len(entry["summary"].split()) > 8:
            assert any(entry["summary"] in w for w in warnings)
    _pass("pipeline invariants (conservation, code validity, 9 themes / 9 subtopics)")


def test_traceability_matches_brute_force(tmp_path):
    """verify_traceability flags equal an exhaustive (quote, thread) scan."""
    gateway = Gateway(ProviderConfig(mode="replay", fixture_dir=FIXTURES / "llm"))
    pipeline = Pipeline(gateway, CacheStore(tmp_path / "cache"), tmp_path / "reports")
    corpus = load_corpus(FIXTURES / "corpus" / "parenting.csv")
    normalized_threads = {t.thread_id: normalize_ws(t.text) for t in corpus.threads}

    checked = 0
    from conftest import ALT_THEME

    for theme in (MAIN_THEME, ALT_THEME):
        job = pipeline.run_report_job(corpus, theme)
        assert job.phase == "done"
        report = read_json(pipeline.report_dir(job.report_id) / "report.json")
        for section in report["sections"]:
            for entry in section["entries"]:
                containing = {
                    tid
                    for tid, text in normalized_threads.items()
                    if normalize_ws(entry["quote"]) in text
                }
                assert entry["traceable"] == (entry["source_id"] in containing)
                checked += 1
    assert checked > 50
    _pass(f"traceability oracle (exact match with brute force on {checked} quotes)")


def test_ingestion_round_trip_and_conservation(tmp_path):
    """CSV round trip over 1,000 adversarial threads; temporal order and
    conservation on the fixture dump."""
    rng = random.Random(424242)
    glyphs = 'word ,"\n\r\t\'é💬~-'
    threads = [
        DiscussionThread(
            thread_id=f"t{i}",
            subreddit="bulk",
            text="".join(rng.choice(glyphs) for _ in range(rng.randrange(0, 400))),
            comment_count=rng.randrange(0, 30),
            earliest_utc=rng.randrange(0, 10**9),
            latest_utc=rng.randrange(10**9, 2 * 10**9),
        )
        for i in range(1000)
    ]
    corpus = Corpus(dataset_id="bulk", source_label="bulk", threads=threads, ingested_at="x")
    loaded = load_corpus(write_corpus_csv(corpus, tmp_path / "bulk.csv"))
    assert loaded.threads == corpus.threads

    with open(FIXTURES / "archive" / "posts.ndjson", "rb") as pf, open(
        FIXTURES / "archive" / "comments.ndjson", "rb"
    ) as cf:
        parsed = parse_archive(pf, cf)
    result = aggregate_threads(parsed.posts, parsed.comments)
    assert len(parsed.posts) == len(result.corpus.threads) + result.duplicate_posts
    assert len(parsed.comments) == result.attached_comments + result.orphaned_comments
    assert parsed.skipped_posts == 1 and parsed.skipped_comments == 1

    grouped = {}
    for c in parsed.comments:
        grouped.setdefault(c.parent_post_id, []).append(c)
    for thread in result.corpus.threads:
        ordered = sorted(
            grouped.get(thread.thread_id, []), key=lambda c: (c.created_utc, c.comment_id)
        )
        cursor = 0
        for comment in ordered:
            index = thread.text.find(comment.body, cursor)
            assert index >= 0, "comments embedded out of chronological order"
            cursor = index
    _pass("ingestion (1,000-thread round trip, temporal order, conservation)")


def test_caching_immediate_access(tmp_path):
    """Second submission of an identical job: zero gateway calls and
    < 100 ms service-side latency."""
    state = AppState.build(tmp_path / "data", mode="replay", fixture_dir=FIXTURES / "llm")
    client = TestClient(create_app(state))
    upload = client.post(
        "/v1/datasets",
        files={
            "file": (
                "parenting.csv",
                (FIXTURES / "corpus" / "parenting.csv").read_bytes(),
                "text/csv",
            )
        },
    )
    dataset_id = upload.json()["dataset_id"]
    body = {
        "dataset_id": dataset_id,
        "theme": {"title": MAIN_THEME.title, "description": MAIN_THEME.description},
    }
    first = client.post("/v1/reports", json=body)
    assert first.status_code == 202
    deadline = time.time() + 30
    while time.time() < deadline:
        snapshot = client.get(f"/v1/jobs/{first.json()['job_id']}").json()
        if snapshot["phase"] in ("done", "failed"):
            break
        time.sleep(0.02)
    assert snapshot["phase"] == "done"

    calls_before = state.pipeline.gateway.call_count
    started = time.perf_counter()
    second = client.post("/v1/reports", json=body)
    latency = time.perf_counter() - started
    assert second.status_code == 200
    assert second.json()["phase"] == "done"
    assert second.json()["report_id"] == snapshot["report_id"]
    assert state.pipeline.gateway.call_count == calls_before, "warm hit must not call out"
    assert latency < 0.100, f"warm submission took {latency * 1000:.1f} ms"
    _pass(f"caching (warm resubmit: 0 gateway calls, {latency * 1000:.1f} ms)")


def test_throughput_envelope(tmp_path):
    """1,000 synthetic quotes through batching + parsing + report build
    with a zero-latency stub provider in under 10 seconds."""
    gateway = Gateway(ProviderConfig(mode="live"), transport=ScriptedModel())
    pipeline = Pipeline(gateway, CacheStore(tmp_path / "cache"), tmp_path / "reports")
    quotes = [
        QuoteEntry(
            quote=f"Synthetic observation {i} about municipal services and local "
            f"infrastructure priorities in district {i % 40}.",
            summary=f"observation {i} on services",
            source_id=f"t{i % 50}",
        )
        for i in range(1000)
    ]
    subtopics = [Subtopic(i, f"Facet {i}", f"pattern {i}") for i in range(1, 10)]

    started = time.monotonic()
    categorized = pipeline.map_quotes(quotes, subtopics, "district")
    report = build_report(
        quotes,
        subtopics,
        categorized,
        report_id="perf",
        dataset_id="perf",
        source_label="district",
        theme=MAIN_THEME,
        code_count=9,
        prompt_version=pipeline.prompt_version,
        model_id=pipeline.model_id,
        created_at="1970-01-01T00:00:00+00:00",
    )
    elapsed = time.monotonic() - started
    assert len(categorized) == 1000
    assert report.totals.quotes == 1000
    assert elapsed < 10.0, f"mapping 1,000 quotes took {elapsed:.1f}s"
    _pass(f"throughput envelope (1,000 quotes mapped + built in {elapsed:.2f} s)")


def test_cost_accounting(tmp_path):
    """The estimate over recorded fixture token counts reproduces the
    per-stage table and its summed total exactly."""
    gateway = Gateway(ProviderConfig(mode="replay", fixture_dir=FIXTURES / "llm"))
    pipeline = Pipeline(gateway, CacheStore(tmp_path / "cache"), tmp_path / "reports")
    corpus = load_corpus(FIXTURES / "corpus" / "parenting.csv")
    job = pipeline.run_report_job(corpus, MAIN_THEME)
    assert job.phase == "done"

    # recompute usage straight from the fixture files the run touched
    recomputed = {}
    for tag, digest in gateway.request_log:
        recorded = read_json(FIXTURES / "llm" / f"{digest}.json")["response"]
        prompt, completion = recomputed.get(tag, (0, 0))
        recomputed[tag] = (
            prompt + recorded["prompt_tokens"],
            completion + recorded["completion_tokens"],
        )
    usage = gateway.usage_by_tag
    assert {
        tag: (u.prompt_tokens, u.completion_tokens) for tag, u in usage.items()
    } == recomputed

    prices = PriceTable(input_per_million=30.0, output_per_million=60.0)
    estimate = estimate_cost(usage, prices)
    expected_per_stage = {
        tag: prompt / 1_000_000 * 30.0 + completion / 1_000_000 * 60.0
        for tag, (prompt, completion) in recomputed.items()
    }
    assert estimate.per_stage == expected_per_stage
    assert estimate.total == sum(expected_per_stage.values())
    _pass(
        "cost accounting (per-stage table from fixture tokens, "
        f"total={estimate.total:.4f} at 30/60 per 1M)"
    )


def test_api_contract(tmp_path):
    """Every /v1 endpoint passes schema validation; 404/409/422/502/503
    are each exercised."""
    import threading

    state = AppState.build(tmp_path / "data", mode="replay", fixture_dir=FIXTURES / "llm")
    client = TestClient(create_app(state))

    ids = {}
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
        assert response.status_code == 201
        ids[name] = response.json()["dataset_id"]

    listing = client.get("/v1/datasets")
    assert listing.status_code == 200
    from test_service import DATASETS_SCHEMA

    jsonschema.validate(listing.json(), DATASETS_SCHEMA)

    recommend = client.post("/v1/recommendations", json={"topic": "Climate Change"})
    assert recommend.status_code == 200
    jsonschema.validate(recommend.json(), SOURCES_SCHEMA)

    themes = client.post(f"/v1/datasets/{ids['parenting']}/themes")
    assert themes.status_code == 200
    jsonschema.validate(themes.json(), THEMES_SCHEMA)

    body = {
        "dataset_id": ids["parenting"],
        "theme": {"title": MAIN_THEME.title, "description": MAIN_THEME.description},
    }
    covered = {}

    # 409: concurrent duplicate submission attaches to the running job
    release = threading.Event()
    original = state.pipeline.extract_quotes

    def slow(*args, **kwargs):
        release.wait(timeout=10)
        return original(*args, **kwargs)

    state.pipeline.extract_quotes = slow
    try:
        submit = client.post("/v1/reports", json=body)
        assert submit.status_code == 202
        duplicate = client.post("/v1/reports", json=body)
        assert duplicate.status_code == 409
        jsonschema.validate(duplicate.json(), ERROR_SCHEMA)
        assert duplicate.json()["job_id"] == submit.json()["job_id"]
        covered[409] = True
    finally:
        release.set()
        state.pipeline.extract_quotes = original

    job_id = submit.json()["job_id"]
    deadline = time.time() + 30
    while time.time() < deadline:
        snapshot = client.get(f"/v1/jobs/{job_id}")
        jsonschema.validate(snapshot.json(), JOB_SCHEMA)
        if snapshot.json()["phase"] in ("done", "failed"):
            break
        time.sleep(0.02)
    assert snapshot.json()["phase"] == "done"
    report_id = snapshot.json()["report_id"]

    report = client.get(f"/v1/reports/{report_id}")
    assert report.status_code == 200
    jsonschema.validate(report.json(), REPORT_SCHEMA)

    download = client.get(f"/v1/reports/{report_id}/download?format=jsonl")
    assert download.status_code == 200
    assert len(download.text.strip().splitlines()) == 1 + report.json()["totals"]["quotes"]

    for status, response in (
        (404, client.get("/v1/jobs/ghost")),
        (422, client.post("/v1/recommendations", json={"topic": ""})),
        (502, client.post(f"/v1/datasets/{ids['badthemes']}/themes")),
        (503, client.post("/v1/recommendations", json={"topic": "never recorded topic"})),
    ):
        assert response.status_code == status, response.text
        jsonschema.validate(response.json(), ERROR_SCHEMA)
        covered[status] = True

    assert sorted(covered) == [404, 409, 422, 502, 503]
    _pass("API contract (schemas valid; 404/409/422/502/503 all exercised)")
