#!/usr/bin/env python3
"""Regenerate the checked-in test fixtures.

Everything is seeded, so reruns produce identical bytes:
  tests/fixtures/archive/   raw dump files (ndjson + zst) for ingestion
  tests/fixtures/corpus/    corpus CSVs (parenting, climatechange, badthemes)
  tests/fixtures/llm/       recorded completion fixtures for replay mode

Run from the repository root:  python scripts/make_fixtures.py
"""

from __future__ import annotations

import json
import random
import shutil
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from pulse import _zstd  # noqa: E402
from pulse.cache import CacheStore  # noqa: E402
from pulse.errors import WrongCardinality  # noqa: E402
from pulse.gateway import Gateway, ProviderConfig  # noqa: E402
from pulse.ingest import (  # noqa: E402
    aggregate_threads,
    parse_archive,
    write_corpus_csv,
)
from pulse.pipeline import Pipeline, Theme  # noqa: E402
from pulse.stub import ScriptedModel  # noqa: E402

FIXTURES = ROOT / "tests" / "fixtures"

SEED = 20240501

MAIN_THEME = Theme(
    title="Internet safety for children",
    description="risks kids face online",
    origin="user_defined",
)
ALT_THEME = Theme(
    title="Family keepsakes online",
    description="digitizing family memories",
    origin="user_defined",
)

TOPIC_CLIMATE = "Climate Change"
TOPIC_PARENTING = "Parenting teens online"
TOPIC_NO_MATCH = "quantum basket weaving"

ON_TOPIC = [
    "I worry every day about internet safety for my two kids.",
    "My children found a disturbing video even with every filter on.",
    "We set up parental controls after our son met a stranger online.",
    "The school sent home a letter about internet safety basics.",
    "Our children lost sleep scrolling well past midnight again.",
    "I think internet safety talks should start before first grade.",
    "A classmate shared my daughter's photo online without asking her.",
    "Teaching children to question what they read online takes years.",
    "My son's class group chat turned mean and the children hid it from us.",
    "We finally wrote an internet contract and both children signed it.",
    "Grandma keeps posting our children's pictures without checking with us.",
    "The router schedule cut late night streaming and the children adjusted fast.",
    "An ad profiled my daughter by age and the children noticed before I did.",
    "Our children trade game passwords like playground cards and it scares me.",
    "I audited app permissions and explained each one to the children.",
    "The pediatrician asked about internet habits before asking about sleep.",
    "My children video call their cousins overseas every single weekend.",
    "One strange message taught my children more about safety than any lecture.",
    "The library runs a free internet safety workshop for families each month.",
    "We moved the computer into the kitchen so the children browse in the open.",
]

# each appears exactly once; they steer the scripted model's edge paths
SPECIAL_MISCODE = "We bought a scooter so the children play outside more than online."
SPECIAL_OMIT = "After the refund mess my kids finally understood internet safety."
SPECIAL_LONG = "Finishing a marathon was easier than managing my children's internet habits."
SPECIAL_ALTER = "Our family heirloom scanning project moved online last spring."

OFF_TOPIC = [
    "My tomato plants finally survived the frost this year.",
    "We repainted the hallway a warm shade of amber.",
    "The bread recipe needs a longer second rise than stated.",
    "Carpool schedules are chaos the week after a holiday.",
    "The dishwasher died mid-cycle and flooded the mat.",
    "I swapped the winter tires a month too early again.",
    "Our garden compost bin attracted a very bold raccoon.",
    "The soccer league moved practice to the far field.",
    "I batch cook soup on Sundays and freeze half.",
    "The hardware store finally restocked the hinge I needed.",
    "A neighbor lent us a ladder for the gutter cleanup.",
    "The piano tuner is booked out until next month.",
]

CLIMATE_SENTENCES = [
    "The levee project finally got funded after the spring flood.",
    "Our town collects rain data with school sensors now.",
    "Heat days closed the stadium twice this summer.",
    "The transit authority added electric buses on two lines.",
    "Insurance quotes doubled for houses near the creek.",
]


def _post(pid: str, subreddit: str, title: str, selftext: str, created: int, author: str) -> dict:
    return {
        "id": pid,
        "subreddit": subreddit,
        "title": title,
        "selftext": selftext,
        "created_utc": created,
        "author": author,
    }


def _comment(cid: str, pid: str, body: str, created: int, author: str) -> dict:
    return {
        "id": cid,
        "link_id": f"t3_{pid}",
        "body": body,
        "created_utc": created,
        "author": author,
    }


def build_parenting_archive(rng: random.Random):
    """50 posts; the last 20 are fully off-topic so the final extraction
    batch yields a null response."""
    posts, comments = [], []
    specials = [SPECIAL_MISCODE, SPECIAL_OMIT, SPECIAL_LONG, SPECIAL_ALTER]
    special_slots = {5: 0, 12: 1, 19: 2, 26: 3}  # post index -> special index
    base = 1_600_000_000
    cid = 0
    for i in range(50):
        pid = f"pp{i + 1:02d}"
        created = base + i * 86_400 + rng.randrange(0, 3_600)
        on_topic = i < 30
        pool = ON_TOPIC if on_topic else OFF_TOPIC
        title = rng.choice(pool).rstrip(".") + "?"
        body_sentences = rng.sample(pool, k=3 if on_topic else 2)
        if i in special_slots:
            # lead with the special sentence (the scripted model extracts at
            # most two quotes per row) and keep the title out of its way
            title = rng.choice(OFF_TOPIC).rstrip(".") + "?"
            body_sentences.insert(0, specials[special_slots[i]])
        selftext = " ".join(body_sentences)
        posts.append(_post(pid, "parenting", title, selftext, created, f"user{i + 1:03d}"))
        # comment timestamps shuffled in file order; ingestion re-sorts them
        n_comments = rng.randrange(2, 6)
        offsets = rng.sample(range(100, 90_000), k=n_comments)
        for offset in offsets:
            cid += 1
            pool2 = pool if rng.random() < 0.7 else OFF_TOPIC
            text = " ".join(rng.sample(pool2, k=2))
            comments.append(
                _comment(f"cc{cid:04d}", pid, text, created + offset, f"user{rng.randrange(1, 200):03d}")
            )
    # one duplicate post id (dropped with a count at aggregation)
    posts.append(_post("pp07", "parenting", "Duplicate crosspost?", "Posted twice by mistake.", base, "user007"))
    # one orphaned comment (parent never ingested)
    comments.append(_comment("cc9999", "ppmissing", "Replying to a deleted post.", base + 50, "user199"))
    return posts, comments


def write_archive(posts, comments, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    post_lines = [json.dumps(p, sort_keys=True, ensure_ascii=False) for p in posts]
    comment_lines = [json.dumps(c, sort_keys=True, ensure_ascii=False) for c in comments]
    # one deliberately truncated record per file: parsers must skip, not abort
    post_lines.append('{"id": "ppbroken", "subreddit": "parenting", "title": "tru')
    comment_lines.append('{"id": "ccbroken", "link_id": "t3_pp01", "bo')
    posts_text = "\n".join(post_lines) + "\n"
    comments_text = "\n".join(comment_lines) + "\n"
    (out_dir / "posts.ndjson").write_text(posts_text, encoding="utf-8")
    (out_dir / "comments.ndjson").write_text(comments_text, encoding="utf-8")
    (out_dir / "posts.ndjson.zst").write_bytes(_zstd.compress(posts_text.encode("utf-8")))
    (out_dir / "comments.ndjson.zst").write_bytes(_zstd.compress(comments_text.encode("utf-8")))


def build_small_corpus(label: str, sentences, count: int, rng: random.Random):
    posts, comments = [], []
    base = 1_650_000_000
    for i in range(count):
        pid = f"{label[:2]}{i + 1:02d}"
        title = rng.choice(sentences).rstrip(".") + "?"
        body = " ".join(rng.sample(sentences, k=min(2, len(sentences))))
        posts.append(_post(pid, label, title, body, base + i * 3_600, f"{label}{i}"))
        comments.append(
            _comment(f"{label[:2]}c{i + 1:02d}", pid, rng.choice(sentences), base + i * 3_600 + 60, f"{label}x{i}")
        )
    return posts, comments


def main() -> int:
    rng = random.Random(SEED)
    if FIXTURES.exists():
        shutil.rmtree(FIXTURES)
    (FIXTURES / "llm").mkdir(parents=True)

    # --- archives and corpora ---
    posts, comments = build_parenting_archive(rng)
    write_archive(posts, comments, FIXTURES / "archive")
    with open(FIXTURES / "archive" / "posts.ndjson", "rb") as pf, open(
        FIXTURES / "archive" / "comments.ndjson", "rb"
    ) as cf:
        parsed = parse_archive(pf, cf, "ndjson")
    aggregate = aggregate_threads(
        parsed.posts, parsed.comments, dataset_id="parenting", source_label="parenting"
    )
    corpus = aggregate.corpus
    write_corpus_csv(corpus, FIXTURES / "corpus" / "parenting.csv")
    print(
        f"parenting corpus: {len(corpus.threads)} threads, "
        f"{aggregate.attached_comments} comments attached, "
        f"{aggregate.orphaned_comments} orphaned, "
        f"{aggregate.duplicate_posts} duplicate posts, "
        f"{parsed.skipped_posts}+{parsed.skipped_comments} lines skipped"
    )

    def records_to_corpus(raw_posts, raw_comments, label):
        import io

        post_bytes = io.BytesIO(
            "".join(json.dumps(p, sort_keys=True) + "\n" for p in raw_posts).encode()
        )
        comment_bytes = io.BytesIO(
            "".join(json.dumps(c, sort_keys=True) + "\n" for c in raw_comments).encode()
        )
        small = parse_archive(post_bytes, comment_bytes, "ndjson")
        return aggregate_threads(
            small.posts, small.comments, dataset_id=label, source_label=label
        ).corpus

    cl_posts, cl_comments = build_small_corpus("climatechange", CLIMATE_SENTENCES, 5, rng)
    climate = records_to_corpus(cl_posts, cl_comments, "climatechange")
    write_corpus_csv(climate, FIXTURES / "corpus" / "climatechange.csv")

    bt_posts, bt_comments = build_small_corpus("badthemes", OFF_TOPIC, 3, rng)
    badthemes = records_to_corpus(bt_posts, bt_comments, "badthemes")
    write_corpus_csv(badthemes, FIXTURES / "corpus" / "badthemes.csv")

    # --- record completion fixtures ---
    gateway = Gateway(
        ProviderConfig(mode="record", fixture_dir=FIXTURES / "llm"),
        transport=ScriptedModel(),
    )
    with tempfile.TemporaryDirectory() as tmp:
        tmp_path = Path(tmp)
        pipeline = Pipeline(
            gateway, CacheStore(tmp_path / "cache"), reports_root=tmp_path / "reports"
        )

        catalog = sorted([badthemes.source_label, climate.source_label, corpus.source_label])
        for topic in (TOPIC_CLIMATE, TOPIC_PARENTING, TOPIC_NO_MATCH):
            print(f"recommend {topic!r}: {pipeline.recommend_sources(topic, catalog)}")
        print(
            f"recommend 2-dataset {TOPIC_CLIMATE!r}: "
            f"{pipeline.recommend_sources(TOPIC_CLIMATE, sorted([climate.source_label, corpus.source_label]))}"
        )
        big_catalog = [f"niche{i:03d}" for i in range(249)] + [climate.source_label]
        print(
            f"recommend big catalog: {pipeline.recommend_sources(TOPIC_CLIMATE, big_catalog)}"
        )

        print(f"themes parenting: {len(pipeline.generate_themes(corpus))}")
        try:
            pipeline.generate_themes(badthemes)
            print("ERROR: badthemes unexpectedly produced 9 themes")
            return 1
        except WrongCardinality as exc:
            print(f"themes badthemes: {exc}")

        for theme in (MAIN_THEME, ALT_THEME):
            job = pipeline.run_report_job(corpus, theme)
            assert job.phase == "done", job.error
            from pulse.jsonio import read_json

            totals = read_json(
                pipeline.report_dir(job.report_id) / "report.json"
            )["totals"]
            print(
                f"job {theme.title!r}: report {job.report_id}, "
                f"warnings={len(job.warnings)}, totals={totals}"
            )

    fixture_files = sorted((FIXTURES / "llm").glob("*.json"))
    nulls = sum(
        1 for f in fixture_files if json.loads(f.read_text())["response"]["text"] == "null"
    )
    print(f"recorded {len(fixture_files)} completion fixtures ({nulls} null responses)")
    assert nulls >= 1, "expected at least one null extraction batch"
    return 0


if __name__ == "__main__":
    sys.exit(main())
