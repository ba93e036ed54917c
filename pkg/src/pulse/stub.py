"""Deterministic offline stand-in for a chat-completion provider.

Lets the full pipeline run (and record replay fixtures) with no network
and no API key: responses are synthesized from the request text itself,
so the same prompt always gets the same answer. A few content-triggered
quirks are built in to exercise the pipeline's recovery paths:

- a quote containing "heirloom" comes back with one word altered, so it
  fails traceability;
- a quote containing "scooter" is always miscoded (code 12);
- a quote containing "refund" is always omitted from mapping responses;
- a quote containing "marathon" gets a summary longer than 8 words;
- theme generation for the source label "badthemes" returns 7 themes.
"""

from __future__ import annotations

import hashlib
import json
import re
from typing import Dict, List, Tuple

from .batching import estimate_tokens
from .gateway import LlmResponse, PromptRequest

ALTER_MARKER = "heirloom"
MISCODE_MARKER = "scooter"
OMIT_MARKER = "refund"
LONG_SUMMARY_MARKER = "marathon"
BAD_THEMES_LABEL = "badthemes"

_STOPWORDS = {"for", "and", "the", "about", "with", "from", "this", "that", "their"}

_THEMES: Dict[str, List[Tuple[str, str]]] = {
    "parenting": [
        ("Internet safety for children", "risks kids face online"),
        ("Screen time boundaries at home", "how families ration device use"),
        ("Cyberbullying and peer pressure", "harassment children face in group chats"),
        ("Age limits for social apps", "when kids should get their first accounts"),
        ("Online privacy for minors", "what data platforms collect from children"),
        ("Gaming habits and spending", "loot boxes, allowances, and play time"),
        ("School device policies", "rules for tablets and phones in classrooms"),
        ("Sleep and late-night scrolling", "devices in bedrooms after bedtime"),
        ("Talking to kids about strangers online", "grooming risks and reporting"),
    ],
}

_CODES: Dict[str, List[Tuple[str, str]]] = {
    "parenting": [
        ("Screen time limits", "managing how long kids spend on devices"),
        ("Stranger danger online", "unwanted contact from unknown adults"),
        ("App age restrictions", "platform minimum ages and their enforcement"),
        ("Privacy and data collection", "what services learn about children"),
        ("Cyberbullying response", "handling harassment between peers"),
        ("Device-free routines", "meals, homework, and bedtime without screens"),
        ("Parental monitoring tools", "filters, trackers, and their tradeoffs"),
        ("Gaming and spending", "in-game purchases and play habits"),
        ("School technology rules", "classroom policies for devices"),
    ],
}

_ROW_RE = re.compile(r"\n?--- ROW thread_id=(\S+) ---\n")
_QUOTE_RE = re.compile(r"\n?--- QUOTE source_id=(\S*) ---\n")


def _stable_hash(text: str) -> int:
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:4], "big")


def _keywords(phrase: str) -> List[str]:
    return [
        w
        for w in re.findall(r"[a-z]+", phrase.casefold())
        if len(w) >= 4 and w not in _STOPWORDS
    ]


class ScriptedModel:
    """Callable transport: PromptRequest -> LlmResponse, fully offline."""

    def __call__(self, request: PromptRequest) -> LlmResponse:
        text = request.user_text
        if "Here is a list of subreddits:" in text:
            reply = self._recommend(text)
        elif "Generate a list of 9 themes" in text:
            reply = self._themes(text)
        elif "extract only the most relevant quotes" in text:
            reply = self._extract(text)
        elif "identify the top 9 most prevalent themes or codes" in text:
            reply = self._subtopics(text)
        elif "helping to categorize quotes" in text:
            reply = self._mapping(text)
        else:
            reply = "null"
        prompt_tokens = estimate_tokens(text) + (
            estimate_tokens(request.system_text) if request.system_text else 0
        )
        return LlmResponse(
            text=reply,
            prompt_tokens=prompt_tokens,
            completion_tokens=estimate_tokens(reply),
            provider_latency_ms=0,
        )

    # --- stage behaviors ---

    def _recommend(self, text: str) -> str:
        match = re.search(
            r"Here is a list of subreddits: (.*?)\. Based on the topic '(.*?)',",
            text,
            re.DOTALL,
        )
        if not match:
            return "\n"
        labels = [l.strip() for l in match.group(1).split(",") if l.strip()]
        words = _keywords(match.group(2))
        hits = [
            label
            for label in labels
            if any(w in label.casefold() for w in words)
        ]
        return ", ".join(hits) if hits else "\n"

    def _themes(self, text: str) -> str:
        match = re.search(r"related to the subreddit (.+?), each with a title", text)
        label = match.group(1).strip() if match else "general"
        key = label.casefold()
        if key == BAD_THEMES_LABEL:
            themes = [
                {"title": f"Sparse theme {i}", "description": f"placeholder slot {i}"}
                for i in range(1, 8)
            ]
        else:
            table = _THEMES.get(
                key,
                [
                    (f"Perspectives on {label} ({i})", f"angle {i} of the {label} discussions")
                    for i in range(1, 10)
                ],
            )
            themes = [{"title": t, "description": d} for t, d in table]
        return json.dumps({"themes": themes}, ensure_ascii=False)

    def _extract(self, text: str) -> str:
        focus = re.search(r"interested in is (.+?)\. Your task", text, re.DOTALL)
        words = _keywords(focus.group(1)) if focus else []
        parts = _ROW_RE.split(text)
        entries = []
        # parts: [preamble, id, body, id, body, ...]
        for i in range(1, len(parts) - 1, 2):
            body = parts[i + 1]
            picked = 0
            for sentence in re.split(r"(?<=[.!?])\s+|\n+", body):
                sentence = sentence.strip()
                if len(sentence) < 25 or sentence == "---":
                    continue
                low = sentence.casefold()
                if not any(w in low for w in words):
                    continue
                quote = sentence
                if ALTER_MARKER in low:
                    quote = quote.replace(ALTER_MARKER, f"treasured {ALTER_MARKER}", 1)
                if LONG_SUMMARY_MARKER in low:
                    summary = "a deliberately overlong summary that keeps going well past the limit"
                else:
                    summary = " ".join(sentence.split()[:6])
                entries.append({"quote": quote, "summary": summary})
                picked += 1
                if picked >= 2:
                    break
        if not entries:
            return "null"
        return json.dumps({"entries": entries}, ensure_ascii=False)

    def _subtopics(self, text: str) -> str:
        match = re.search(r"analyze summaries of (.+?) discussions", text)
        label = match.group(1).strip() if match else "general"
        table = _CODES.get(
            label.casefold(),
            [
                (f"Facet {i} of {label}", f"recurring pattern {i} in the summaries")
                for i in range(1, 10)
            ],
        )
        codes = [{"name": n, "description": d} for n, d in table]
        return json.dumps({"codes": codes}, ensure_ascii=False)

    def _mapping(self, text: str) -> str:
        code_names: Dict[int, str] = {}
        codes_block = re.search(r"Codes:\n(.*?)\n\nQuotes:", text, re.DOTALL)
        if codes_block:
            for line in codes_block.group(1).splitlines():
                m = re.match(r"(\d+)\. (.*?): ", line)
                if m:
                    code_names[int(m.group(1))] = m.group(2)
        n_codes = max(code_names) if code_names else 9

        quotes_block = text[text.index("Quotes:") :] if "Quotes:" in text else ""
        parts = _QUOTE_RE.split(quotes_block)
        categorized = []
        for i in range(1, len(parts) - 1, 2):
            source_id, quote = parts[i], parts[i + 1].strip()
            low = quote.casefold()
            if OMIT_MARKER in low:
                continue
            if MISCODE_MARKER in low:
                code = n_codes + 3
                name = "Out of range"
            else:
                code = _stable_hash(" ".join(quote.split())) % n_codes + 1
                # occasionally echo a neighboring code's name: the
                # pipeline is expected to reconcile names itself
                if _stable_hash(quote) % 5 == 2:
                    name = code_names.get(code % n_codes + 1, "")
                else:
                    name = code_names.get(code, "")
            categorized.append(
                {
                    "quote": quote,
                    "source_id": source_id,
                    "codes": [{"code": code, "code_name": name}],
                }
            )
        return json.dumps({"categorized_quotes": categorized}, ensure_ascii=False)
