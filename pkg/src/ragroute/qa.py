"""Prompt assembly and answer-generation clients.

Templates live in an editable JSON asset keyed by path. The DB and Hybrid
templates carry an instruction that retrieved database facts must not be
altered. Clients come in three flavors: a live HTTP chat-completion client,
a scripted pattern table for tests, and a replay client that serves
pre-computed per-(query, path) answers.
"""

from __future__ import annotations

import json
import os
import re
import time
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path as FsPath
from typing import Callable, Optional

from .errors import ClientError, MissingFixture, TemplateMissing
from .evidence import EvidenceBundle
from .paths import Path


def count_tokens(text: str, tokenizer: Optional[Callable[[str], int]] = None) -> int:
    """Provider tokenizer when supplied, whitespace-token count otherwise."""
    if tokenizer is not None:
        return tokenizer(text)
    return len(text.split())


@dataclass(frozen=True)
class Prompt:
    path: Path
    system_text: str
    user_text: str
    token_count: int


@dataclass(frozen=True)
class AnswerRecord:
    query_id: str
    path: Path
    answer_text: str
    prompt_tokens: int
    completion_tokens: int
    generation_latency: float


@lru_cache(maxsize=1)
def default_templates() -> dict:
    with resources.files("ragroute.assets").joinpath("prompts.json").open() as fh:
        return json.load(fh)


def build_prompt(
    query: str,
    bundle: EvidenceBundle,
    templates: Optional[dict] = None,
    tokenizer: Optional[Callable[[str], int]] = None,
) -> Prompt:
    """Deterministic prompt assembly from templates and the evidence bundle."""
    templates = templates if templates is not None else default_templates()
    key = bundle.path.value
    try:
        system_text = templates["system"][key]
        user_template = templates["user"][key]
    except KeyError as exc:
        raise TemplateMissing(f"no template for path {key}") from exc

    passages = "\n\n".join(
        f"[{p.doc_id}] {p.text}" for p in bundle.passages
    )
    facts = "\n\n".join(f.rendered for f in bundle.facts)
    user_text = user_template.format(
        question=query,
        passages=passages if passages else "(no passages retrieved)",
        facts=facts if facts else "(no facts retrieved)",
        immutability_instruction=templates.get("immutability_instruction", ""),
    )
    return Prompt(
        path=bundle.path,
        system_text=system_text,
        user_text=user_text,
        token_count=count_tokens(system_text + " " + user_text, tokenizer),
    )


class ReplayClient:
    """Serves pre-computed answers keyed by (query_id, path)."""

    def __init__(self, fixture: dict[tuple[str, Path], dict]):
        self.fixture = fixture

    @classmethod
    def from_file(cls, path: FsPath | str) -> "ReplayClient":
        fixture = {}
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                rec = json.loads(line)
                fixture[(rec["query_id"], Path(rec["path"]))] = rec
        return cls(fixture)

    def complete(self, prompt: Prompt, query_id: Optional[str] = None):
        if query_id is None:
            raise MissingFixture("replay client requires a query_id")
        rec = self.fixture.get((query_id, prompt.path))
        if rec is None:
            raise MissingFixture(
                f"no replay answer for ({query_id}, {prompt.path.value})"
            )
        return rec["answer_text"], int(rec.get("completion_tokens", 0))

    def answer_for(self, query_id: str, path: Path) -> Optional[str]:
        rec = self.fixture.get((query_id, path))
        return rec["answer_text"] if rec else None


class ScriptedClient:
    """Pattern -> answer table; first matching pattern on the user text wins."""

    def __init__(self, patterns: list[tuple[str, str]]):
        self.patterns = [(re.compile(p), a) for p, a in patterns]

    def complete(self, prompt: Prompt, query_id: Optional[str] = None):
        for pattern, answer in self.patterns:
            if pattern.search(prompt.user_text):
                return answer, count_tokens(answer)
        raise ClientError("no scripted pattern matches the prompt")


class HttpChatClient:
    """Provider-agnostic chat-completion HTTP client.

    Reads the API key from the environment; endpoint and model are
    constructor arguments.
    """

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key_env: str = "RAGROUTE_API_KEY",
        timeout: float = 60.0,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key = os.environ.get(api_key_env, "")
        self.timeout = timeout

    def complete(self, prompt: Prompt, query_id: Optional[str] = None):
        import httpx

        payload = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": prompt.system_text},
                {"role": "user", "content": prompt.user_text},
            ],
        }
        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            resp = httpx.post(
                f"{self.base_url}/chat/completions",
                json=payload,
                headers=headers,
                timeout=self.timeout,
            )
            resp.raise_for_status()
            body = resp.json()
            text = body["choices"][0]["message"]["content"]
            completion_tokens = body.get("usage", {}).get("completion_tokens", 0)
        except Exception as exc:
            raise ClientError(f"chat completion failed: {exc}") from exc
        return text, int(completion_tokens)


def answer(prompt: Prompt, client, query_id: Optional[str] = None) -> AnswerRecord:
    """Invoke a client and wrap the result with timing and token accounting."""
    start = time.perf_counter()
    text, completion_tokens = client.complete(prompt, query_id)
    return AnswerRecord(
        query_id=query_id or "",
        path=prompt.path,
        answer_text=text,
        prompt_tokens=prompt.token_count,
        completion_tokens=completion_tokens,
        generation_latency=time.perf_counter() - start,
    )
