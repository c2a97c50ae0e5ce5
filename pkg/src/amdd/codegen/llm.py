"""Chat-completion client for the LLM backend.

The bearer token comes from ``AMDD_LLM_TOKEN`` and is scrubbed from every
log line and transcript this module writes.
"""

from __future__ import annotations

import json
import os
import re
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable

import httpx

from amdd.codegen.base import DIALECT_EXTENSIONS, GenerationConfig, GenerationResult, SourceUnit
from amdd.codegen.ir import AgentProgramIR, program_from_dict
from amdd.codegen.prompt import PromptBundle
from amdd.errors import ExtractionError, GenerationError, TransportError

TOKEN_ENV = "AMDD_LLM_TOKEN"
REDACTED = "[redacted]"


@dataclass(frozen=True)
class LlmEndpointConfig:
    base_url: str
    model: str
    temperature: float = 0.0
    max_retries: int = 3
    timeout: float = 120.0
    backoff: float = 1.0

    def __post_init__(self) -> None:
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")

    @property
    def url(self) -> str:
        return self.base_url.rstrip("/") + "/chat/completions"


def _scrub(text: str, token: str) -> str:
    return text.replace(token, REDACTED) if token else text


def request_messages(bundle: PromptBundle) -> list[dict[str, str]]:
    return [
        {"role": "system", "content": bundle.directives},
        {"role": "user", "content": bundle.text()},
    ]


def call_endpoint(bundle: PromptBundle, endpoint: LlmEndpointConfig, *,
                  transport: httpx.BaseTransport | None = None,
                  sleep: Callable[[float], None] = time.sleep,
                  token: str | None = None) -> tuple[str, list[str]]:
    """POST the bundle and return (response content, log lines).

    Server errors (5xx) and transport failures are retried up to
    ``endpoint.max_retries`` times with exponential backoff; other HTTP
    errors fail immediately.
    """
    token = token if token is not None else os.environ.get(TOKEN_ENV, "")
    if not token:
        raise GenerationError(f"no auth token: set {TOKEN_ENV}")
    payload = {
        "model": endpoint.model,
        "temperature": endpoint.temperature,
        "messages": request_messages(bundle),
    }
    headers = {"Authorization": f"Bearer {token}"}
    log: list[str] = [f"request url={endpoint.url} model={endpoint.model} prompt={bundle.checksum}"]
    attempts = endpoint.max_retries + 1
    with httpx.Client(transport=transport, timeout=endpoint.timeout) as client:
        for attempt in range(1, attempts + 1):
            try:
                resp = client.post(endpoint.url, json=payload, headers=headers)
            except httpx.TransportError as exc:
                log.append(f"attempt {attempt}: transport error {type(exc).__name__}")
                failure = f"transport error: {_scrub(str(exc), token)}"
            else:
                log.append(f"attempt {attempt}: status {resp.status_code} bytes={len(resp.content)}")
                if resp.status_code < 400:
                    return _content(resp, token), [_scrub(line, token) for line in log]
                failure = f"HTTP {resp.status_code}"
                if resp.status_code < 500:
                    raise TransportError(f"endpoint rejected the request: {failure}")
            if attempt < attempts:
                sleep(endpoint.backoff * 2 ** (attempt - 1))
    raise TransportError(f"gave up after {attempts} attempt(s): {failure}")


def _content(resp: httpx.Response, token: str) -> str:
    try:
        return resp.json()["choices"][0]["message"]["content"]
    except (ValueError, KeyError, IndexError, TypeError):
        raise ExtractionError("response is not a chat completion", _scrub(resp.text, token)) from None


_FENCE_RE = re.compile(r"^```([\w+-]*)[^\n]*\n(.*?)^```[ \t]*$", re.MULTILINE | re.DOTALL)
_FILENAME_RE = re.compile(r"([\w.-]+\.[A-Za-z0-9]+)")
_CLASS_RE = re.compile(r"\bclass\s+(\w+)")


def _preceding_line(text: str, pos: int) -> str:
    for line in reversed(text[:pos].splitlines()):
        if line.strip():
            return line.strip()
    return ""


def extract_units(text: str, dialect: str) -> tuple[list[SourceUnit], list[AgentProgramIR]]:
    """Split a response into source files and any embedded IR programs.

    A block's filename comes from the line just before its fence when that
    line names a file; otherwise it is ``agent_<class>.<ext>``.
    """
    units: list[SourceUnit] = []
    programs: list[AgentProgramIR] = []
    ext_default = DIALECT_EXTENSIONS.get(dialect, "txt")
    used: set[str] = set()
    for n, m in enumerate(_FENCE_RE.finditer(text), start=1):
        lang, body = m.group(1).lower(), m.group(2)
        if lang == "json":
            try:
                programs.append(program_from_dict(json.loads(body)))
                continue
            except (ValueError, GenerationError):
                pass
        named = _FILENAME_RE.search(_preceding_line(text, m.start()))
        if named:
            filename = named.group(1).strip(".")
        else:
            cls = _CLASS_RE.search(body)
            stem = cls.group(1).lower() if cls else f"unit{n}"
            filename = f"agent_{stem}.{ext_default if lang != 'json' else 'json'}"
        base, k = filename, 2
        while filename in used:
            stem, dot, ext = base.rpartition(".")
            filename = f"{stem}_{k}{dot}{ext}"
            k += 1
        used.add(filename)
        units.append(SourceUnit(filename, body))
    if not units and not programs:
        raise ExtractionError("response contains no fenced code blocks", text)
    return units, programs


def transcript_path(artifacts: Path, bundle: PromptBundle) -> Path:
    return artifacts / "llm" / f"{bundle.checksum}.log"


def write_transcript(path: Path, bundle: PromptBundle, endpoint: LlmEndpointConfig,
                     log: list[str], response: str, token: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    request = {"model": endpoint.model, "temperature": endpoint.temperature,
               "messages": request_messages(bundle)}
    body = [
        f"timestamp: {stamp}",
        "--- request",
        json.dumps(request, indent=2, sort_keys=True),
        "--- log",
        *log,
        "--- response",
        response,
    ]
    path.write_text(_scrub("\n".join(body) + "\n", token), encoding="utf-8")


def generate_llm(bundle: PromptBundle, endpoint: LlmEndpointConfig, cfg: GenerationConfig, *,
                 transport: httpx.BaseTransport | None = None,
                 sleep: Callable[[float], None] = time.sleep,
                 artifacts: Path | None = None) -> GenerationResult:
    """Send the bundle and extract source units (and IR programs, if any).

    The transcript is written under ``artifacts`` when given, also on
    extraction failure so the raw response is never lost.
    """
    token = os.environ.get(TOKEN_ENV, "")
    content, log = call_endpoint(bundle, endpoint, transport=transport, sleep=sleep, token=token)
    content = _scrub(content, token)
    path = transcript_path(artifacts, bundle) if artifacts is not None else None
    if path is not None:
        write_transcript(path, bundle, endpoint, log, content, token)
    units, programs = extract_units(content, cfg.dialect)
    log.append(f"extracted {len(units)} source unit(s), {len(programs)} program(s)")
    programs.sort(key=lambda p: p.agent_name)
    return GenerationResult(tuple(programs), tuple(units), "\n".join(log) + "\n")
