"""Chat-model gateway: prompt templates, sampling, caching, retries, mocks.

Endpoints are addressed by an identifier string:

* ``mock:/path/to/script.json`` — deterministic scripted responses for
  tests and reproducible pipeline runs.  The script maps a literal
  prompt (or the sha256 hex digest of a prompt) to a list of
  completions.
* ``https://...`` — a chat-completions style HTTP endpoint; the API key
  is read from the environment variable named by the spec.

Every (model, prompt, sampling) call is cached on disk keyed by content
hash; cache hits never touch the network.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

from .errors import GatewayError, TransportError
from .formulas import FormulaAst, render_formula
from .tables import Table, cell_to_text

TEMPLATE_IDS = ("ANNOTATE", "VO_OUTPUT", "VP_PROGRAM", "VC_CLASSIFY", "NL2F_PREDICT")

DEFAULT_PREVIEW_ROWS = 20


@dataclass(frozen=True)
class ChatModelSpec:
    endpoint: str
    model: str
    temperature: float = 0.0
    n: int = 1
    max_tokens: int = 1024
    api_key_env: str = "NL2F_API_KEY"

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature must be in [0, 2]")

    def sampling(self, temperature: float, n: int) -> "ChatModelSpec":
        return replace(self, temperature=temperature, n=n)


@dataclass(frozen=True)
class PromptTemplate:
    template_id: str
    text: str

    def render(self, **values) -> str:
        return self.text.format(**values)


def load_template(template_id: str, template_dir=None) -> PromptTemplate:
    """Load a prompt template; template_dir overrides the packaged defaults."""
    if template_id not in TEMPLATE_IDS:
        raise GatewayError(f"unknown template id {template_id!r}")
    if template_dir is not None:
        text = (Path(template_dir) / f"{template_id}.txt").read_text(encoding="utf-8")
    else:
        text = (
            resources.files("nl2f").joinpath(f"prompts/{template_id}.txt")
        ).read_text(encoding="utf-8")
    return PromptTemplate(template_id, text)


def render_table_preview(table: Table, max_rows: int = DEFAULT_PREVIEW_ROWS) -> str:
    """Deterministic markdown-style grid with at most max_rows data rows."""
    if max_rows < 1:
        raise ValueError("max_rows must be >= 1")
    headers = table.headers
    lines = [
        "| " + " | ".join(headers) + " |",
        "| " + " | ".join("---" for _ in headers) + " |",
    ]
    for r in range(min(table.row_count, max_rows)):
        lines.append("| " + " | ".join(cell_to_text(c) for c in table.row(r)) + " |")
    return "\n".join(lines)


def _cache_key(spec: ChatModelSpec, prompt: str) -> str:
    payload = json.dumps(
        {
            "model": spec.model,
            "prompt": prompt,
            "temperature": spec.temperature,
            "n": spec.n,
            "max_tokens": spec.max_tokens,
        },
        sort_keys=True,
        ensure_ascii=False,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class Gateway:
    """Shared completion client with an on-disk response cache."""

    def __init__(self, cache_dir=None, max_attempts: int = 4, backoff_base: float = 0.5):
        if cache_dir is None:
            cache_dir = os.environ.get("NL2F_CACHE_DIR")
        self.cache_dir = Path(cache_dir) if cache_dir else None
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self.network_calls = 0
        self._mock_scripts = {}

    # -- cache ---------------------------------------------------------------

    def _cache_path(self, key: str) -> Path | None:
        if self.cache_dir is None:
            return None
        return self.cache_dir / f"{key}.json"

    def _cache_read(self, key: str):
        path = self._cache_path(key)
        if path is None or not path.exists():
            return None
        return json.loads(path.read_text(encoding="utf-8"))

    def _cache_write(self, key: str, completions: list) -> None:
        path = self._cache_path(key)
        if path is None:
            return
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp")
        tmp.write_text(
            json.dumps(completions, ensure_ascii=False), encoding="utf-8"
        )
        tmp.replace(path)

    # -- backends ------------------------------------------------------------

    def _mock_script(self, script_path: str) -> dict:
        if script_path not in self._mock_scripts:
            try:
                self._mock_scripts[script_path] = json.loads(
                    Path(script_path).read_text(encoding="utf-8")
                )
            except OSError as exc:
                raise GatewayError(f"cannot read mock script: {exc}")
        return self._mock_scripts[script_path]

    def _complete_mock(self, spec: ChatModelSpec, prompt: str) -> list:
        script = self._mock_script(spec.endpoint[len("mock:"):])
        responses = script.get(prompt)
        if responses is None:
            responses = script.get(hashlib.sha256(prompt.encode("utf-8")).hexdigest())
        if responses is None:
            raise GatewayError(
                f"no scripted response for prompt starting {prompt[:60]!r}"
            )
        if isinstance(responses, str):
            responses = [responses]
        if not responses:
            raise GatewayError("mock script entry is empty")
        return [responses[i % len(responses)] for i in range(spec.n)]

    def _complete_http(self, spec: ChatModelSpec, prompt: str) -> list:
        import requests

        api_key = os.environ.get(spec.api_key_env)
        if not api_key:
            raise GatewayError(
                f"missing credentials: environment variable {spec.api_key_env} unset"
            )
        body = {
            "model": spec.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": spec.temperature,
            "n": spec.n,
            "max_tokens": spec.max_tokens,
        }
        last_error = None
        for attempt in range(1, self.max_attempts + 1):
            try:
                self.network_calls += 1
                resp = requests.post(
                    spec.endpoint,
                    json=body,
                    headers={"Authorization": f"Bearer {api_key}"},
                    timeout=120,
                )
                if resp.status_code in (429, 500, 502, 503, 504):
                    last_error = f"HTTP {resp.status_code}"
                elif resp.status_code != 200:
                    raise GatewayError(f"endpoint error HTTP {resp.status_code}: {resp.text[:200]}")
                else:
                    data = resp.json()
                    return [c["message"]["content"] for c in data["choices"]]
            except requests.RequestException as exc:
                last_error = str(exc)
            if attempt < self.max_attempts:
                time.sleep(self.backoff_base * (2 ** (attempt - 1)))
        raise TransportError(f"transport failure: {last_error}", self.max_attempts)

    # -- public API ----------------------------------------------------------

    def complete(self, spec: ChatModelSpec, prompt: str) -> list:
        """Return exactly spec.n completions, serving repeats from cache."""
        key = _cache_key(spec, prompt)
        cached = self._cache_read(key)
        if cached is not None:
            return cached
        if spec.endpoint.startswith("mock:"):
            completions = self._complete_mock(spec, prompt)
        else:
            completions = self._complete_http(spec, prompt)
        self._cache_write(key, completions)
        return completions


def generate_utterance(
    gateway: Gateway,
    spec: ChatModelSpec,
    table: Table,
    formula: FormulaAst,
    template_dir=None,
    max_rows: int = DEFAULT_PREVIEW_ROWS,
) -> str:
    """Produce a synthetic natural-language annotation for (table, formula)."""
    template = load_template("ANNOTATE", template_dir)
    prompt = template.render(
        table=render_table_preview(table, max_rows),
        formula=render_formula(formula),
    )
    completion = gateway.complete(replace(spec, n=1), prompt)[0]
    utterance = completion.strip().strip('"').strip()
    if not utterance:
        raise GatewayError("annotation completion was empty")
    return utterance
