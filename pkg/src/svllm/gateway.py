"""Chat-completion gateway: one remote adapter plus deterministic mocks.

Mocks are pure functions of (bundle, config seed), need no network, and
exist so the whole pipeline can be driven and verified offline:

  MockEcho     answers with the sample's true bin from an injected map
  MockNoisy    true bin + seeded gaussian noise, rounded and clamped
  MockScripted fixed responses keyed by (sample, task, stage)
  MockHash     stable pseudo-answers derived from the bundle digest

The gateway retries transport failures with exponential backoff and can
persist every exchange as JSONL for replay and audit.
"""

from __future__ import annotations

import json
import random
import re
import threading
import time
from dataclasses import dataclass
from pathlib import Path

from .binning import BinLabel, BinScale
from .dataset import PredictionRecord
from .errors import ConfigError, GatewayError, ParseError
from .prompts import (AblationFlags, PromptBundle, Rationale, STAGE_RATIONALE,
                      render_answer_prompt, render_rationale_prompt)
from .retrieval.types import GeoContext
from .tasks import IndicatorTask

PROVIDERS = ("remote-chat", "mock-echo", "mock-noisy", "mock-scripted", "mock-hash")


@dataclass
class ModelConfig:
    provider: str = "mock-hash"
    model_name: str = ""                 # defaults to the provider name
    endpoint: str = ""
    api_key_env: str = "CHAT_API_KEY"
    temperature: float = 0.0
    max_retries: int = 3
    retry_base_s: float = 0.5
    timeout_s: float = 60.0
    max_in_flight: int = 4
    noise_sigma: float = 0.5
    seed: int = 0
    truth_bins: dict | None = None       # sample id -> {task key -> true bin}
    script: dict | None = None           # "sample|task|stage" -> response text

    def __post_init__(self):
        if self.provider not in PROVIDERS:
            raise ConfigError(f"unknown provider {self.provider!r}; "
                              f"expected one of {PROVIDERS}")
        if not self.model_name:
            self.model_name = self.provider


@dataclass(frozen=True)
class ModelResponse:
    text: str
    model_id: str
    latency_ms: float
    prompt_tokens: int
    completion_tokens: int


def _require_truth(cfg: ModelConfig, bundle: PromptBundle) -> float:
    table = cfg.truth_bins or {}
    try:
        return float(table[bundle.sample_id][bundle.task])
    except KeyError:
        raise GatewayError(f"mock truth map has no entry for "
                           f"{bundle.sample_id}/{bundle.task}") from None


_CANNED_RATIONALE = (
    "Factors considered for {task}: the coordinate context, the density and "
    "mix of nearby places, and the visible streetscape. Together these "
    "suggest a level consistent with the reference distribution."
)


class MockEcho:
    """Oracle mock: always answers the sample's true bin."""

    def __init__(self, cfg: ModelConfig):
        self.cfg = cfg

    def respond(self, bundle: PromptBundle) -> str:
        if bundle.stage == STAGE_RATIONALE:
            return _CANNED_RATIONALE.format(task=bundle.task)
        return f"{_require_truth(self.cfg, bundle):.1f}"


class MockNoisy:
    """True bin plus seeded N(0, sigma) noise, rounded to 0.1, clamped.

    The standard normal draw depends on (seed, sample, task) but not on
    sigma, so raising sigma scales every per-sample error monotonically.
    """

    def __init__(self, cfg: ModelConfig):
        self.cfg = cfg

    def noise_for(self, sample_id: str, task: str) -> float:
        rng = random.Random(f"{self.cfg.seed}:{sample_id}:{task}")
        return rng.gauss(0.0, 1.0)

    def respond(self, bundle: PromptBundle) -> str:
        if bundle.stage == STAGE_RATIONALE:
            return _CANNED_RATIONALE.format(task=bundle.task)
        truth = _require_truth(self.cfg, bundle)
        noisy = truth + self.cfg.noise_sigma * self.noise_for(bundle.sample_id, bundle.task)
        clamped = min(max(round(noisy, 1), 0.0), 9.9)
        return f"{clamped:.1f}"


class MockScripted:
    def __init__(self, cfg: ModelConfig):
        self.script = cfg.script or {}

    def respond(self, bundle: PromptBundle) -> str:
        key = f"{bundle.sample_id}|{bundle.task}|{bundle.stage}"
        if key not in self.script:
            raise GatewayError(f"no scripted response for {key}")
        return self.script[key]


class MockHash:
    """Deterministic pseudo-model: output depends only on the bundle."""

    def __init__(self, cfg: ModelConfig):
        self.cfg = cfg

    def respond(self, bundle: PromptBundle) -> str:
        digest = bundle.digest()
        if bundle.stage == STAGE_RATIONALE:
            return f"Deterministic rationale {digest[:12]} for {bundle.task}."
        return f"{(int(digest[:8], 16) % 100) / 10.0:.1f}"


class RemoteChat:
    """Adapter for a chat-completion HTTP endpoint.

    Request schema: JSON with model/temperature/messages, the user turn
    carrying text plus base64 image parts. Accepts either a bare
    {"text": ...} reply or an OpenAI-style choices list.
    """

    def __init__(self, cfg: ModelConfig, image_root: Path | None = None, session=None):
        if not cfg.endpoint:
            raise ConfigError("remote-chat provider needs an endpoint")
        self.cfg = cfg
        self.image_root = Path(image_root) if image_root else None
        self._session = session

    def _image_part(self, rel_path: str) -> dict:
        import base64
        data = b""
        if self.image_root is not None:
            data = (self.image_root / rel_path).read_bytes()
        return {"type": "image", "media_type": "image/jpeg",
                "data_b64": base64.b64encode(data).decode("ascii")}

    def respond(self, bundle: PromptBundle) -> str:
        import os

        import requests
        if self._session is None:
            self._session = requests.Session()
        content: list[dict] = [{"type": "text", "text": bundle.user_text}]
        content += [self._image_part(p) for p in bundle.image_attachments]
        payload = {
            "model": self.cfg.model_name,
            "temperature": self.cfg.temperature,
            "messages": [
                {"role": "system", "content": bundle.system_text},
                {"role": "user", "content": content},
            ],
        }
        headers = {"content-type": "application/json"}
        api_key = os.environ.get(self.cfg.api_key_env, "")
        if api_key:
            headers["authorization"] = f"Bearer {api_key}"
        try:
            r = self._session.post(self.cfg.endpoint, json=payload, headers=headers,
                                   timeout=self.cfg.timeout_s)
        except requests.Timeout as e:
            raise TimeoutError(f"chat endpoint timed out: {e}") from e
        except requests.RequestException as e:
            raise GatewayError(f"chat endpoint failed: {e}") from e
        if r.status_code != 200:
            raise GatewayError(f"chat endpoint HTTP {r.status_code}")
        body = r.json()
        if "text" in body:
            return body["text"]
        try:
            return body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError):
            raise GatewayError("unrecognized chat completion response shape") from None


def _make_provider(cfg: ModelConfig, image_root: Path | None = None):
    if cfg.provider == "mock-echo":
        return MockEcho(cfg)
    if cfg.provider == "mock-noisy":
        return MockNoisy(cfg)
    if cfg.provider == "mock-scripted":
        return MockScripted(cfg)
    if cfg.provider == "mock-hash":
        return MockHash(cfg)
    return RemoteChat(cfg, image_root=image_root)


class Gateway:
    """Dispatches bundles to the configured provider with retry/backoff."""

    def __init__(self, cfg: ModelConfig, image_root: Path | None = None,
                 transcript_path: Path | None = None, sleep=time.sleep):
        self.cfg = cfg
        self.provider = _make_provider(cfg, image_root)
        self.model_id = cfg.model_name
        self.calls = 0
        self._retryable = cfg.provider == "remote-chat"
        self._sleep = sleep
        self._lock = threading.Lock()
        self._gate = threading.Semaphore(max(1, cfg.max_in_flight))
        self._transcript_path = Path(transcript_path) if transcript_path else None

    def complete(self, bundle: PromptBundle) -> ModelResponse:
        with self._lock:
            self.calls += 1
        start = time.monotonic()
        attempts = self.cfg.max_retries if self._retryable else 1
        last: Exception | None = None
        text: str | None = None
        for attempt in range(attempts):
            if attempt:
                self._sleep(self.cfg.retry_base_s * 2 ** (attempt - 1))
            try:
                with self._gate:
                    text = self.provider.respond(bundle)
                break
            except TimeoutError as e:
                last = e
            except GatewayError as e:
                if not self._retryable:
                    raise
                last = e
        if text is None:
            if isinstance(last, TimeoutError):
                raise TimeoutError(f"gateway timed out after {attempts} attempts: {last}")
            raise GatewayError(f"gateway failed after {attempts} attempts: {last}")
        latency_ms = (time.monotonic() - start) * 1000.0
        response = ModelResponse(text=text, model_id=self.model_id,
                                 latency_ms=latency_ms,
                                 prompt_tokens=len(bundle.user_text.split()),
                                 completion_tokens=len(text.split()))
        self._record_transcript(bundle, response)
        return response

    def _record_transcript(self, bundle: PromptBundle, response: ModelResponse) -> None:
        if self._transcript_path is None:
            return
        row = {
            "sample_id": bundle.sample_id, "task": bundle.task, "stage": bundle.stage,
            "template_version": bundle.template_version,
            "system_text": bundle.system_text, "user_text": bundle.user_text,
            "image_attachments": list(bundle.image_attachments),
            "prompt_hash": bundle.digest(), "response_text": response.text,
            "model_id": response.model_id,
        }
        with self._lock:
            self._transcript_path.parent.mkdir(parents=True, exist_ok=True)
            with self._transcript_path.open("a") as fh:
                fh.write(json.dumps(row, sort_keys=True) + "\n")


_BIN_TOKEN = re.compile(r"\d\.\d")


def parse_bin_answer(text: str) -> BinLabel:
    """First digit.digit token anywhere in the text, clamped to the scale."""
    m = _BIN_TOKEN.search(text)
    if m is None:
        raise ParseError(f"no bin answer found in {text!r}")
    value = min(max(float(m.group()), 0.0), 9.9)
    return BinLabel(value)


def predict_sample(ctx: GeoContext, task: IndicatorTask, scale: BinScale,
                   flags: AblationFlags, gateway: Gateway,
                   answer_images: bool = True) -> PredictionRecord:
    """Run the staged prediction for one sample.

    Two gateway calls with chain-of-thought enabled (rationale, then
    answer), one otherwise. Gateway and parse errors are re-raised with
    the sample id attached.
    """
    sample_id = ctx.point.id
    before = gateway.calls
    rationale = Rationale(text="")
    hashes: list[str] = []
    try:
        if flags.use_cot:
            r_bundle = render_rationale_prompt(ctx, task, flags)
            hashes.append(r_bundle.digest())
            r_resp = gateway.complete(r_bundle)
            rationale = Rationale(text=r_resp.text, token_count=r_resp.completion_tokens,
                                  model_id=r_resp.model_id, latency_ms=r_resp.latency_ms)
        a_bundle = render_answer_prompt(ctx, rationale, task, scale, flags,
                                        answer_images=answer_images)
        hashes.append(a_bundle.digest())
        a_resp = gateway.complete(a_bundle)
        label = parse_bin_answer(a_resp.text)
    except (GatewayError, ParseError, TimeoutError) as e:
        err = type(e)(f"sample {sample_id}/{task.key}: {e}")
        err.sample_id = sample_id
        raise err from e
    return PredictionRecord(
        sample_id=sample_id, city="", task=task.key, model=gateway.model_id,
        pred_bin=label.value, rationale_text=rationale.text, answer_text=a_resp.text,
        prompt_hashes=hashes, template_version=a_bundle.template_version,
        gateway_calls=gateway.calls - before)
