"""Pipeline configuration.

Dataclass settings with defaults matching the documented experimental
values (chunk 512/100, five variants, RRF depth 200 with k=60, BM25
k1=0.9 b=0.4, context k=10 with 5 samples, Elo k=8 over 100
permutations). A YAML or JSON file overrides any subset; API keys come
from the environment only.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigError
from .gateway import Gateway, HttpChatProvider, MockProvider


@dataclass
class ChunkSettings:
    size: int = 512
    overlap: int = 100


@dataclass
class PoolSettings:
    variants: int = 5
    depth: int = 200
    k_rrf: int = 60
    bm25_k1: float = 0.9
    bm25_b: float = 0.4


@dataclass
class ModelSettings:
    variant_model: str = "vargen-mock"
    assess_models: tuple[str, ...] = ("judge-a-mock", "judge-b-mock",
                                      "judge-c-mock")
    embed_model: str = "embed-mock"
    answer_model: str = "writer-mock"
    ragas_model: str = "grader-mock"
    pair_judge_model: str = "referee-mock"


@dataclass
class RagSettings:
    context_k: int = 10
    samples: int = 5
    questions: int = 5


@dataclass
class EloSettings:
    k: float = 8.0
    permutations: int = 100
    seed: int = 17


@dataclass
class ProviderSettings:
    name: str
    base_url: str
    api_key_env: str | None = None
    models: tuple[str, ...] = ()
    # per-1000-unit (input, output) currency costs, keyed by model tag
    costs: dict[str, tuple[float, float]] = field(default_factory=dict)


@dataclass
class GatewaySettings:
    mock: bool = True
    mock_seed: int = 17
    max_inflight: int = 4
    providers: tuple[ProviderSettings, ...] = ()


@dataclass
class AcquisitionSettings:
    providers: tuple[str, ...] = ("openalex", "unpaywall")
    email: str | None = None
    publisher_url_template: str | None = None
    concurrency: int = 8


@dataclass
class ServeSettings:
    host: str = "127.0.0.1"
    port: int = 8777
    ui_origin: str = "*"
    annotators: tuple[str, ...] = ()
    top_n: int = 5
    bottom_n: int = 5
    audit_n: int = 0
    audit_seed: int = 7


@dataclass
class PipelineConfig:
    store: str = "store"
    seed: int = 17
    modalities: tuple[str, ...] = ("passage", "table")
    prompt_dir: str | None = None
    chunk: ChunkSettings = field(default_factory=ChunkSettings)
    pool: PoolSettings = field(default_factory=PoolSettings)
    models: ModelSettings = field(default_factory=ModelSettings)
    rag: RagSettings = field(default_factory=RagSettings)
    elo: EloSettings = field(default_factory=EloSettings)
    gateway: GatewaySettings = field(default_factory=GatewaySettings)
    acquisition: AcquisitionSettings = field(default_factory=AcquisitionSettings)
    serve: ServeSettings = field(default_factory=ServeSettings)


def _merge(dc, data: dict):
    """Overlay a dict onto a dataclass instance, recursing into nested ones."""
    for key, value in data.items():
        if not hasattr(dc, key):
            raise ConfigError(f"unknown config key {key!r} for {type(dc).__name__}")
        current = getattr(dc, key)
        if hasattr(current, "__dataclass_fields__") and isinstance(value, dict):
            _merge(current, value)
        elif isinstance(current, tuple) and isinstance(value, list):
            setattr(dc, key, tuple(value))
        else:
            setattr(dc, key, value)
    return dc


def load_config(path: str | Path | None = None) -> PipelineConfig:
    config = PipelineConfig()
    if path is None:
        return config
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix in (".yaml", ".yml"):
        data = yaml.safe_load(text) or {}
    else:
        data = json.loads(text)
    providers = data.get("gateway", {}).pop("providers", None)
    _merge(config, data)
    if providers is not None:
        config.gateway.providers = tuple(
            ProviderSettings(
                name=p["name"], base_url=p["base_url"],
                api_key_env=p.get("api_key_env"),
                models=tuple(p.get("models", ())),
                costs={m: tuple(c) for m, c in p.get("costs", {}).items()})
            for p in providers)
    check_family_guard(config)
    return config


def model_family(model_tag: str) -> str:
    """Leading tag segment, the coarse vendor/family marker."""
    return model_tag.split("-")[0].split("/")[0].lower()


def check_family_guard(config: PipelineConfig) -> list[str]:
    """Warn when answers would be judged by their own model family.

    Same-family generation and judging invites self-enhancement bias;
    this is a warning rather than a hard error so deliberate setups
    still run.
    """
    notes = []
    answer_family = model_family(config.models.answer_model)
    for role, tag in (("pair_judge_model", config.models.pair_judge_model),
                      ("ragas_model", config.models.ragas_model)):
        if model_family(tag) == answer_family:
            notes.append(
                f"{role} {tag!r} shares the model family "
                f"{answer_family!r} with answer_model "
                f"{config.models.answer_model!r}; prefer different families")
    for note in notes:
        warnings.warn(note, stacklevel=2)
    return notes


def build_gateway(config: PipelineConfig, sleep=None) -> Gateway:
    """Construct the gateway from config: a mock by default, HTTP otherwise."""
    costs: dict[str, tuple[float, float]] = {}
    provider_for = {}
    for settings in config.gateway.providers:
        provider = HttpChatProvider(settings.base_url,
                                    api_key_env=settings.api_key_env)
        for model in settings.models:
            provider_for[model] = provider
        costs.update(settings.costs)
    default = MockProvider(seed=config.gateway.mock_seed) \
        if config.gateway.mock else None
    kwargs = {"sleep": sleep} if sleep is not None else {}
    return Gateway(default_provider=default, provider_for=provider_for,
                   costs=costs, max_inflight=config.gateway.max_inflight,
                   **kwargs)
